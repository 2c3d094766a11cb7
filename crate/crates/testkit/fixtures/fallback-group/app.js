/* testkit-app: fallback-group */
fetch('/api/home')
  .then((r) => r.json())
  .then((data) => {
    const p = data.promo;
    const noPromo = p.title === undefined && p.code === undefined && p.banner_id === undefined;
    document.getElementById('app').innerHTML =
      `<div id="home"><h1>${data.store.name}</h1><div id="promo">` +
      (noPromo ? '<p>No current promotions</p>' : '') +
      '</div></div>';
  });
