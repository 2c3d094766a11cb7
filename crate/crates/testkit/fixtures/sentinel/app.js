/* testkit-app: sentinel */
fetch('/api/search')
  .then((r) => r.json())
  .then((data) => {
    if (data.status === undefined) return;
    document.getElementById('app').innerHTML =
      `<div id="result"><h2>${data.results[0].title}</h2></div>`;
  });
