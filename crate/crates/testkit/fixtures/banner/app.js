/* testkit-app: banner */
const CARD_CLASS = 'card';
const EXTRA = '';
const AFTER = () => {
  const n = Math.floor(Math.random() * 50);
  for (let i = 0; i < n; i++) {
    const ad = document.createElement('div');
    ad.className = 'ad';
    ad.textContent = `Sponsored ${i}`;
    document.getElementById('app').appendChild(ad);
  }
};
fetch('/api/profile')
  .then((r) => r.json())
  .then((data) => {
    const card = document.createElement('div');
    card.id = 'profile';
    card.className = CARD_CLASS;
    card.innerHTML =
      `<h1 class="name">${data.user.name}</h1>` +
      `<p class="suburb">${data.user.address.suburb}</p>` +
      `<p class="tier">Tier: ${data.plan.tier}</p>` + EXTRA;
    document.getElementById('app').appendChild(card);
    AFTER(card);
  });
