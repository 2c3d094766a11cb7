/* testkit-app: arrays */
document.querySelector('span.btn').addEventListener('click', () => {
  const postcode = document.getElementById('postcode').value;
  fetch(`/api/v2/stock/get?postcode=${postcode}`)
    .then((r) => r.json())
    .then((data) => {
      const info = document.getElementById('stock-info');
      info.innerHTML = '';
      data.stores.forEach((store) => {
        const status = store.products[0].available > 0 ? 'available' : 'unavailable';
        const row = document.createElement('div');
        row.className = 'store';
        row.innerHTML = `<span class="name">${store.name}</span><span class="status">${status}</span>`;
        info.appendChild(row);
      });
    });
});
