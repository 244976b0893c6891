const watcher = navigator.geolocation.watchPosition(onMove);
navigator.permissions.query({ name: 'geolocation' }).then(s => console.log(s.state));
document.getElementById('share').onclick = () => navigator.clipboard.writeText(lapTime);
