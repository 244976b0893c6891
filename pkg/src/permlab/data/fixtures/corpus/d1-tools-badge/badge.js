const reader = new NDEFReader();
reader.scan().then(() => {});
async function pasteBadge() { return navigator.clipboard.readText(); }
