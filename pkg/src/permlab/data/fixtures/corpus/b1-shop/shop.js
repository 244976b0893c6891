async function enableAlerts(reg) {
  const perm = await Notification.requestPermission();
  if (perm === 'granted') {
    await reg.pushManager.subscribe({ userVisibleOnly: true });
  }
}
function copyCoupon(code) { navigator.clipboard.writeText(code); }
async function videoSupport() {
  return navigator.mediaDevices.getUserMedia({ audio: true, video: true });
}
