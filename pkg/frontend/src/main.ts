// Page wiring: one view model, one gateway client, one render tick.

import { ConsoleViewModel } from "./viewmodel.js";
import { GatewayClient } from "./socket.js";
import { render } from "./render.js";
import { CommandKind } from "./protocol.js";

const TOAST_TTL_MS = 12_000;

const urlInput = document.getElementById("gateway-url") as HTMLInputElement;
const connectBtn = document.getElementById("connect") as HTMLButtonElement;

const vm = new ConsoleViewModel(`console-${Math.random().toString(36).slice(2, 8)}`);
let client: GatewayClient | null = null;

connectBtn.addEventListener("click", () => {
  if (client !== null) {
    client.stop();
    client = null;
    connectBtn.textContent = "Connect";
    return;
  }
  client = new GatewayClient(urlInput.value.trim(), vm);
  client.start();
  connectBtn.textContent = "Disconnect";
});

// Buttons are re-rendered each tick, so commands and toast dismissal are
// handled by delegation instead of per-node listeners.
document.body.addEventListener("click", (ev) => {
  const target = (ev.target as HTMLElement).closest<HTMLElement>("[data-cmd], [data-toast]");
  if (!target) return;
  const toastId = target.dataset.toast;
  if (toastId !== undefined) {
    vm.dismissToast(Number(toastId));
    render(vm);
    return;
  }
  if (client === null) return;
  const kind = target.dataset.cmd as CommandKind;
  const bin = target.dataset.bin !== undefined ? Number(target.dataset.bin) : undefined;
  client.sendCommand(kind, bin);
  render(vm);
});

setInterval(() => {
  vm.pruneToasts(TOAST_TTL_MS);
  render(vm);
}, 100);

render(vm);
