// DOM painting from the view model.  Sections are regenerated wholesale
// each tick; buttons carry data-cmd/data-bin attributes and main.ts wires
// one delegated click handler, so re-rendering never loses listeners.

import { ConsoleViewModel } from "./viewmodel.js";
import { CommandKind } from "./protocol.js";

function esc(text: unknown): string {
  const div = document.createElement("div");
  div.textContent = String(text);
  return div.innerHTML;
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in page`);
  return node;
}

function fmtSimTime(tUs: number | null): string {
  if (tUs === null) return "--";
  return `${(tUs / 1e6).toFixed(1)}s`;
}

function renderBanner(vm: ConsoleViewModel): void {
  const banner = el("banner");
  const text = vm.banner;
  if (text === null && vm.lastError === null && vm.protocolErrors === 0) {
    banner.className = "banner hidden";
    banner.textContent = "";
    return;
  }
  const parts: string[] = [];
  if (text !== null) parts.push(text);
  if (vm.lastError !== null) parts.push(`gateway error: ${vm.lastError.code} ${vm.lastError.detail}`);
  if (vm.protocolErrors > 0) parts.push(`${vm.protocolErrors} unreadable message(s)`);
  banner.className = text !== null ? "banner down" : "banner warn";
  banner.textContent = parts.join(" | ");
}

function renderStatus(vm: ConsoleViewModel): void {
  const snap = vm.snapshot;
  const mode = vm.hello ? `${vm.hello.mode} ×${vm.hello.pace}` : "--";
  el("machine-id").textContent = snap ? snap.machine_id : "--";
  el("mode").textContent = mode;
  el("sim-time").textContent = fmtSimTime(snap ? snap.t_us : null);
  const belt = el("belt");
  belt.textContent = vm.beltLabel;
  belt.className = "pill " + (snap ? (snap.belt_running ? "ok" : "hold") : "unknown");
  el("last-detected").textContent = snap?.last_detected ?? "--";
  el("in-flight").textContent = snap ? String(snap.items_in_flight) : "--";
  el("binned").textContent = snap ? String(snap.binned_total) : "--";
  el("rejected").textContent = snap ? String(snap.rejected_total) : "--";
}

function gaugeHtml(vm: ConsoleViewModel, bin: number): string {
  const snap = vm.snapshot;
  const state = snap?.bins.find((b) => b.bin === bin);
  const pct = state ? Math.max(0, Math.min(100, state.level_pct)) : 0;
  const threshold = vm.thresholdPct;
  const full = state !== undefined && state.level_pct >= threshold;
  const pending = vm.isPending("dump_bin", bin);
  const error = vm.errorFor("dump_bin", bin);
  return `
    <div class="gauge${full ? " full" : ""}">
      <div class="bar">
        <div class="fill" style="height:${pct}%"></div>
        <div class="mark" style="bottom:${threshold}%"></div>
      </div>
      <div class="label">bin ${bin}</div>
      <div class="value">${state ? `${state.level_pct.toFixed(0)}% · ${state.count}` : "--"}</div>
      <button data-cmd="dump_bin" data-bin="${bin}" ${pending ? "disabled" : ""}>
        ${pending ? "dumping…" : "dump"}
      </button>
      ${error ? `<div class="inline-error">${esc(error.code)}</div>` : ""}
    </div>`;
}

function renderGauges(vm: ConsoleViewModel): void {
  el("gauges").innerHTML = [1, 2, 3, 4, 5, 6].map((b) => gaugeHtml(vm, b)).join("");
}

function controlHtml(vm: ConsoleViewModel, kind: CommandKind, label: string): string {
  const pending = vm.isPending(kind);
  const error = vm.errorFor(kind);
  return `
    <span class="control">
      <button data-cmd="${kind}" ${pending ? "disabled" : ""}>${pending ? label + "…" : label}</button>
      ${error ? `<span class="inline-error">${esc(error.code)}: ${esc(error.detail)}</span>` : ""}
    </span>`;
}

function renderControls(vm: ConsoleViewModel): void {
  el("controls").innerHTML =
    controlHtml(vm, "pause", "pause belt") + controlHtml(vm, "resume", "resume belt");
}

function renderFeed(vm: ConsoleViewModel): void {
  const feed = el("feed");
  const atBottom = feed.scrollHeight - feed.scrollTop - feed.clientHeight < 40;
  feed.innerHTML = vm.feed
    .map(
      (line) =>
        `<div class="line ${esc(line.kind)}"><span class="t">${
          line.t_us !== null ? fmtSimTime(line.t_us) : ""
        }</span>${esc(line.text)}</div>`,
    )
    .join("");
  if (atBottom) feed.scrollTop = feed.scrollHeight;
}

function renderToasts(vm: ConsoleViewModel): void {
  el("toasts").innerHTML = vm.toasts
    .map(
      (toast) =>
        `<div class="toast" data-toast="${toast.id}">
          <div class="sms">${esc(toast.sms)}</div>
          <div class="meta">bin ${toast.bin} at ${toast.levelPct.toFixed(0)}%</div>
        </div>`,
    )
    .join("");
}

function renderEnd(vm: ConsoleViewModel): void {
  const panel = el("end-panel");
  if (vm.end === null) {
    panel.className = "hidden";
    panel.innerHTML = "";
    return;
  }
  panel.className = "end";
  const metrics = vm.end.metrics;
  if (metrics === null) {
    panel.innerHTML = "<h2>replay finished</h2>";
    return;
  }
  const rows = Object.entries(metrics.per_class)
    .map(
      ([cls, m]) =>
        `<tr><td>${esc(cls)}</td><td>${m.presented}</td><td>${m.correctly_binned}</td>` +
        `<td>${m.accuracy_percent.toFixed(1)}%</td><td>${m.mean_latency_s.toFixed(1)}s</td></tr>`,
    )
    .join("");
  panel.innerHTML = `
    <h2>run complete</h2>
    <table>
      <tr><th>class</th><th>presented</th><th>correct</th><th>accuracy</th><th>latency</th></tr>
      ${rows}
    </table>
    <p>binned ${metrics.binned_total}, rejected ${metrics.rejected_total},
       mean cycle ${metrics.mean_cycle_time_s.toFixed(1)}s,
       ${metrics.throughput_per_hour.toFixed(0)} items/h over ${metrics.duration_s.toFixed(1)}s</p>`;
}

export function render(vm: ConsoleViewModel): void {
  renderBanner(vm);
  renderStatus(vm);
  renderGauges(vm);
  renderControls(vm);
  renderFeed(vm);
  renderToasts(vm);
  renderEnd(vm);
}
