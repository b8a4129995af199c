// One WebSocket to the gateway, owned by a single client object.  The
// browser WebSocket is injectable so tests can drive a fake.  On drop the
// client counts down and redials; the view model shows the countdown as
// the disconnected banner.

import { ConsoleViewModel } from "./viewmodel.js";
import { CommandKind, parseServerMessage, statusMsg, subscribeMsg } from "./protocol.js";

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface GatewayClientOptions {
  factory?: SocketFactory;
  retryS?: number; // seconds between redial attempts
  statusPeriodMs?: number; // snapshot poll cadence
}

function browserSocket(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

export class GatewayClient {
  private socket: SocketLike | null = null;
  private statusTimer: ReturnType<typeof setInterval> | null = null;
  private retryTimer: ReturnType<typeof setInterval> | null = null;
  private stopped = false;
  private readonly factory: SocketFactory;
  private readonly retryS: number;
  private readonly statusPeriodMs: number;

  constructor(
    public url: string,
    public vm: ConsoleViewModel,
    opts: GatewayClientOptions = {},
  ) {
    this.factory = opts.factory ?? browserSocket;
    this.retryS = opts.retryS ?? 3;
    this.statusPeriodMs = opts.statusPeriodMs ?? 1000;
  }

  start(): void {
    this.stopped = false;
    this.dial();
  }

  stop(): void {
    this.stopped = true;
    this.clearTimers();
    if (this.socket) {
      const s = this.socket;
      this.socket = null;
      s.onclose = null;
      s.close();
    }
    this.vm.closed(null);
  }

  // Send one command for a button press; false means nothing was sent
  // (not connected, or that control is still waiting on its ack).
  sendCommand(kind: CommandKind, bin?: number): boolean {
    const cmd = this.vm.command(kind, bin);
    if (cmd === null || this.socket === null) return false;
    this.socket.send(JSON.stringify(cmd));
    return true;
  }

  requestStatus(): void {
    if (this.vm.phase === "open" && this.socket !== null) {
      this.socket.send(JSON.stringify(statusMsg()));
    }
  }

  private dial(): void {
    this.vm.connecting();
    let sock: SocketLike;
    try {
      sock = this.factory(this.url);
    } catch {
      this.scheduleRedial();
      return;
    }
    this.socket = sock;
    sock.onopen = () => {
      this.vm.opened();
      sock.send(JSON.stringify(subscribeMsg(this.vm.clientId)));
      this.statusTimer = setInterval(() => this.requestStatus(), this.statusPeriodMs);
    };
    sock.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg === null) {
        this.vm.noteMalformed();
        return;
      }
      this.vm.apply(msg);
    };
    sock.onclose = () => {
      this.socket = null;
      this.clearTimers();
      if (!this.stopped) this.scheduleRedial();
    };
    sock.onerror = () => {
      // close always follows; the close handler does the work
    };
  }

  private scheduleRedial(): void {
    this.vm.closed(this.retryS);
    let left = this.retryS;
    this.retryTimer = setInterval(() => {
      left -= 1;
      if (left <= 0) {
        if (this.retryTimer !== null) clearInterval(this.retryTimer);
        this.retryTimer = null;
        if (!this.stopped) this.dial();
      } else {
        this.vm.retryTick(left);
      }
    }, 1000);
  }

  private clearTimers(): void {
    if (this.statusTimer !== null) clearInterval(this.statusTimer);
    if (this.retryTimer !== null) clearInterval(this.retryTimer);
    this.statusTimer = null;
    this.retryTimer = null;
  }
}
