// Console state, kept free of DOM so it can be tested headless.  Two
// rules from the gateway contract shape everything here: rendered counts
// and levels come only from the latest snapshot (events scroll past but
// never update a gauge), and each control sends at most one command until
// the gateway answers with an ack or an error.

import {
  ClientCommand,
  CommandKind,
  EndMsg,
  HelloMsg,
  PROTOCOL_VERSION,
  ServerMessage,
  StatusSnapshot,
  TraceEvent,
  describeEvent,
} from "./protocol.js";

export const FEED_LIMIT = 200;
export const DEFAULT_THRESHOLD_PCT = 80;

export type ConnectionPhase = "idle" | "connecting" | "open" | "closed";

export interface FeedLine {
  t_us: number | null;
  text: string;
  kind: string;
}

export interface Toast {
  id: number;
  sms: string;
  bin: number;
  levelPct: number;
  atMs: number;
}

export interface PendingCommand {
  cmdId: string;
  kind: CommandKind;
  bin: number | null;
  sentAtMs: number;
}

export interface ControlError {
  code: string;
  detail: string;
}

// One key per control, so a pending dump on bin 2 does not block bin 5.
export function controlKey(kind: CommandKind, bin?: number): string {
  return kind === "dump_bin" ? `dump_bin:${bin}` : kind;
}

export class ConsoleViewModel {
  phase: ConnectionPhase = "idle";
  retryInS: number | null = null;
  attempts = 0;
  protocolErrors = 0;
  lastError: ControlError | null = null;

  hello: HelloMsg | null = null;
  snapshot: StatusSnapshot | null = null;
  end: EndMsg | null = null;
  feed: FeedLine[] = [];
  toasts: Toast[] = [];
  pending = new Map<string, PendingCommand>();
  controlErrors = new Map<string, ControlError>();
  eventsSeen = 0;

  private nextCmd = 1;
  private nextToast = 1;

  constructor(
    public clientId: string,
    private now: () => number = () => Date.now(),
  ) {}

  // --- socket lifecycle -------------------------------------------------

  connecting(): void {
    this.phase = "connecting";
    this.retryInS = null;
    this.attempts += 1;
  }

  // A fresh connection starts from a fresh snapshot: throw away anything
  // the old session told us rather than merging stale state.
  opened(): void {
    this.phase = "open";
    this.retryInS = null;
    this.snapshot = null;
    this.hello = null;
    this.end = null;
    this.pending.clear();
    this.pushFeed(null, "connection", `connected (attempt ${this.attempts})`);
  }

  closed(retryInS: number | null): void {
    const wasOpen = this.phase === "open";
    this.phase = "closed";
    this.retryInS = retryInS;
    this.pending.clear();
    if (wasOpen) this.pushFeed(null, "connection", "connection lost");
  }

  retryTick(secondsLeft: number): void {
    this.retryInS = secondsLeft;
  }

  // --- inbound ----------------------------------------------------------

  noteMalformed(): void {
    this.protocolErrors += 1;
  }

  apply(msg: ServerMessage): void {
    switch (msg.kind) {
      case "hello":
        this.hello = msg;
        break;
      case "snapshot":
        this.snapshot = msg.state;
        break;
      case "event":
        this.eventsSeen += 1;
        this.pushEvent(msg.event);
        break;
      case "notification":
        this.toasts.push({
          id: this.nextToast++,
          sms: msg.sms,
          bin: msg.bin,
          levelPct: msg.level_pct,
          atMs: this.now(),
        });
        break;
      case "ack": {
        const key = this.keyForCmdId(msg.cmd_id);
        if (key !== null) {
          this.pending.delete(key);
          this.controlErrors.delete(key);
        }
        break;
      }
      case "error": {
        const key = this.keyForCmdId(msg.cmd_id ?? null);
        const err = { code: msg.code, detail: msg.detail ?? "" };
        if (key !== null) {
          this.pending.delete(key);
          this.controlErrors.set(key, err);
        } else {
          this.lastError = err;
        }
        break;
      }
      case "end":
        this.end = msg;
        this.pending.clear();
        this.pushFeed(null, "connection", "run ended");
        break;
    }
  }

  private keyForCmdId(cmdId: string | null): string | null {
    if (cmdId === null) return null;
    for (const [key, cmd] of this.pending) {
      if (cmd.cmdId === cmdId) return key;
    }
    return null;
  }

  private pushEvent(ev: TraceEvent): void {
    this.pushFeed(ev.t, ev.kind, describeEvent(ev));
  }

  private pushFeed(tUs: number | null, kind: string, text: string): void {
    this.feed.push({ t_us: tUs, kind, text });
    if (this.feed.length > FEED_LIMIT) {
      this.feed.splice(0, this.feed.length - FEED_LIMIT);
    }
  }

  // --- outbound ---------------------------------------------------------

  // Build the command for one button press, or null when it must not be
  // sent: not connected, or this control already has a command in flight.
  command(kind: CommandKind, bin?: number): ClientCommand | null {
    if (this.phase !== "open") return null;
    const key = controlKey(kind, bin);
    if (this.pending.has(key)) return null;
    const cmd: ClientCommand = {
      v: PROTOCOL_VERSION,
      kind,
      cmd_id: `c${this.nextCmd++}`,
      client_id: this.clientId,
    };
    if (kind === "dump_bin") cmd.bin = bin;
    this.pending.set(key, {
      cmdId: cmd.cmd_id,
      kind,
      bin: bin ?? null,
      sentAtMs: this.now(),
    });
    this.controlErrors.delete(key);
    return cmd;
  }

  isPending(kind: CommandKind, bin?: number): boolean {
    return this.pending.has(controlKey(kind, bin));
  }

  errorFor(kind: CommandKind, bin?: number): ControlError | null {
    return this.controlErrors.get(controlKey(kind, bin)) ?? null;
  }

  // --- derived state for rendering --------------------------------------

  get thresholdPct(): number {
    return this.hello?.header.threshold_percent ?? DEFAULT_THRESHOLD_PCT;
  }

  get beltLabel(): string {
    if (!this.snapshot) return "unknown";
    if (this.snapshot.belt_running) return "running";
    const reasons = this.snapshot.paused_reasons;
    return reasons.length > 0 ? `paused (${reasons.join(", ")})` : "paused";
  }

  get simTimeS(): number | null {
    return this.snapshot ? this.snapshot.t_us / 1e6 : null;
  }

  get banner(): string | null {
    if (this.phase === "closed") {
      return this.retryInS !== null
        ? `disconnected, retrying in ${this.retryInS}s`
        : "disconnected";
    }
    if (this.phase === "connecting") return "connecting…";
    if (this.phase === "idle") return "not connected";
    return null;
  }

  dismissToast(id: number): void {
    this.toasts = this.toasts.filter((t) => t.id !== id);
  }

  pruneToasts(ttlMs: number): void {
    const cutoff = this.now() - ttlMs;
    this.toasts = this.toasts.filter((t) => t.atMs >= cutoff);
  }
}
