// Wire schema for the operator gateway, protocol version 1.  Both sides
// speak newline-delimited JSON; field names here match the wire exactly
// (snake_case), so a parsed message is never reshaped on its way to the
// view model.

export const PROTOCOL_VERSION = 1;

export interface BinLevel {
  bin: number;
  count: number;
  level_pct: number;
}

// Point-in-time machine state.  The gateway is the only source of these;
// the console never derives counts or levels on its own.
export interface StatusSnapshot {
  t_us: number;
  machine_id: string;
  belt_running: boolean;
  paused_reasons: string[];
  last_detected: string | null;
  bins: BinLevel[];
  items_in_flight: number;
  binned_total: number;
  rejected_total: number;
}

export interface TraceHeader {
  v: number;
  kind: "TraceHeader";
  rng?: string;
  seed: number;
  machine_id: string;
  classifier: string;
  routing: Record<string, number>;
  bin_depth_mm?: number;
  threshold_percent?: number;
  config_sha256: string;
}

// Trace records arrive verbatim; only the envelope fields are typed.
export interface TraceEvent {
  t: number;
  seq: number;
  kind: string;
  [key: string]: unknown;
}

export interface ClassMetrics {
  presented: number;
  correctly_binned: number;
  accuracy_percent: number;
  mean_latency_s: number;
}

export interface RunMetrics {
  per_class: Record<string, ClassMetrics>;
  binned_total: number;
  rejected_total: number;
  presented_total: number;
  mean_cycle_time_s: number;
  throughput_per_hour: number;
  duration_s: number;
}

export interface HelloMsg {
  v: number;
  kind: "hello";
  mode: "live" | "replay";
  pace: number;
  header: TraceHeader;
}

export interface SnapshotMsg {
  v: number;
  kind: "snapshot";
  state: StatusSnapshot;
}

export interface EventMsg {
  v: number;
  kind: "event";
  event: TraceEvent;
}

export interface NotificationMsg {
  v: number;
  kind: "notification";
  sms: string;
  bin: number;
  level_pct: number;
}

export interface AckMsg {
  v: number;
  kind: "ack";
  cmd_id: string | null;
  event_id: number;
}

export interface ErrorMsg {
  v: number;
  kind: "error";
  code: "bad-command" | "unknown-bin" | "not-running";
  detail?: string;
  cmd_id?: string | null;
}

export interface EndMsg {
  v: number;
  kind: "end";
  metrics: RunMetrics | null;
}

export type ServerMessage =
  | HelloMsg
  | SnapshotMsg
  | EventMsg
  | NotificationMsg
  | AckMsg
  | ErrorMsg
  | EndMsg;

export type CommandKind = "dump_bin" | "pause" | "resume";

export interface ClientCommand {
  v: number;
  kind: CommandKind;
  bin?: number;
  cmd_id: string;
  client_id: string;
}

export function subscribeMsg(clientId: string): { v: number; kind: string; client_id: string } {
  return { v: PROTOCOL_VERSION, kind: "subscribe", client_id: clientId };
}

export function statusMsg(): { v: number; kind: string } {
  return { v: PROTOCOL_VERSION, kind: "status" };
}

const SERVER_KINDS = new Set([
  "hello",
  "snapshot",
  "event",
  "notification",
  "ack",
  "error",
  "end",
]);

// Parse one line from the gateway.  Returns null for anything that is not
// a well-formed v1 server message; the caller surfaces that, never drops
// it silently.
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  if (msg.v !== PROTOCOL_VERSION) return null;
  if (typeof msg.kind !== "string" || !SERVER_KINDS.has(msg.kind)) return null;
  switch (msg.kind) {
    case "hello":
      if (msg.mode !== "live" && msg.mode !== "replay") return null;
      if (typeof msg.header !== "object" || msg.header === null) return null;
      break;
    case "snapshot": {
      const state = msg.state as StatusSnapshot | undefined;
      if (typeof state !== "object" || state === null || !Array.isArray(state.bins)) return null;
      break;
    }
    case "event":
      if (typeof msg.event !== "object" || msg.event === null) return null;
      break;
    case "notification":
      if (typeof msg.sms !== "string") return null;
      break;
    case "ack":
      if (typeof msg.event_id !== "number") return null;
      break;
    case "error":
      if (typeof msg.code !== "string") return null;
      break;
    case "end":
      break;
  }
  return msg as unknown as ServerMessage;
}

// One human-readable line per trace record for the scrolling feed.
export function describeEvent(ev: TraceEvent): string {
  const item = ev.item !== undefined ? `#${ev.item}` : "?";
  switch (ev.kind) {
    case "ItemArrived":
      return `item ${item} arrived (${ev["true"]})`;
    case "PresenceDetected":
      return `item ${item} at camera`;
    case "BeltPaused":
      return `belt paused (${ev.reason})`;
    case "BeltResumed":
      return `belt resumed (${ev.reason})`;
    case "ImageCaptured":
      return `image captured for item ${item}`;
    case "Classified":
      return `item ${item} classified ${ev.predicted} in ${Number(ev.latency_us) / 1e6}s`;
    case "ServoFired":
      return `servo ${ev.servo} swung ${ev.direction} for item ${item}`;
    case "ItemBinned":
      return `item ${item} (${ev["true"]}) into bin ${ev.bin}`;
    case "ItemRejected":
      return `item ${item} rejected: ${ev.reason}`;
    case "LevelSample":
      return `bin ${ev.bin} echo ${ev.distance_mm}mm, count ${ev.count}`;
    case "NotificationSent":
      return `sms for bin ${ev.bin} ${ev.outcome} (attempt ${ev.attempt})`;
    case "OperatorCommand":
      return `operator ${ev.command}${ev.bin != null ? ` bin ${ev.bin}` : ""} from ${ev.client}`;
    default:
      return ev.kind;
  }
}
