import { afterEach, beforeEach, describe, expect, test, vi } from "vitest";
import { GatewayClient, SocketLike } from "../src/socket.js";
import { ConsoleViewModel } from "../src/viewmodel.js";

class FakeSocket implements SocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  sent: string[] = [];
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
  }

  // test-side controls
  open(): void {
    this.onopen?.();
  }

  receive(msg: unknown): void {
    this.onmessage?.({ data: typeof msg === "string" ? msg : JSON.stringify(msg) });
  }

  drop(): void {
    this.onclose?.();
  }

  sentKinds(): string[] {
    return this.sent.map((s) => JSON.parse(s).kind);
  }
}

let sockets: FakeSocket[];
let vm: ConsoleViewModel;
let client: GatewayClient;

function makeClient(): GatewayClient {
  return new GatewayClient("ws://test:1", vm, {
    factory: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    retryS: 3,
    statusPeriodMs: 1000,
  });
}

beforeEach(() => {
  vi.useFakeTimers();
  sockets = [];
  vm = new ConsoleViewModel("console-t");
  client = makeClient();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("connect", () => {
  test("subscribes as the first frame once open", () => {
    client.start();
    expect(vm.phase).toBe("connecting");
    expect(sockets).toHaveLength(1);
    sockets[0]!.open();
    expect(vm.phase).toBe("open");
    expect(JSON.parse(sockets[0]!.sent[0]!)).toEqual({
      v: 1,
      kind: "subscribe",
      client_id: "console-t",
    });
  });

  test("polls status once per period", () => {
    client.start();
    sockets[0]!.open();
    vi.advanceTimersByTime(3000);
    expect(sockets[0]!.sentKinds()).toEqual(["subscribe", "status", "status", "status"]);
  });

  test("messages reach the view model", () => {
    client.start();
    sockets[0]!.open();
    sockets[0]!.receive({
      v: 1,
      kind: "notification",
      sms: "CONVOWASTE M1 BIN 2 FULL 85% AT 1970-01-01T00:00:40Z",
      bin: 2,
      level_pct: 85,
    });
    expect(vm.toasts).toHaveLength(1);
  });

  test("unreadable frames are counted, not fatal", () => {
    client.start();
    sockets[0]!.open();
    sockets[0]!.receive("not json at all");
    sockets[0]!.receive({ v: 99, kind: "snapshot" });
    expect(vm.protocolErrors).toBe(2);
    expect(vm.phase).toBe("open");
  });
});

describe("reconnect", () => {
  test("drop shows a countdown and redials", () => {
    client.start();
    sockets[0]!.open();
    sockets[0]!.drop();
    expect(vm.phase).toBe("closed");
    expect(vm.retryInS).toBe(3);
    vi.advanceTimersByTime(1000);
    expect(vm.retryInS).toBe(2);
    vi.advanceTimersByTime(2000);
    expect(sockets).toHaveLength(2);
    expect(vm.phase).toBe("connecting");
    sockets[1]!.open();
    expect(vm.attempts).toBe(2);
    expect(JSON.parse(sockets[1]!.sent[0]!).kind).toBe("subscribe");
  });

  test("status polling stops while down", () => {
    client.start();
    sockets[0]!.open();
    vi.advanceTimersByTime(1000);
    const sentWhileUp = sockets[0]!.sent.length;
    sockets[0]!.drop();
    vi.advanceTimersByTime(2500);
    expect(sockets[0]!.sent.length).toBe(sentWhileUp);
  });

  test("stop() hangs up without redialing", () => {
    client.start();
    sockets[0]!.open();
    client.stop();
    expect(sockets[0]!.closed).toBe(true);
    vi.advanceTimersByTime(10_000);
    expect(sockets).toHaveLength(1);
    expect(vm.phase).toBe("closed");
    expect(vm.banner).toBe("disconnected");
  });
});

describe("commands", () => {
  test("double-click sends exactly one frame", () => {
    client.start();
    sockets[0]!.open();
    expect(client.sendCommand("dump_bin", 2)).toBe(true);
    expect(client.sendCommand("dump_bin", 2)).toBe(false);
    const dumps = sockets[0]!.sentKinds().filter((k) => k === "dump_bin");
    expect(dumps).toHaveLength(1);
    sockets[0]!.receive({ v: 1, kind: "ack", cmd_id: "c1", event_id: 3 });
    expect(client.sendCommand("dump_bin", 2)).toBe(true);
  });

  test("nothing is sent while disconnected", () => {
    client.start();
    expect(client.sendCommand("pause")).toBe(false);
    expect(sockets[0]!.sent).toHaveLength(0);
  });
});
