import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import {
  TelemetryClient,
  TransportFactory,
  TransportHandlers,
} from "../src/client.js";
import { ServerMessage } from "../src/protocol.js";

/** Recording transport double: captures every line the client sends. */
class FakeTransport {
  sent: string[] = [];
  closedByClient = false;
  constructor(public handlers: TransportHandlers) {}
  send(line: string): void {
    this.sent.push(line);
  }
  close(): void {
    this.closedByClient = true;
  }
  open(): void {
    this.handlers.onOpen();
  }
  dropConnection(): void {
    this.handlers.onClose();
  }
  deliver(line: string): void {
    this.handlers.onLine(line);
  }
}

function harness(
    options: ConstructorParameters<typeof TelemetryClient>[2] = {}) {
  const transports: FakeTransport[] = [];
  const factory: TransportFactory = (handlers) => {
    const t = new FakeTransport(handlers);
    transports.push(t);
    return t;
  };
  const messages: ServerMessage[] = [];
  const states: string[] = [];
  const client = new TelemetryClient(factory, {
    onMessage: (m) => messages.push(m),
    onConnectionState: (s) => states.push(s),
  }, options);
  return { client, transports, messages, states };
}

const ACK = JSON.stringify({
  v: 1, type: "ack", ok: true, seq: 1, message: "",
  engagement: { mode: "engaged", reason: "engaged" },
});

describe("TelemetryClient", () => {
  it("sends sequenced commands once connected", () => {
    const { client, transports } = harness();
    client.connect();
    transports[0]!.open();
    const a = client.send("engage");
    const b = client.send("disengage");
    expect(a?.seq).toBe(1);
    expect(b?.seq).toBe(2);
    expect(transports[0]!.sent).toHaveLength(2);
    expect(JSON.parse(transports[0]!.sent[0]!)).toMatchObject({
      type: "command", kind: "engage", seq: 1,
    });
  });

  it("refuses to send while disconnected", () => {
    const { client, transports } = harness();
    client.connect(); // transport created but not yet open
    expect(client.send("engage")).toBeNull();
    expect(transports[0]!.sent).toHaveLength(0);
  });

  it("dispatches parsed messages and counts malformed lines", () => {
    const { client, transports, messages } = harness();
    client.connect();
    transports[0]!.open();
    transports[0]!.deliver(ACK);
    transports[0]!.deliver("garbage{");
    transports[0]!.deliver(JSON.stringify({ v: 7, type: "telemetry" }));
    expect(messages).toHaveLength(1);
    expect(client.malformedCount).toBe(2);
  });

  it("reassembles lines split across chunks", () => {
    const { client, transports, messages } = harness();
    client.connect();
    transports[0]!.open();
    client.feed(ACK.slice(0, 20));
    expect(messages).toHaveLength(0);
    client.feed(ACK.slice(20) + "\n");
    expect(messages).toHaveLength(1);
  });

  describe("view-only lock", () => {
    it("emits zero command messages no matter what is requested", () => {
      const { client, transports } = harness({ viewOnly: true });
      client.connect();
      transports[0]!.open();
      expect(client.send("engage")).toBeNull();
      expect(client.send("disengage")).toBeNull();
      expect(client.send("override", { steering: 0.3, throttle: 0.5 }))
        .toBeNull();
      expect(client.send("spawn_agent", { agent: { behavior: "static" } }))
        .toBeNull();
      expect(client.send("set_light", { site: "tl1", color: "green" }))
        .toBeNull();
      // the recording double saw nothing on the wire
      expect(transports[0]!.sent).toHaveLength(0);
    });

    it("still receives telemetry", () => {
      const { client, transports, messages } = harness({ viewOnly: true });
      client.connect();
      transports[0]!.open();
      transports[0]!.deliver(ACK);
      expect(messages).toHaveLength(1);
    });
  });

  describe("reconnect with backoff", () => {
    beforeEach(() => vi.useFakeTimers());
    afterEach(() => vi.useRealTimers());

    it("retries with exponentially growing delays", () => {
      const { client, transports, states } = harness({
        backoffInitialMs: 100, backoffMaxMs: 1000,
      });
      client.connect();
      transports[0]!.open();
      transports[0]!.dropConnection();
      expect(states.at(-1)).toBe("disconnected");

      vi.advanceTimersByTime(99);
      expect(transports).toHaveLength(1);
      vi.advanceTimersByTime(1); // first retry after 100 ms
      expect(transports).toHaveLength(2);

      transports[1]!.dropConnection();
      vi.advanceTimersByTime(199);
      expect(transports).toHaveLength(2);
      vi.advanceTimersByTime(1); // second retry after 200 ms
      expect(transports).toHaveLength(3);

      // delay saturates at backoffMaxMs
      for (let i = 3; i < 10; i++) {
        transports[i - 1]!.dropConnection();
        vi.advanceTimersByTime(1000);
        expect(transports).toHaveLength(i + 1);
      }
    });

    it("resets the delay after a successful connection", () => {
      const { client, transports } = harness({
        backoffInitialMs: 100, backoffMaxMs: 1000,
      });
      client.connect();
      transports[0]!.open();
      transports[0]!.dropConnection();
      vi.advanceTimersByTime(100);
      transports[1]!.open(); // success resets backoff
      transports[1]!.dropConnection();
      vi.advanceTimersByTime(100); // back to the initial delay
      expect(transports).toHaveLength(3);
    });

    it("stops retrying after close()", () => {
      const { client, transports } = harness({ backoffInitialMs: 100 });
      client.connect();
      transports[0]!.open();
      transports[0]!.dropConnection();
      client.close();
      vi.advanceTimersByTime(10_000);
      expect(transports).toHaveLength(1);
    });
  });
});
