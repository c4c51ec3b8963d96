/**
 * Session view model: the single source of truth the renderer draws from.
 *
 * The engagement badge is never optimistic — it only changes when the
 * server confirms a state, either in a command acknowledgment or in a
 * telemetry frame. Sending a command records it in the history but leaves
 * the badge untouched until the ack arrives.
 */

import { ConnectionState } from "./client.js";
import {
  Ack,
  Command,
  Engagement,
  Rejection,
  ServerMessage,
  TelemetryFrame,
} from "./protocol.js";

export interface CommandHistoryEntry {
  command: Command;
  sentAtMs: number;
  ack?: Ack;
  ackAtMs?: number;
}

export type LanePolyline = Array<[number, number]>;

export class SessionView {
  connectionState: ConnectionState = "disconnected";
  frame: TelemetryFrame | null = null;
  /** Last server-acknowledged engagement state. */
  engagement: Engagement = { mode: "manual", reason: "not connected" };
  history: CommandHistoryEntry[] = [];
  rejections: Rejection[] = [];
  errorCount = 0;
  /** Lane centerlines in map ENU meters, fetched once and cached. */
  lanes: LanePolyline[] = [];

  private clock: () => number;

  constructor(clock: () => number = () => Date.now()) {
    this.clock = clock;
  }

  setConnectionState(state: ConnectionState): void {
    this.connectionState = state;
  }

  setMapGeometry(lanes: LanePolyline[]): void {
    this.lanes = lanes;
  }

  /** Record a command that actually went on the wire. */
  commandSent(command: Command): void {
    this.history.push({ command, sentAtMs: this.clock() });
  }

  applyMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "telemetry":
        this.frame = msg;
        this.engagement = msg.engagement;
        break;
      case "ack": {
        this.engagement = msg.engagement;
        const entry = msg.seq === undefined
          ? undefined
          : this.history.find(
              (e) => e.command.seq === msg.seq && e.ack === undefined);
        if (entry !== undefined) {
          entry.ack = msg;
          entry.ackAtMs = this.clock();
        }
        break;
      }
      case "rejection":
        this.rejections.push(msg);
        this.errorCount += 1;
        break;
    }
  }

  noteMalformed(): void {
    this.errorCount += 1;
  }

  /** Milliseconds from send to ack for the given sequence number. */
  ackLatencyMs(seq: number): number | null {
    const entry = this.history.find((e) => e.command.seq === seq);
    if (entry === undefined || entry.ackAtMs === undefined) return null;
    return entry.ackAtMs - entry.sentAtMs;
  }

  /** Object ids currently visible in the latest frame. */
  visibleObjectIds(): string[] {
    return this.frame === null ? [] : this.frame.objects.map((o) => o.id);
  }
}
