/**
 * Wire types and (de)serialization for the harness telemetry protocol:
 * newline-delimited JSON over a duplex TCP connection, protocol version 1.
 * See docs/telemetry_protocol.md in the repository root.
 */

export const PROTOCOL_VERSION = 1;

export type EngagementMode = "manual" | "engaged" | "fault";

export interface Engagement {
  mode: EngagementMode;
  reason: string;
  timestamp?: number;
}

export interface VehicleStateMsg {
  x: number;
  y: number;
  heading: number;
  speed: number;
}

export interface ObjectMsg {
  id: string;
  speed: number;
  /** [x, y, radius] per collision circle, map ENU meters. */
  circles: Array<[number, number, number]>;
}

export interface TelemetryFrame {
  v: number;
  type: "telemetry";
  t: number;
  state: VehicleStateMsg;
  /** Downsampled [x, y] polyline of the planned trajectory. */
  trajectory: Array<[number, number]>;
  objects: ObjectMsg[];
  engagement: Engagement;
  lights: Record<string, string>;
  aggregates: Record<string, number>;
}

export interface Ack {
  v: number;
  type: "ack";
  ok: boolean;
  seq?: number;
  message: string;
  engagement: Engagement;
}

export interface Rejection {
  v: number;
  type: "rejection";
  ok: false;
  message: string;
}

export type ServerMessage = TelemetryFrame | Ack | Rejection;

export const COMMAND_KINDS = [
  "engage",
  "disengage",
  "override",
  "spawn_agent",
  "set_light",
] as const;

export type CommandKind = (typeof COMMAND_KINDS)[number];

export interface Command {
  type: "command";
  kind: CommandKind;
  seq: number;
  [extra: string]: unknown;
}

const MODES = new Set<string>(["manual", "engaged", "fault"]);

function isEngagement(value: unknown): value is Engagement {
  if (typeof value !== "object" || value === null) return false;
  const e = value as Record<string, unknown>;
  return typeof e.mode === "string" && MODES.has(e.mode)
    && typeof e.reason === "string";
}

/**
 * Parse one line from the server. Returns null for anything malformed:
 * invalid JSON, wrong protocol version, unknown message type, or a payload
 * missing its required fields. Callers count the nulls and move on; a bad
 * frame must never take the console down.
 */
export function parseServerMessage(line: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const msg = doc as Record<string, unknown>;
  if (msg.v !== PROTOCOL_VERSION) return null;
  switch (msg.type) {
    case "telemetry": {
      if (typeof msg.t !== "number") return null;
      const state = msg.state as Record<string, unknown> | undefined;
      if (!state || typeof state.x !== "number" || typeof state.y !== "number"
        || typeof state.heading !== "number" || typeof state.speed !== "number") {
        return null;
      }
      if (!isEngagement(msg.engagement)) return null;
      return {
        v: PROTOCOL_VERSION,
        type: "telemetry",
        t: msg.t,
        state: state as unknown as VehicleStateMsg,
        trajectory: Array.isArray(msg.trajectory)
          ? (msg.trajectory as Array<[number, number]>) : [],
        objects: Array.isArray(msg.objects) ? (msg.objects as ObjectMsg[]) : [],
        engagement: msg.engagement,
        lights: (msg.lights ?? {}) as Record<string, string>,
        aggregates: (msg.aggregates ?? {}) as Record<string, number>,
      };
    }
    case "ack": {
      if (typeof msg.ok !== "boolean" || !isEngagement(msg.engagement)) {
        return null;
      }
      return {
        v: PROTOCOL_VERSION,
        type: "ack",
        ok: msg.ok,
        seq: typeof msg.seq === "number" ? msg.seq : undefined,
        message: typeof msg.message === "string" ? msg.message : "",
        engagement: msg.engagement,
      };
    }
    case "rejection":
      return {
        v: PROTOCOL_VERSION,
        type: "rejection",
        ok: false,
        message: typeof msg.message === "string" ? msg.message : "",
      };
    default:
      return null;
  }
}

/** Serialize a command as one newline-terminated JSON line. */
export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd) + "\n";
}
