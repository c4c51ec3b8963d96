/**
 * Transport-agnostic telemetry client: line framing, command sequencing,
 * reconnect with exponential backoff, and a hard view-only lock.
 *
 * The transport is injected so the same client runs over a Node TCP socket,
 * a WebSocket bridge, or a recording test double.
 */

import {
  Command,
  CommandKind,
  ServerMessage,
  encodeCommand,
  parseServerMessage,
} from "./protocol.js";

export interface TransportHandlers {
  onOpen(): void;
  onLine(line: string): void;
  onClose(): void;
}

export interface Transport {
  send(line: string): void;
  close(): void;
}

export type TransportFactory = (handlers: TransportHandlers) => Transport;

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface ClientOptions {
  /** When true the client never emits a single command message. */
  viewOnly?: boolean;
  reconnect?: boolean;
  backoffInitialMs?: number;
  backoffMaxMs?: number;
}

export interface ClientEvents {
  onMessage?(msg: ServerMessage): void;
  onConnectionState?(state: ConnectionState): void;
}

export class TelemetryClient {
  readonly viewOnly: boolean;

  connectionState: ConnectionState = "disconnected";
  /** Lines that failed to parse; surfaced as an error counter in the UI. */
  malformedCount = 0;

  private readonly factory: TransportFactory;
  private readonly events: ClientEvents;
  private readonly reconnect: boolean;
  private readonly backoffInitialMs: number;
  private readonly backoffMaxMs: number;
  private backoffMs: number;
  private transport: Transport | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private nextSeq = 1;
  private buffer = "";
  private closed = false;

  constructor(factory: TransportFactory, events: ClientEvents = {},
              options: ClientOptions = {}) {
    this.factory = factory;
    this.events = events;
    this.viewOnly = options.viewOnly ?? false;
    this.reconnect = options.reconnect ?? true;
    this.backoffInitialMs = options.backoffInitialMs ?? 250;
    this.backoffMaxMs = options.backoffMaxMs ?? 5000;
    this.backoffMs = this.backoffInitialMs;
  }

  connect(): void {
    if (this.closed || this.transport !== null) return;
    this.setConnectionState("connecting");
    this.transport = this.factory({
      onOpen: () => {
        this.backoffMs = this.backoffInitialMs;
        this.setConnectionState("connected");
      },
      onLine: (line) => this.handleLine(line),
      onClose: () => this.handleClose(),
    });
  }

  /**
   * Feed raw bytes; reassembles newline-delimited messages across chunk
   * boundaries. Transports that already deliver whole lines can call
   * onLine directly instead.
   */
  feed(chunk: string): void {
    this.buffer += chunk;
    let index: number;
    while ((index = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, index);
      this.buffer = this.buffer.slice(index + 1);
      if (line.trim().length > 0) this.handleLine(line);
    }
  }

  /**
   * Send a command. Returns the sent command, or null when the client is
   * view-only or disconnected — in both cases nothing goes on the wire.
   */
  send(kind: CommandKind, extra: Record<string, unknown> = {}): Command | null {
    if (this.viewOnly) return null;
    if (this.transport === null || this.connectionState !== "connected") {
      return null;
    }
    const command: Command = { type: "command", kind, seq: this.nextSeq++, ...extra };
    this.transport.send(encodeCommand(command));
    return command;
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.retryTimer = null;
    this.transport?.close();
    this.transport = null;
    this.setConnectionState("disconnected");
  }

  private handleLine(line: string): void {
    const msg = parseServerMessage(line);
    if (msg === null) {
      this.malformedCount += 1;
      return;
    }
    this.events.onMessage?.(msg);
  }

  private handleClose(): void {
    this.transport = null;
    this.buffer = "";
    this.setConnectionState("disconnected");
    if (this.closed || !this.reconnect) return;
    const delay = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, this.backoffMaxMs);
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      this.connect();
    }, delay);
  }

  private setConnectionState(state: ConnectionState): void {
    if (state === this.connectionState) return;
    this.connectionState = state;
    this.events.onConnectionState?.(state);
  }
}
