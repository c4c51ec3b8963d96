/**
 * Browser entry point. Browsers cannot open raw TCP sockets, so this
 * expects a transparent WebSocket-to-TCP bridge in front of the harness
 * endpoint (e.g. websocat). Everything else — protocol, view model,
 * rendering — is shared with the Node client.
 */

import { TelemetryClient, Transport, TransportFactory, TransportHandlers } from "./client.js";
import { render } from "./renderer.js";
import { SessionView } from "./view.js";

function webSocketTransport(url: string): TransportFactory {
  return (handlers: TransportHandlers): Transport => {
    const ws = new WebSocket(url);
    let buffer = "";
    ws.onopen = () => handlers.onOpen();
    ws.onmessage = (event) => {
      buffer += String(event.data);
      let index: number;
      while ((index = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, index);
        buffer = buffer.slice(index + 1);
        if (line.trim().length > 0) handlers.onLine(line);
      }
    };
    ws.onclose = () => handlers.onClose();
    return {
      send(line: string): void {
        ws.send(line);
      },
      close(): void {
        ws.close();
      },
    };
  };
}

export interface ConsoleApp {
  client: TelemetryClient;
  view: SessionView;
  stop(): void;
}

export function startConsole(canvas: HTMLCanvasElement, url: string,
                             viewOnly = false): ConsoleApp {
  const view = new SessionView();
  const client = new TelemetryClient(webSocketTransport(url), {
    onMessage: (msg) => view.applyMessage(msg),
    onConnectionState: (state) => view.setConnectionState(state),
  }, { viewOnly });
  client.connect();

  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("2D canvas context unavailable");
  let running = true;
  const tick = (): void => {
    if (!running) return;
    render(view, ctx, canvas.width, canvas.height);
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);

  const keys: Record<string, () => void> = {
    e: () => { client.send("engage"); },
    d: () => { client.send("disengage"); },
  };
  const onKey = (event: KeyboardEvent): void => keys[event.key]?.();
  window.addEventListener("keydown", onKey);

  return {
    client,
    view,
    stop(): void {
      running = false;
      window.removeEventListener("keydown", onKey);
      client.close();
    },
  };
}
