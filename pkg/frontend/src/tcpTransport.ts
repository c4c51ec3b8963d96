/** Node TCP transport for the telemetry client. */

import * as net from "node:net";

import { Transport, TransportFactory, TransportHandlers } from "./client.js";

export function tcpTransport(host: string, port: number): TransportFactory {
  return (handlers: TransportHandlers): Transport => {
    const socket = net.createConnection({ host, port });
    socket.setEncoding("utf8");
    let buffer = "";
    socket.on("connect", () => handlers.onOpen());
    socket.on("data", (chunk: string) => {
      buffer += chunk;
      let index: number;
      while ((index = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, index);
        buffer = buffer.slice(index + 1);
        if (line.trim().length > 0) handlers.onLine(line);
      }
    });
    socket.on("error", () => { /* close follows; reconnect handles it */ });
    socket.on("close", () => handlers.onClose());
    return {
      send(line: string): void {
        socket.write(line);
      },
      close(): void {
        socket.destroy();
      },
    };
  };
}
