/**
 * Minimal terminal client for smoke-testing a live session:
 *
 *   node dist/nodeConsole.js [host] [port]
 *
 * Prints one status line per telemetry frame. Keys: e = engage,
 * d = disengage, o = zero override (drops to manual), q = quit.
 */

import { TelemetryClient } from "./client.js";
import { SessionView } from "./view.js";
import { tcpTransport } from "./tcpTransport.js";

const host = process.argv[2] ?? "127.0.0.1";
const port = Number(process.argv[3] ?? 8700);

const view = new SessionView();
const client = new TelemetryClient(tcpTransport(host, port), {
  onMessage: (msg) => {
    view.applyMessage(msg);
    if (msg.type === "telemetry") {
      const s = msg.state;
      process.stdout.write(
        `\rt=${msg.t.toFixed(1)}s ${view.engagement.mode.padEnd(7)} `
        + `x=${s.x.toFixed(1)} y=${s.y.toFixed(1)} v=${s.speed.toFixed(1)} `
        + `objects=${msg.objects.length}  `);
    } else if (msg.type === "ack") {
      console.log(`\nack seq=${msg.seq} ok=${msg.ok} `
        + `mode=${msg.engagement.mode} ${msg.message}`);
    } else {
      console.log(`\nrejected: ${msg.message}`);
    }
  },
  onConnectionState: (state) => {
    view.setConnectionState(state);
    console.log(`\nlink: ${state}`);
  },
});
client.connect();

process.stdin.setRawMode?.(true);
process.stdin.resume();
process.stdin.setEncoding("utf8");
process.stdin.on("data", (key: string) => {
  if (key === "e") client.send("engage");
  else if (key === "d") client.send("disengage");
  else if (key === "o") client.send("override", { steering: 0.0, throttle: 0.0 });
  else if (key === "q" || key === "") {
    client.close();
    process.exit(0);
  }
});
