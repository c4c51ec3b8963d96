export * from "./protocol.js";
export * from "./client.js";
export * from "./view.js";
export * from "./renderer.js";
export { tcpTransport } from "./tcpTransport.js";
