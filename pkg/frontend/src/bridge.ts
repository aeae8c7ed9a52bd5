/**
 * WebSocket-to-TCP bridge plus static file server for the console.
 *
 * Browsers cannot open raw TCP sockets, so the page connects here over a
 * WebSocket and the bridge pipes bytes verbatim to the engine's socket:
 * protocol v1 flows unchanged in both directions.
 *
 *   node dist/bridge.js [--engine 127.0.0.1:3690] [--listen 8391]
 */

import { createReadStream, existsSync } from "node:fs";
import { createServer } from "node:http";
import net from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { WebSocketServer, type WebSocket } from "ws";

const here = path.dirname(fileURLToPath(import.meta.url));
const root = path.resolve(here, "..");

function argValue(flag: string, fallback: string): string {
  const index = process.argv.indexOf(flag);
  return index >= 0 && process.argv[index + 1] ? process.argv[index + 1]! : fallback;
}

const engineAddress = argValue("--engine", "127.0.0.1:3690");
const listenPort = Number(argValue("--listen", "8391"));
const [engineHost, enginePort] = (() => {
  const i = engineAddress.lastIndexOf(":");
  return [engineAddress.slice(0, i), Number(engineAddress.slice(i + 1))] as const;
})();

const CONTENT_TYPES: Record<string, string> = {
  ".html": "text/html; charset=utf-8",
  ".js": "text/javascript; charset=utf-8",
  ".map": "application/json",
  ".css": "text/css; charset=utf-8",
};

const http = createServer((request, response) => {
  const url = (request.url ?? "/").split("?")[0] ?? "/";
  const file = url === "/" ? "index.html" : url.replace(/^\/+/, "");
  const candidate = path.join(root, file);
  if (!candidate.startsWith(root) || !existsSync(candidate)) {
    response.writeHead(404).end("not found");
    return;
  }
  response.writeHead(200, {
    "content-type": CONTENT_TYPES[path.extname(candidate)] ?? "application/octet-stream",
  });
  createReadStream(candidate).pipe(response);
});

const wss = new WebSocketServer({ server: http, path: "/engine" });

wss.on("connection", (ws: WebSocket) => {
  const tcp = net.createConnection({ host: engineHost, port: enginePort });
  tcp.setNoDelay(true);
  tcp.on("data", (data) => ws.readyState === ws.OPEN && ws.send(data.toString("utf-8")));
  tcp.on("close", () => ws.close());
  tcp.on("error", () => ws.close());
  ws.on("message", (data) => tcp.write(data.toString()));
  ws.on("close", () => tcp.destroy());
  ws.on("error", () => tcp.destroy());
});

http.listen(listenPort, "127.0.0.1", () => {
  console.log(`console:  http://127.0.0.1:${listenPort}/`);
  console.log(`bridging: ws /engine -> tcp ${engineHost}:${enginePort}`);
});
