/**
 * Transport-agnostic console client: wires a line-based connection to the
 * view reducers. The browser injects a WebSocket transport (through the
 * bridge); tests inject an in-memory or TCP transport.
 */

import { LineSplitter, decodeServerLine } from "./protocol.js";
import {
  applyServerMessage,
  connectionChanged,
  drainOutbox,
  initialView,
  type SessionView,
} from "./store.js";
import { sayHello } from "./timeline.js";

export interface Transport {
  send(line: string): void;
  close(): void;
}

export class ConsoleClient {
  view: SessionView = initialView();
  private transport: Transport | null = null;
  private splitter = new LineSplitter();

  constructor(private onChange: (view: SessionView) => void = () => {}) {}

  private update(view: SessionView): void {
    this.view = view;
    this.onChange(view);
  }

  attach(transport: Transport): void {
    this.transport = transport;
    this.splitter = new LineSplitter();
    let view = connectionChanged(this.view, "connected");
    // hello handshake, then whatever queued up while offline
    const hello = sayHello(view);
    view = hello.view;
    if (hello.send) transport.send(hello.send);
    const { view: drained, lines } = drainOutbox(view);
    for (const line of lines) transport.send(line);
    this.update(drained);
  }

  detach(): void {
    this.transport = null;
    this.update(connectionChanged(this.view, "disconnected"));
  }

  /** Feed raw received text (possibly partial lines). */
  receive(chunk: string): void {
    let view = this.view;
    for (const line of this.splitter.push(chunk)) {
      const message = decodeServerLine(line);
      if (message) view = applyServerMessage(view, message);
    }
    this.update(view);
  }

  /** Apply a reducer result that may carry an outbound line. */
  apply(result: { view: SessionView; send: string | null }): void {
    if (result.send && this.transport) {
      this.transport.send(result.send);
    }
    this.update(result.view);
  }
}
