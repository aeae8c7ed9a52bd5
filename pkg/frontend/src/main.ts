/**
 * DOM layer: renders the view, forwards clicks. All state lives in the
 * ConsoleClient; this file only draws it and translates events.
 */

import { ConsoleClient, type Transport } from "./client.js";
import { renderTimeline } from "./timeline.js";
import { registerSpeaker, submitFeedback } from "./timeline.js";
import { speakerButtons, type SessionView } from "./store.js";

const timelineEl = document.getElementById("timeline") as HTMLElement;
const buttonsEl = document.getElementById("speakers") as HTMLElement;
const statusEl = document.getElementById("status") as HTMLElement;
const noticesEl = document.getElementById("notices") as HTMLElement;
const registerForm = document.getElementById("register-form") as HTMLFormElement;
const registerName = document.getElementById("register-name") as HTMLInputElement;

const client = new ConsoleClient(draw);

function connect(): void {
  statusEl.textContent = "connecting…";
  const ws = new WebSocket(`ws://${location.host}/engine`);
  const transport: Transport = {
    send: (line) => ws.send(line),
    close: () => ws.close(),
  };
  ws.onopen = () => client.attach(transport);
  ws.onmessage = (event) => client.receive(String(event.data));
  ws.onclose = () => {
    client.detach();
    setTimeout(connect, 1000); // retry; queued clicks flush on reattach
  };
}

function draw(view: SessionView): void {
  statusEl.textContent =
    view.connection === "connected"
      ? `connected (protocol v${view.protocolVersion ?? "?"})`
      : view.connection;

  // one button per registered speaker: clicking it corrects the newest row
  buttonsEl.replaceChildren(
    ...speakerButtons(view).map((name) => {
      const button = document.createElement("button");
      button.textContent = name;
      button.onclick = () => {
        const newest = renderTimeline(view).find((row) => row.canFeedback);
        if (!newest) return;
        const kind = newest.label === name ? "confirm" : "correct";
        client.apply(
          kind === "confirm"
            ? submitFeedback(client.view, newest.segmentId, "confirm")
            : submitFeedback(client.view, newest.segmentId, "correct", name),
        );
      };
      return button;
    }),
  );

  const rows = renderTimeline(view);
  if (rows.length === 0) {
    timelineEl.replaceChildren(document.createTextNode("waiting for audio…"));
  } else {
    timelineEl.replaceChildren(
      ...rows.map((row) => {
        const div = document.createElement("div");
        div.className = "row" + (row.pending ? " pending" : "") + (row.rewarded ? " rewarded" : "");
        const bar = `<span class="bar" style="width:${row.confidencePct}px"></span>`;
        const state = row.pending ? " ⏳" : row.rewarded ? " ✓" : "";
        div.innerHTML =
          `<code>#${row.segmentId}</code> ${row.span} <b>${row.label}</b> ${bar}` +
          `<small>${row.confidencePct}%</small>${state}`;
        if (row.canFeedback) {
          const confirm = document.createElement("button");
          confirm.textContent = "confirm";
          confirm.onclick = () =>
            client.apply(submitFeedback(client.view, row.segmentId, "confirm"));
          div.append(" ", confirm);
          const newcomer = document.createElement("button");
          newcomer.textContent = "new speaker…";
          newcomer.onclick = () => {
            const name = prompt("who is this?");
            if (name)
              client.apply(submitFeedback(client.view, row.segmentId, "new_speaker", name));
          };
          div.append(" ", newcomer);
        }
        return div;
      }),
    );
  }

  noticesEl.replaceChildren(
    ...view.notices.slice(-5).map((notice) => {
      const div = document.createElement("div");
      div.textContent = notice;
      return div;
    }),
  );
}

registerForm.onsubmit = (event) => {
  event.preventDefault();
  const name = registerName.value.trim();
  if (name) client.apply(registerSpeaker(client.view, name));
  registerName.value = "";
};

connect();
