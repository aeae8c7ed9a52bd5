"""Line-delimited JSON session service over a local TCP socket.

One acceptor, one reader thread per client, one writer thread per client, and
a single session loop that is the only mutator of session state. Clients
submit feedback and registrations; the server broadcasts every decision,
reward, and registry change. Protocol v1: each message is one line of UTF-8
JSON with a "type" field.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass

from .errors import InputError
from .rewards import FEEDBACK_KINDS, FeedbackEvent
from .session import Session

log = logging.getLogger("diarl.service")

PROTOCOL_VERSION = "1"
CLIENT_QUEUE_LIMIT = 1000

CODE_BAD_JSON = "BAD_JSON"
CODE_BAD_MESSAGE = "BAD_MESSAGE"
CODE_UNKNOWN_TYPE = "UNKNOWN_TYPE"
CODE_SLOW_CLIENT = "SLOW_CLIENT"


def encode_message(message: dict) -> bytes:
    return (json.dumps(message, separators=(",", ":")) + "\n").encode("utf-8")


def parse_feedback_message(message: dict) -> FeedbackEvent:
    """Wire feedback{segment_id, kind, label?, rating?} -> FeedbackEvent."""
    if not isinstance(message.get("segment_id"), int):
        raise InputError("feedback requires an integer segment_id")
    kind = message.get("kind")
    if kind not in FEEDBACK_KINDS:
        raise InputError(f"unknown feedback kind {kind!r}")
    return FeedbackEvent(segment_id=message["segment_id"], kind=kind,
                         label=message.get("label"), rating=message.get("rating"))


class _Client:
    def __init__(self, sock: socket.socket, address, server: "SessionServer"):
        self.sock = sock
        self.address = address
        self.server = server
        self.outbox: queue.Queue = queue.Queue(maxsize=CLIENT_QUEUE_LIMIT)
        self.alive = True

    def send(self, message: dict) -> None:
        if not self.alive:
            return
        try:
            self.outbox.put_nowait(encode_message(message))
        except queue.Full:
            self.kill(slow=True)

    def kill(self, slow: bool = False) -> None:
        if not self.alive:
            return
        self.alive = False
        if slow:
            try:
                self.sock.sendall(encode_message({
                    "type": "error", "code": CODE_SLOW_CLIENT,
                    "message": "client cannot keep up with broadcasts",
                }))
            except OSError:
                pass
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        try:
            self.outbox.put_nowait(None)  # wake the writer if it is idle
        except queue.Full:
            pass

    def writer_loop(self) -> None:
        while True:
            data = self.outbox.get()
            if data is None or not self.alive:
                return
            try:
                self.sock.sendall(data)
            except OSError:
                self.kill()
                return

    def reader_loop(self) -> None:
        buffer = b""
        try:
            while self.alive:
                chunk = self.sock.recv(4096)
                if not chunk:
                    break
                buffer += chunk
                while b"\n" in buffer:
                    line, buffer = buffer.split(b"\n", 1)
                    if line.strip():
                        self.server.handle_line(self, line)
        except OSError:
            pass
        finally:
            self.kill()
            self.server.forget(self)


@dataclass
class ServeOptions:
    pace_s: float | None = None   # None = real-time (segment hop)
    exit_after_stream: bool = True
    linger_s: float = 1.0         # idle drain window after the stream ends


class SessionServer:
    """Owns the session loop; fans decisions out, funnels feedback in."""

    def __init__(self, session: Session, host: str = "127.0.0.1", port: int = 0,
                 transcript_path=None, checkpoint_path=None, reward_log_path=None):
        self.session = session
        self.transcript_path = transcript_path
        self.checkpoint_path = checkpoint_path
        self.reward_log_path = reward_log_path
        self._transcript_file = None
        self._reward_log_file = None
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._registry_snapshot: dict[str, str] = {}
        self._stop = threading.Event()
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(8)
        self.address = self._listener.getsockname()

        session.on_entry = self._on_entry
        session.on_reward = self._on_reward
        session.on_registry = self._on_registry
        session.on_feedback_rejected = self._on_feedback_rejected
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)

    # ------------------------------------------------------------- client side

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, address = self._listener.accept()
            except OSError:
                return
            client = _Client(sock, address, self)
            with self._clients_lock:
                self._clients.append(client)
            threading.Thread(target=client.reader_loop, daemon=True).start()
            threading.Thread(target=client.writer_loop, daemon=True).start()
            log.info("client connected: %s", address)

    def forget(self, client: _Client) -> None:
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)

    def handle_line(self, client: _Client, line: bytes) -> None:
        try:
            message = json.loads(line.decode("utf-8"))
            if not isinstance(message, dict):
                raise ValueError("message must be a JSON object")
        except (ValueError, UnicodeDecodeError) as exc:
            client.send({"type": "error", "code": CODE_BAD_JSON, "message": str(exc)})
            return
        mtype = message.get("type")
        if mtype == "hello":
            client.send({"type": "hello", "version": PROTOCOL_VERSION,
                         "registry": dict(self._registry_snapshot)})
        elif mtype == "feedback":
            try:
                event = parse_feedback_message(message)
            except InputError as exc:
                client.send({"type": "error", "code": CODE_BAD_MESSAGE, "message": str(exc)})
                return
            stamped = FeedbackEvent(segment_id=event.segment_id, kind=event.kind,
                                    label=event.label, rating=event.rating,
                                    arrival_time=self.session.stream_time)
            self.session.submit_feedback(stamped, tag=client)
        elif mtype == "register_speaker":
            name = message.get("name")
            if not isinstance(name, str) or not name:
                client.send({"type": "error", "code": CODE_BAD_MESSAGE,
                             "message": "register_speaker requires a nonempty name"})
                return
            self.session.submit_registration(name, tag=client)
        else:
            client.send({"type": "error", "code": CODE_UNKNOWN_TYPE,
                         "message": f"unknown message type {mtype!r}"})

    def _broadcast(self, message: dict) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            client.send(message)

    # ------------------------------------------------------------ session side

    def _on_entry(self, entry, line: str) -> None:
        if self._transcript_file is not None:
            self._transcript_file.write(line + "\n")
            self._transcript_file.flush()
        self._broadcast({
            "type": "segment_label",
            "segment_id": entry.segment_id,
            "t0": entry.t0,
            "t1": entry.t1,
            "label": entry.emitted_label,
            "confidence": 0.0 if entry.decision is None else entry.decision.confidence,
        })

    def _on_reward(self, record) -> None:
        doc = record.to_doc()
        if self._reward_log_file is not None:
            self._reward_log_file.write(json.dumps(doc, separators=(",", ":")) + "\n")
            self._reward_log_file.flush()
        doc["type"] = "reward_record"
        self._broadcast(doc)

    def _on_registry(self, registry) -> None:
        self._registry_snapshot = {str(k): v for k, v in sorted(registry.entries.items())}
        self._broadcast({"type": "registry_update", "entries": dict(self._registry_snapshot)})

    def _on_feedback_rejected(self, tag, event, exc) -> None:
        log.info("feedback rejected (%s): %s", exc.code, exc)
        if isinstance(tag, _Client):
            tag.send({"type": "error", "code": exc.code, "message": str(exc)})

    # -------------------------------------------------------------------- run

    def run(self, segments, options: ServeOptions | None = None) -> None:
        """Step the session over an iterable of segments, then linger and stop."""
        options = options or ServeOptions()
        if self.transcript_path is not None:
            self._transcript_file = open(self.transcript_path, "w", encoding="utf-8")
        if self.reward_log_path is not None:
            self._reward_log_file = open(self.reward_log_path, "w", encoding="utf-8")
        self._accept_thread.start()
        hop_s = self.session.config.features.segment_hop_s
        pace = hop_s if options.pace_s is None else options.pace_s
        try:
            for segment in segments:
                if self._stop.is_set():
                    break
                self.session.step(segment)
                if pace > 0:
                    time.sleep(pace)
            deadline = time.monotonic() + options.linger_s
            while not self._stop.is_set() and time.monotonic() < deadline:
                self.session.drain_now()
                time.sleep(0.05)
            self.session.drain_now()
        finally:
            self.shutdown()

    def stop(self) -> None:
        self._stop.set()

    def shutdown(self) -> None:
        self._stop.set()
        checkpoint = None
        if self.checkpoint_path is not None:
            checkpoint = self.session.snapshot_json()
            with open(self.checkpoint_path, "w", encoding="utf-8") as fh:
                fh.write(checkpoint)
            self._broadcast({"type": "snapshot_ack", "path": str(self.checkpoint_path)})
        if self._transcript_file is not None:
            self._transcript_file.close()
            self._transcript_file = None
        if self._reward_log_file is not None:
            self._reward_log_file.close()
            self._reward_log_file = None
        try:
            self._listener.close()
        except OSError:
            pass
        time.sleep(0.05)  # let writers flush the final broadcasts
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            client.kill()


def replay(session: Session, segments, feedback_script: list[dict] | None = None,
           transcript_path=None, dump_features_path=None,
           reward_log_path=None) -> list[str]:
    """Deterministic offline run: scripted feedback injected between steps.

    Script items carry an "after_segment" id plus either a "feedback" message
    body (wire shape) or a "register_speaker" name. Returns transcript lines.
    """
    from .features import FeatureVector, format_feature_row

    by_trigger: dict[int, list[dict]] = {}
    for item in feedback_script or []:
        by_trigger.setdefault(int(item["after_segment"]), []).append(item)

    lines: list[str] = []
    features_rows: list[str] = []
    reward_rows: list[str] = []

    previous_on_entry = session.on_entry

    def on_entry(entry, line):
        lines.append(line)
        if previous_on_entry:
            previous_on_entry(entry, line)

    session.on_entry = on_entry
    if reward_log_path is not None:
        session.on_reward = lambda record: reward_rows.append(
            json.dumps(record.to_doc(), separators=(",", ":")))
    rejected = []
    previous_rejected = session.on_feedback_rejected
    session.on_feedback_rejected = previous_rejected or (
        lambda tag, event, exc: rejected.append((event, exc.code)))

    last_t1 = session.stream_time
    for segment in segments:
        entry = session.step(segment)
        last_t1 = segment.t1
        if not entry.non_speech and dump_features_path is not None:
            fv = entry.feature
            if fv is not None:
                features_rows.append(format_feature_row(
                    FeatureVector(values=fv, segment_id=entry.segment_id),
                    entry.t0, entry.t1))
        for item in by_trigger.get(segment.segment_id, []):
            if "register_speaker" in item:
                session.submit_registration(item["register_speaker"])
            else:
                body = item["feedback"]
                event = parse_feedback_message(body)
                stamped = FeedbackEvent(segment_id=event.segment_id, kind=event.kind,
                                        label=event.label, rating=event.rating,
                                        arrival_time=segment.t1)
                session.submit_feedback(stamped)
    session.drain_now(last_t1)

    if transcript_path is not None:
        with open(transcript_path, "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in lines))
    if dump_features_path is not None:
        with open(dump_features_path, "w", encoding="utf-8") as fh:
            fh.write("".join(row + "\n" for row in features_rows))
    if reward_log_path is not None:
        with open(reward_log_path, "w", encoding="utf-8") as fh:
            fh.write("".join(row + "\n" for row in reward_rows))
    return lines
