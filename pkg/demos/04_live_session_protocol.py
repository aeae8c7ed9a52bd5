#!/usr/bin/env python3
"""The wire protocol end to end, no browser required.

Starts the socket service on a synthetic recording, connects a plain TCP
client, and plays the part of the human: watching labels arrive, registering
a speaker, confirming one segment. Everything the web console does happens
through exactly these messages.
"""

import json
import socket
import tempfile
import threading
from pathlib import Path

import numpy as np

from diarl import Session, SessionConfig
from diarl.audio import iter_segments
from diarl.rng import Rng
from diarl.service import ServeOptions, SessionServer

SR = 16000
rng = Rng(3)

# two crude synthetic voices back to back: harmonic stacks with vibrato and
# breath noise so consecutive segments do not collapse to identical vectors
def voice(f0, seconds):
    t = np.arange(int(seconds * SR)) / SR
    glide = f0 * (1.0 + 0.03 * np.sin(2 * np.pi * 2.5 * t))
    phase = 2 * np.pi * np.cumsum(glide) / SR
    wave = np.sin(phase) + 0.6 * np.sin(2 * phase) + 0.3 * np.sin(3 * phase)
    wave *= 1.0 + 0.4 * np.sin(2 * np.pi * 1.7 * t)
    wave += 0.15 * np.array([rng.gauss() for _ in range(len(t))])
    return (wave / np.max(np.abs(wave)) * 0.3 * 32767).astype(np.int16)

samples = np.concatenate([voice(130.0, 3.0), voice(320.0, 3.0)])
segments = list(iter_segments(samples, 1.0, 0.5, SR))

checkpoint = Path(tempfile.mkdtemp()) / "session.json"
session = Session(SessionConfig(policy="linucb", seed=5))
server = SessionServer(session, port=0, checkpoint_path=checkpoint)
runner = threading.Thread(
    target=server.run, args=(segments,),
    kwargs={"options": ServeOptions(pace_s=0.15, linger_s=1.0)}, daemon=True)
runner.start()

host, port = server.address
print(f"service listening on {host}:{port}\n")

sock = socket.create_connection((host, port), timeout=10)
sock.settimeout(10)
sock.sendall(b'{"type":"hello"}\n')

buffer = b""
confirmed = registered = False
corrections_left = 3
try:
    while True:
        chunk = sock.recv(4096)
        if not chunk:
            break
        buffer += chunk
        while b"\n" in buffer:
            line, buffer = buffer.split(b"\n", 1)
            message = json.loads(line.decode())
            kind = message["type"]
            if kind == "hello":
                print(f"<- hello, protocol v{message['version']}, registry {message['registry']}")
            elif kind == "segment_label":
                sid = message["segment_id"]
                print(f"<- label  seg {sid:2d} [{message['t0']:.1f}s] "
                      f"{message['label']:10s} conf {message['confidence']:.2f}")
                # segment 0's standardized context is all zeros (running stats
                # start there), so the human reacts from segment 1 onward
                if message["label"] == "NEW?" and not registered and sid >= 1:
                    registered = True
                    sock.sendall(json.dumps({
                        "type": "feedback", "segment_id": sid,
                        "kind": "new_speaker", "label": "Morgan"}).encode() + b"\n")
                    print("-> feedback: that NEW voice is Morgan")
                elif (message["label"] == "NEW?" and registered and sid <= 4
                        and corrections_left):
                    corrections_left -= 1
                    sock.sendall(json.dumps({
                        "type": "feedback", "segment_id": sid,
                        "kind": "correct", "label": "Morgan"}).encode() + b"\n")
                    print("-> feedback: no, still Morgan")
                elif message["label"] == "Morgan" and not confirmed:
                    confirmed = True
                    sock.sendall(json.dumps({
                        "type": "feedback", "segment_id": sid,
                        "kind": "confirm"}).encode() + b"\n")
                    print("-> feedback: confirmed")
            elif kind == "registry_update":
                print(f"<- registry now {message['entries']}")
            elif kind == "reward_record":
                print(f"<- reward  seg {message['segment_id']:2d} "
                      f"r_user={message['r_user']} r_total={message['r_total']:.3f}")
            elif kind == "snapshot_ack":
                print(f"<- snapshot written: {message['path']}")
except (OSError, ConnectionError):
    pass
finally:
    sock.close()
runner.join(timeout=10)

print(f"\ncheckpoint on disk: {checkpoint.exists()}; "
      f"inspect it with: diarl snapshot inspect {checkpoint}")
