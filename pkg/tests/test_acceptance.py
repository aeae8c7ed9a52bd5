"""Acceptance suite: one test per release criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the PASS/FAIL lines
while the suite executes.
"""

import json
import math
import socket
import subprocess
import sys
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from diarl.audio import iter_segments, write_wav
from diarl.bench import FeedbackPolicy, generate_synthetic, run_benchmark
from diarl.features import FeatureConfig, mfcc_frame
from diarl.policies import BerlinUcbPolicy, LinUcbPolicy, QLearningPolicy
from diarl.registry import NEW_ACTION, SpeakerRegistry
from diarl.rng import Rng
from diarl.service import replay
from diarl.session import Session, SessionConfig

from conftest import SR, build_audio, two_speaker_plan
from reference_dsp import ref_mfcc_frame

GOLDEN_DIR = Path(__file__).parent / "fixtures" / "golden"


def report(criterion: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"\nCRITERION {criterion} {status}: {detail}", flush=True)
    assert ok, f"criterion {criterion}: {detail}"


class Stopwatch:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# --------------------------------------------------------------- criterion 1

def test_criterion_1_mfcc_oracle_equivalence():
    cfg = FeatureConfig()
    with Stopwatch() as sw:
        rng = Rng(1001)
        worst = 0.0
        for _ in range(100):
            frame = np.array([rng.gauss() * 0.2 for _ in range(400)])
            got = mfcc_frame(frame, cfg)
            want = ref_mfcc_frame(frame)
            rel = np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-12))
            worst = max(worst, float(rel))
        silence = mfcc_frame(np.zeros(400), cfg)
        c0_err = abs(silence[0] - math.sqrt(26) * math.log(1e-10))
        rest = float(np.max(np.abs(silence[1:])))
    ok = worst <= 1e-6 and c0_err <= 1e-9 and rest <= 1e-9 and sw.elapsed < 5.0
    report(1, ok, f"oracle rel err {worst:.2e} (<=1e-6), silence c0 err "
                  f"{c0_err:.2e}, others {rest:.2e} (<=1e-9), {sw.elapsed:.2f}s (<5s)")


# --------------------------------------------------------------- criterion 2

def test_criterion_2_toy_mdp_convergence():
    with Stopwatch() as sw:
        policy = QLearningPolicy(eta=0.1, gamma=0.9, epsilon=0.2)
        registry = SpeakerRegistry()
        registry.confirm("pay")  # actions {0, 1}; a1 pays 1, a0 pays 0
        rng = Rng(2)
        s = 0
        for step in range(10_000):
            decision = policy.select(s, registry, step, rng)
            a = decision.chosen
            r = 1.0 if a == 1 else 0.0
            s_next = a
            policy.update(s, a, r, s_next, registry)
            s = s_next
        greedy_ok = all(
            max(policy.table.row(state, [0, 1]),
                key=policy.table.row(state, [0, 1]).get) == 1
            for state in (0, 1))
        errs = [abs(policy.table.value(state, 1) - 10.0) for state in (0, 1)]
    ok = greedy_ok and max(errs) <= 0.05 and sw.elapsed < 5.0
    report(2, ok, f"greedy optimal in both states: {greedy_ok}, |q-10| "
                  f"{max(errs):.4f} (<=0.05), {sw.elapsed:.2f}s (<5s)")


# --------------------------------------------------------------- criterion 3

def test_criterion_3_linucb_separable_accuracy():
    with Stopwatch() as sw:
        hits = 0
        accs = []
        for seed in range(20):
            stream = generate_synthetic(2, 8, 5.0, 2000, seed=seed)
            result = run_benchmark(stream, SessionConfig(policy="linucb", seed=seed),
                                   FeedbackPolicy(p=1.0), reveal_seed=seed)
            accs.append(result.final_window_accuracy)
            hits += result.final_window_accuracy >= 0.9
    ok = hits >= 18 and sw.elapsed < 60.0
    report(3, ok, f"final-window acc >= 0.9 on {hits}/20 seeds (need >=18), "
                  f"min {min(accs):.3f}, {sw.elapsed:.1f}s (<60s)")


# --------------------------------------------------------------- criterion 4

def test_criterion_4_semi_supervision_direction():
    with Stopwatch() as sw:
        fp = FeedbackPolicy(p=0.1)
        lin, ber = [], []
        for seed in range(20):
            stream = generate_synthetic(2, 8, 5.0, 2000, seed=seed)
            lin.append(run_benchmark(stream, SessionConfig(policy="linucb", seed=seed),
                                     fp, reveal_seed=seed).final_window_accuracy)
            ber.append(run_benchmark(stream, SessionConfig(policy="berlinucb", seed=seed),
                                     fp, reveal_seed=seed).final_window_accuracy)
        worst_gap = min(b - l for b, l in zip(ber, lin))
        lin_mean, ber_mean = float(np.mean(lin)), float(np.mean(ber))
    ok = worst_gap >= -0.02 and ber_mean > lin_mean and sw.elapsed < 120.0
    report(4, ok, f"per-seed worst gap {worst_gap:+.4f} (>=-0.02), means "
                  f"berlinucb {ber_mean:.4f} > linucb {lin_mean:.4f}: "
                  f"{ber_mean > lin_mean}, {sw.elapsed:.1f}s (<2min)")


# --------------------------------------------------------------- criterion 5

def test_criterion_5_arm_expansion_invariant():
    with Stopwatch() as sw:
        checks = 0
        for seed in range(50):
            rng = Rng(seed)
            registry = SpeakerRegistry()
            linucb = LinUcbPolicy()
            berlin = BerlinUcbPolicy()
            qlearn = QLearningPolicy()
            bound_history: list[int] = []
            for op in range(1000):
                x = np.array([rng.gauss() for _ in range(4)])
                roll = rng.below(8)
                actions = registry.actions()
                if roll == 0 and len(registry.entries) < 24:
                    index = registry.confirm(f"spk-{seed}-{op}")
                    bound_history.append(index)
                    for policy in (linucb, berlin, qlearn):
                        policy.add_arm(index)
                elif roll == 1:
                    linucb.update(actions[rng.below(len(actions))], x,
                                  rng.random() * 2 - 1, registry)
                elif roll == 2:
                    berlin.update_rewarded(actions[rng.below(len(actions))], x,
                                           rng.random() * 2 - 1, registry)
                elif roll == 3:
                    berlin.update_unrewarded(actions[rng.below(len(actions))], x)
                elif roll == 4:
                    s = qlearn.quantize(x)
                    qlearn.update(s, actions[rng.below(len(actions))],
                                  rng.random() * 2 - 1, s, registry)
                elif roll == 5:
                    linucb.select(x, registry, op)
                elif roll == 6:
                    qlearn.select(qlearn.quantize(x), registry, op, rng)
                else:
                    berlin.select(x, registry, op)
                # the invariants under test
                assert len(registry.actions()) == len(registry.entries) + 1
                assert NEW_ACTION not in registry.entries
                assert registry.actions()[0] == NEW_ACTION
                assert bound_history == sorted(bound_history)
                assert registry.next_index == (max(bound_history) + 1
                                               if bound_history else 1)
                checks += 1
    ok = checks == 50_000 and sw.elapsed < 10.0
    report(5, ok, f"{checks} randomized ops held |actions|=confirmed+1, NEW "
                  f"unbound, indices monotone, {sw.elapsed:.1f}s (<10s)")


# --------------------------------------------------------------- criterion 6

def test_criterion_6_determinism_and_checkpointing():
    with Stopwatch() as sw:
        samples = build_audio(two_speaker_plan(60.0, turn_s=4.0), seed=606)
        config = SessionConfig(policy="qlearning", seed=33, epsilon=0.2)
        segments = list(iter_segments(samples, 1.0, 0.5, SR))

        def run_all():
            session = Session(config)
            lines = []
            session.on_entry = lambda e, line: lines.append(line)
            for segment in segments:
                session.step(segment)
            return lines

        lines_a = run_all()
        lines_b = run_all()
        identical = lines_a == lines_b

        cut = len(segments) // 2
        head = Session(config)
        head_lines = []
        head.on_entry = lambda e, line: head_lines.append(line)
        for segment in segments[:cut]:
            head.step(segment)
        resumed = Session.from_snapshot(json.loads(head.snapshot_json()))
        tail_lines = []
        resumed.on_entry = lambda e, line: tail_lines.append(line)
        for segment in segments[cut:]:
            resumed.step(segment)
        resumable = head_lines + tail_lines == lines_a
    ok = identical and resumable and sw.elapsed < 30.0
    report(6, ok, f"double run byte-identical: {identical}, pause/resume "
                  f"byte-identical: {resumable} ({len(lines_a)} segments), "
                  f"{sw.elapsed:.1f}s (<30s)")


# --------------------------------------------------------------- criterion 7

def test_criterion_7_chance_level_sanity():
    with Stopwatch() as sw:
        stream = generate_synthetic(4, 8, 0.0, 5000, seed=77)
        details = []
        ok = True
        for policy in ("linucb", "berlinucb", "qlearning"):
            acc = run_benchmark(stream, SessionConfig(policy=policy, seed=77),
                                FeedbackPolicy(p=1.0),
                                reveal_seed=77).final_window_accuracy
            details.append(f"{policy} {acc:.3f}")
            ok &= abs(acc - 0.25) <= 0.1
        rand = run_benchmark(stream, "random", FeedbackPolicy(p=1.0), reveal_seed=77)
        details.append(f"random {rand.final_window_accuracy:.3f}")
        ok &= abs(rand.final_window_accuracy - 0.25) <= 0.1
        oracle = run_benchmark(stream, "oracle", FeedbackPolicy(p=1.0), reveal_seed=77)
        ok &= oracle.cumulative_regret == 0.0
    ok = ok and sw.elapsed < 60.0
    report(7, ok, f"final-window acc at separation 0: {', '.join(details)} "
                  f"(all within 0.25±0.1), oracle regret "
                  f"{oracle.cumulative_regret} (==0), {sw.elapsed:.1f}s (<60s)")


# --------------------------------------------------------------- criterion 8

GOLDEN_PLAN = [(0, 3.0), (None, 1.0), (1, 3.0), (0, 2.0)]
GOLDEN_SEED = 71
GOLDEN_CONFIG_ARGS = ["--policy", "linucb", "--seed", "9"]
GOLDEN_SCRIPT = [
    {"after_segment": 2, "feedback": {"type": "feedback", "segment_id": 2,
                                      "kind": "new_speaker", "label": "Ana"}},
    {"after_segment": 9, "feedback": {"type": "feedback", "segment_id": 9,
                                      "kind": "new_speaker", "label": "Bo"}},
    {"after_segment": 12, "feedback": {"type": "feedback", "segment_id": 12,
                                       "kind": "confirm"}},
    {"after_segment": 14, "feedback": {"type": "feedback", "segment_id": 14,
                                       "kind": "rating", "rating": 0.5}},
]


def golden_session_config():
    return SessionConfig(policy="linucb", seed=9)


def scripted_feedback_client(address, script, errors_seen, done):
    triggers = {item["after_segment"]: item["feedback"] for item in script}
    sock = socket.create_connection(address, timeout=15.0)
    sock.settimeout(15.0)
    buffer = b""
    probes_sent = False
    try:
        while True:
            chunk = sock.recv(4096)
            if not chunk:
                break
            buffer += chunk
            while b"\n" in buffer:
                line, buffer = buffer.split(b"\n", 1)
                message = json.loads(line.decode())
                if message.get("type") == "error":
                    errors_seen.append(message["code"])
                if message.get("type") != "segment_label":
                    continue
                if not probes_sent:
                    # malformed probes mid-session must not drop anything
                    sock.sendall(b"this is not json\n")
                    sock.sendall(b'{"type":"warp"}\n')
                    sock.sendall(b'{"type":"feedback","segment_id":-1,"kind":"confirm"}\n')
                    probes_sent = True
                body = triggers.pop(message["segment_id"], None)
                if body is not None:
                    sock.sendall((json.dumps(body) + "\n").encode())
                if not triggers and not done:
                    done.append(True)
    except (OSError, ConnectionError):
        pass
    finally:
        sock.close()


def test_criterion_8_protocol_golden(tmp_path):
    with Stopwatch() as sw:
        samples = build_audio(GOLDEN_PLAN, seed=GOLDEN_SEED)
        golden = (GOLDEN_DIR / "transcript.jsonl").read_text(encoding="utf-8").splitlines()

        # replay route
        segments = list(iter_segments(samples, 1.0, 0.5, SR))
        replay_lines = replay(Session(golden_session_config()), segments,
                              feedback_script=GOLDEN_SCRIPT)

        # serve route through the real CLI
        wav = tmp_path / "fixture.wav"
        write_wav(wav, samples)
        transcript = tmp_path / "served.jsonl"
        proc = subprocess.Popen(
            [sys.executable, "-m", "diarl.cli", "serve", "--in", str(wav),
             "--listen", "127.0.0.1:0", "--no-realtime", "--pace-s", "0.1",
             "--transcript", str(transcript), "--linger-s", "0.5",
             *GOLDEN_CONFIG_ARGS],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
        banner = proc.stderr.readline().strip()
        host, port = banner.removeprefix("listening on ").rsplit(":", 1)
        errors_seen: list[str] = []
        done: list[bool] = []
        client = threading.Thread(target=scripted_feedback_client,
                                  args=((host, int(port)), GOLDEN_SCRIPT,
                                        errors_seen, done), daemon=True)
        client.start()
        proc.wait(timeout=60)
        client.join(timeout=5)
        served = transcript.read_text(encoding="utf-8").splitlines()

        replay_matches = replay_lines == golden
        serve_matches = served == golden
        errors_ok = ("BAD_JSON" in errors_seen and "UNKNOWN_TYPE" in errors_seen
                     and "UNKNOWN_SEGMENT" in errors_seen)
        script_done = bool(done)
    ok = (replay_matches and serve_matches and errors_ok and script_done
          and sw.elapsed < 30.0)
    report(8, ok, f"replay==golden: {replay_matches}, serve==golden: "
                  f"{serve_matches} ({len(served)} lines), malformed probes -> "
                  f"{sorted(set(errors_seen))}, session survived: {script_done}, "
                  f"{sw.elapsed:.1f}s (<30s)")
