"""Offline evaluation on labeled feature streams with sparse oracle feedback.

Streams are either synthetic (Gaussian speaker clusters in feature space) or
loaded from a CSV corpus, concatenated into speaker turns by a seeded
schedule. A benchmark run drives a full session over the stream, reveals the
ground truth with probability p after each decision (confirming, correcting,
or announcing a first-time speaker), and scores online accuracy, cumulative
reward, and 0/1 regret against the always-correct oracle.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError
from .features import FeatureVector
from .registry import NEW_ACTION, NEW_LABEL
from .rewards import KIND_CONFIRM, KIND_CORRECT, KIND_NEW_SPEAKER, FeedbackEvent
from .rng import Rng
from .session import Session, SessionConfig

BASELINES = ("random", "oracle")
MEAN_TURN_SEGMENTS = 4.0
FINAL_WINDOW_FRACTION = 0.2


@dataclass(frozen=True)
class StreamSegment:
    segment_id: int
    t0: float
    t1: float
    x: np.ndarray
    speaker: int
    first_appearance: bool


@dataclass(frozen=True)
class LabeledStream:
    segments: list[StreamSegment]
    speaker_names: list[str]
    dim: int
    seed: int

    def __len__(self) -> int:
        return len(self.segments)


@dataclass(frozen=True)
class FeedbackPolicy:
    """Bernoulli(p) reveal after each decision, delivered delay_s later."""

    p: float
    delay_s: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("reveal probability must be in [0, 1]")
        if self.delay_s < 0:
            raise ConfigError("delay must be nonnegative")


def _speaker_schedule(n_speakers: int, n_segments: int, rng: Rng) -> list[int]:
    """Turn-taking schedule: geometric turn lengths, switch to another speaker."""
    schedule: list[int] = []
    current = rng.below(n_speakers)
    while len(schedule) < n_segments:
        turn = rng.geometric(MEAN_TURN_SEGMENTS)
        schedule.extend([current] * turn)
        if n_speakers > 1:
            step = 1 + rng.below(n_speakers - 1)
            current = (current + step) % n_speakers
    return schedule[:n_segments]


def _assemble(features: list[np.ndarray], schedule: list[int],
              names: list[str], dim: int, seed: int) -> LabeledStream:
    seen: set[int] = set()
    segments = []
    for i, (x, speaker) in enumerate(zip(features, schedule)):
        first = speaker not in seen
        seen.add(speaker)
        segments.append(StreamSegment(segment_id=i, t0=float(i), t1=float(i + 1),
                                      x=x, speaker=speaker, first_appearance=first))
    return LabeledStream(segments=segments, speaker_names=names, dim=dim, seed=seed)


def generate_synthetic(n_speakers: int, d: int, separation: float,
                       n_segments: int, seed: int) -> LabeledStream:
    """Speaker centroids on a sphere of radius `separation`, unit noise.

    separation 0 collapses every centroid to the origin (pure chance regime).
    """
    if n_speakers < 1:
        raise ConfigError("need at least one speaker")
    if separation < 0:
        raise ConfigError("separation must be nonnegative")
    rng = Rng(seed)
    centroids = []
    for _ in range(n_speakers):
        direction = np.array([rng.gauss() for _ in range(d)])
        if separation == 0.0:
            centroids.append(np.zeros(d))
        else:
            centroids.append(direction / np.linalg.norm(direction) * separation)
    schedule = _speaker_schedule(n_speakers, n_segments, rng)
    features = [centroids[k] + np.array([rng.gauss() for _ in range(d)])
                for k in schedule]
    names = [f"S{i}" for i in range(n_speakers)]
    return _assemble(features, schedule, names, d, seed)


# ----------------------------------------------------------------- CSV corpus

def write_corpus(directory: str | Path, names: list[str],
                 rows_per_speaker: list[np.ndarray]) -> None:
    """Write speakers.tsv plus one features_<id>.csv per speaker."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "speakers.tsv", "w", encoding="utf-8") as fh:
        for i, name in enumerate(names):
            fh.write(f"{i}\t{name}\n")
    for i, rows in enumerate(rows_per_speaker):
        with open(directory / f"features_{i}.csv", "w", encoding="utf-8") as fh:
            for row in np.atleast_2d(rows):
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")


def load_corpus(directory: str | Path, n_segments: int, seed: int) -> LabeledStream:
    """Concatenate per-speaker feature rows into a seeded turn schedule.

    Rows are consumed cyclically in file order within each speaker's turns.
    """
    directory = Path(directory)
    speakers_path = directory / "speakers.tsv"
    if not speakers_path.exists():
        raise InputError(f"missing {speakers_path}")
    ids, names = [], []
    for line in speakers_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        sid, name = line.split("\t", 1)
        ids.append(int(sid))
        names.append(name)
    rows = []
    for sid in ids:
        path = directory / f"features_{sid}.csv"
        data = [np.array([float(v) for v in line.split(",")])
                for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        if not data:
            raise InputError(f"{path} has no feature rows")
        rows.append(data)
    dims = {len(r[0]) for r in rows}
    if len(dims) != 1:
        raise InputError(f"inconsistent feature dimensions across speakers: {dims}")
    rng = Rng(seed)
    schedule = _speaker_schedule(len(ids), n_segments, rng)
    cursors = [0] * len(ids)
    features = []
    for k in schedule:
        features.append(rows[k][cursors[k] % len(rows[k])])
        cursors[k] += 1
    return _assemble(features, schedule, names, dims.pop(), seed)


# -------------------------------------------------------------------- metrics

@dataclass
class MetricsReport:
    policy: str
    stream_seed: int
    policy_seed: int
    reveal_seed: int
    p: float
    delay_s: float
    n_segments: int
    decisions: int
    errors: int
    error_rate: float
    cumulative_reward: float
    cumulative_regret: float
    final_window_accuracy: float
    reveals: int
    confusion: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "policy": self.policy,
            "stream_seed": self.stream_seed,
            "policy_seed": self.policy_seed,
            "reveal_seed": self.reveal_seed,
            "p": self.p,
            "delay_s": self.delay_s,
            "n_segments": self.n_segments,
            "decisions": self.decisions,
            "errors": self.errors,
            "error_rate": self.error_rate,
            "cumulative_reward": self.cumulative_reward,
            "cumulative_regret": self.cumulative_regret,
            "final_window_accuracy": self.final_window_accuracy,
            "reveals": self.reveals,
            "confusion": self.confusion,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))


def _final_window_accuracy(correct_flags: list[bool]) -> float:
    if not correct_flags:
        return 0.0
    window = max(1, int(round(FINAL_WINDOW_FRACTION * len(correct_flags))))
    tail = correct_flags[-window:]
    return sum(tail) / len(tail)


def _metrics(policy_name: str, stream: LabeledStream, fp: FeedbackPolicy,
             policy_seed: int, reveal_seed: int, correct_flags: list[bool],
             labels: list[str], reveals: int, cumulative_reward: float) -> MetricsReport:
    errors = sum(1 for c in correct_flags if not c)
    confusion: dict[str, dict[str, int]] = {}
    for seg, label in zip(stream.segments, labels):
        truth = stream.speaker_names[seg.speaker]
        confusion.setdefault(truth, {})
        confusion[truth][label] = confusion[truth].get(label, 0) + 1
    decisions = len(correct_flags)
    return MetricsReport(
        policy=policy_name,
        stream_seed=stream.seed,
        policy_seed=policy_seed,
        reveal_seed=reveal_seed,
        p=fp.p,
        delay_s=fp.delay_s,
        n_segments=len(stream),
        decisions=decisions,
        errors=errors,
        error_rate=errors / decisions if decisions else 0.0,
        cumulative_reward=cumulative_reward,
        cumulative_regret=float(errors),
        final_window_accuracy=_final_window_accuracy(correct_flags),
        reveals=reveals,
        confusion={k: dict(sorted(v.items())) for k, v in sorted(confusion.items())},
    )


def _is_correct(seg: StreamSegment, label: str, chosen: int, names: list[str]) -> bool:
    """A label is right when it names the true speaker; NEW is right only on
    a speaker's very first segment."""
    if label == names[seg.speaker]:
        return True
    return chosen == NEW_ACTION and seg.first_appearance


def _run_session_policy(stream: LabeledStream, config: SessionConfig,
                        fp: FeedbackPolicy, reveal_seed: int) -> MetricsReport:
    session = Session(config, use_extractor=False)
    reveal_rng = Rng(reveal_seed)
    rewards: list[float] = []
    session.on_reward = lambda record: rewards.append(record.r_total)
    names = stream.speaker_names
    correct_flags: list[bool] = []
    labels: list[str] = []
    announced: set[str] = set()  # new_speaker sent but possibly not applied yet
    reveals = 0
    for seg in stream.segments:
        entry = session.decide(FeatureVector(values=seg.x, segment_id=seg.segment_id),
                               seg.t0, seg.t1)
        chosen = entry.decision.chosen
        label = entry.emitted_label
        labels.append(label)
        correct_flags.append(_is_correct(seg, label, chosen, names))
        if reveal_rng.random() < fp.p:
            reveals += 1
            truth_name = names[seg.speaker]
            truth_arm = session.registry.index_of(truth_name)
            if truth_arm is None and truth_name not in announced:
                announced.add(truth_name)
                event = FeedbackEvent(segment_id=seg.segment_id, kind=KIND_NEW_SPEAKER,
                                      label=truth_name, arrival_time=seg.t1 + fp.delay_s)
            elif chosen == truth_arm:
                event = FeedbackEvent(segment_id=seg.segment_id, kind=KIND_CONFIRM,
                                      arrival_time=seg.t1 + fp.delay_s)
            else:
                event = FeedbackEvent(segment_id=seg.segment_id, kind=KIND_CORRECT,
                                      label=truth_name, arrival_time=seg.t1 + fp.delay_s)
            session.submit_feedback(event)
    if stream.segments:
        session.drain_now(stream.segments[-1].t1 + fp.delay_s)
    return _metrics(config.policy, stream, fp, config.seed, reveal_seed,
                    correct_flags, labels, reveals, float(sum(rewards)))


def _run_baseline(stream: LabeledStream, baseline: str, policy_seed: int,
                  fp: FeedbackPolicy, reveal_seed: int) -> MetricsReport:
    """Cheating oracle and uniform-random reference policies.

    The random baseline picks uniformly among registered speakers (NEW until
    somebody is registered); the oracle reads the ground truth outright.
    """
    rng = Rng(policy_seed)
    reveal_rng = Rng(reveal_seed)
    names = stream.speaker_names
    registered: list[int] = []
    correct_flags: list[bool] = []
    labels: list[str] = []
    reveals = 0
    cumulative_reward = 0.0
    for seg in stream.segments:
        if baseline == "oracle":
            label = names[seg.speaker]
            correct = True
        elif registered:
            label = names[registered[rng.below(len(registered))]]
            correct = label == names[seg.speaker]
        else:
            label = NEW_LABEL
            correct = seg.first_appearance
        labels.append(label)
        correct_flags.append(correct)
        if reveal_rng.random() < fp.p:
            reveals += 1
            if seg.speaker not in registered:
                registered.append(seg.speaker)
            cumulative_reward += 1.0 if correct else -1.0
    return _metrics(baseline, stream, fp, policy_seed, reveal_seed,
                    correct_flags, labels, reveals, cumulative_reward)


def run_benchmark(stream: LabeledStream, policy_config: SessionConfig | str,
                  fp: FeedbackPolicy, reveal_seed: int) -> MetricsReport:
    """Drive one policy over one stream under one feedback regime."""
    if isinstance(policy_config, str):
        if policy_config not in BASELINES:
            raise ConfigError(f"unknown baseline {policy_config!r}")
        return _run_baseline(stream, policy_config, reveal_seed, fp, reveal_seed)
    return _run_session_policy(stream, policy_config, fp, reveal_seed)


# ---------------------------------------------------------------- comparisons

def compare_policies(policies: list[SessionConfig | str], stream_spec: dict,
                     p_grid: list[float], seeds: list[int],
                     delay_s: float = 0.0) -> tuple[list[dict], dict]:
    """Paired runs of several policies over identical seeded streams.

    Returns (rows, summary): one row per (policy, p, seed), and per-(policy, p)
    mean/std plus pairwise per-seed win counts.
    """
    if len(policies) < 2:
        raise ConfigError("need at least two policies to compare")
    rows = []
    by_key: dict[tuple[str, float], list[float]] = {}
    for p in p_grid:
        fp = FeedbackPolicy(p=p, delay_s=delay_s)
        for seed in seeds:
            stream = generate_synthetic(seed=seed, **stream_spec)
            for policy in policies:
                config = policy if isinstance(policy, str) else policy.with_overrides(seed=seed)
                report = run_benchmark(stream, config, fp, reveal_seed=seed)
                rows.append({
                    "policy": report.policy,
                    "p": p,
                    "seed": seed,
                    "error_rate": report.error_rate,
                    "final_window_accuracy": report.final_window_accuracy,
                    "cumulative_reward": report.cumulative_reward,
                    "cumulative_regret": report.cumulative_regret,
                })
                by_key.setdefault((report.policy, p), []).append(report.final_window_accuracy)
    summary = {"means": {}, "stds": {}, "wins": {}}
    for (policy, p), accs in sorted(by_key.items()):
        key = f"{policy}@p={p:g}"
        summary["means"][key] = float(np.mean(accs))
        summary["stds"][key] = float(np.std(accs))
    names = []
    for policy in policies:
        name = policy if isinstance(policy, str) else policy.policy
        if name not in names:
            names.append(name)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            for p in p_grid:
                accs_a = by_key[(a, p)]
                accs_b = by_key[(b, p)]
                wins_a = sum(1 for x, y in zip(accs_a, accs_b) if x > y)
                wins_b = sum(1 for x, y in zip(accs_a, accs_b) if y > x)
                summary["wins"][f"{a}_vs_{b}@p={p:g}"] = [wins_a, wins_b]
    return rows, summary


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
