"""The online decision loop.

One session owns one policy, one registry, one feature pipeline, one seeded
generator, and an append-only timeline. Audio segments come in strictly
ordered; matured feedback is drained and applied before every selection;
rewards are routed to the policy that made the decision. Everything needed
to continue the session lives in the JSON snapshot, so pause/resume is
bit-equivalent to an uninterrupted run.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .audio import AudioSegment
from .errors import ConfigError, DiarlError, InputError, ProtocolError
from .features import FeatureConfig, FeatureExtractor, FeatureVector, is_speech
from .policies import BerlinUcbPolicy, Decision, LinUcbPolicy, QLearningPolicy
from .registry import NON_SPEECH_LABEL, SpeakerRegistry
from .rewards import (
    KIND_CORRECT,
    KIND_NEW_SPEAKER,
    FeedbackEvent,
    RewardRecord,
    RewardWeights,
    confidence_reward,
    hybrid_reward,
    time_reward,
    user_reward,
)
from .rng import Rng

POLICY_KINDS = ("qlearning", "linucb", "berlinucb")

# Rejection codes surfaced on the wire protocol.
CODE_UNKNOWN_SEGMENT = "UNKNOWN_SEGMENT"
CODE_STALE = "STALE"
CODE_DUPLICATE = "DUPLICATE"
CODE_UNKNOWN_LABEL = "UNKNOWN_LABEL"
CODE_NON_SPEECH = "NON_SPEECH_SEGMENT"
CODE_DUPLICATE_NAME = "DUPLICATE_NAME"


class FeedbackRejected(DiarlError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class SessionConfig:
    policy: str = "linucb"
    seed: int = 0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    alpha: float = 1.0
    epsilon: float = 0.1
    gamma: float = 0.9
    eta: float = 0.1
    w_p: float = 0.8
    tau_p: float = 4.0
    tau_s: float = 2.0
    feedback_window_s: float = 30.0

    def __post_init__(self):
        if self.policy not in POLICY_KINDS:
            raise ConfigError(f"policy must be one of {POLICY_KINDS}, got {self.policy!r}")
        if self.feedback_window_s <= 0:
            raise ConfigError("feedback_window_s must be positive")

    def to_doc(self) -> dict:
        doc = asdict(self)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "SessionConfig":
        doc = dict(doc)
        if "features" in doc and isinstance(doc["features"], dict):
            doc["features"] = FeatureConfig(**doc["features"])
        if "rewards" in doc and isinstance(doc["rewards"], dict):
            doc["rewards"] = RewardWeights(**doc["rewards"])
        return cls(**doc)

    def with_overrides(self, **kwargs) -> "SessionConfig":
        return replace(self, **kwargs)


@dataclass
class TimelineEntry:
    segment_id: int
    t0: float
    t1: float
    non_speech: bool = False
    decision: Decision | None = None
    feature: np.ndarray | None = None
    emitted_label: str = NON_SPEECH_LABEL
    label: str = NON_SPEECH_LABEL
    reward: RewardRecord | None = None
    corrections: list = field(default_factory=list)
    corrected: bool = False
    user_rewarded: bool = False
    pseudo_applied: bool = False
    # Q-learning chain bookkeeping
    state_index: int | None = None
    next_state: int | None = None
    bootstrapped: bool = False
    pending_reward: float = 0.0
    pending_reward_set: bool = False
    pending_credits: list = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "t0": self.t0,
            "t1": self.t1,
            "non_speech": self.non_speech,
            "decision": None if self.decision is None else {
                "segment_id": self.decision.segment_id,
                "chosen": self.decision.chosen,
                "confidence": self.decision.confidence,
                "scores": {str(a): float(s) for a, s in sorted(self.decision.scores.items())},
            },
            "feature": None if self.feature is None else [float(v) for v in self.feature],
            "emitted_label": self.emitted_label,
            "label": self.label,
            "reward": None if self.reward is None else self.reward.to_doc(),
            "corrections": list(self.corrections),
            "corrected": self.corrected,
            "user_rewarded": self.user_rewarded,
            "pseudo_applied": self.pseudo_applied,
            "state_index": self.state_index,
            "next_state": self.next_state,
            "bootstrapped": self.bootstrapped,
            "pending_reward": self.pending_reward,
            "pending_reward_set": self.pending_reward_set,
            "pending_credits": [list(c) for c in self.pending_credits],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TimelineEntry":
        decision = None
        if doc["decision"] is not None:
            d = doc["decision"]
            decision = Decision(segment_id=int(d["segment_id"]), chosen=int(d["chosen"]),
                                confidence=float(d["confidence"]),
                                scores={int(a): float(s) for a, s in d["scores"].items()})
        reward = None
        if doc["reward"] is not None:
            r = doc["reward"]
            reward = RewardRecord(segment_id=int(r["segment_id"]), r_user=r["r_user"],
                                  r_time=float(r["r_time"]), r_conf=float(r["r_conf"]),
                                  r_total=float(r["r_total"]))
        return cls(
            segment_id=int(doc["segment_id"]), t0=float(doc["t0"]), t1=float(doc["t1"]),
            non_speech=bool(doc["non_speech"]), decision=decision,
            feature=None if doc["feature"] is None else np.array(doc["feature"], dtype=np.float64),
            emitted_label=doc["emitted_label"], label=doc["label"], reward=reward,
            corrections=list(doc["corrections"]), corrected=bool(doc["corrected"]),
            user_rewarded=bool(doc["user_rewarded"]), pseudo_applied=bool(doc["pseudo_applied"]),
            state_index=doc["state_index"], next_state=doc["next_state"],
            bootstrapped=bool(doc["bootstrapped"]),
            pending_reward=float(doc["pending_reward"]),
            pending_reward_set=bool(doc["pending_reward_set"]),
            pending_credits=[(int(a), float(r)) for a, r in doc["pending_credits"]],
        )


def build_policy(config: SessionConfig):
    if config.policy == "linucb":
        return LinUcbPolicy(alpha=config.alpha)
    if config.policy == "berlinucb":
        return BerlinUcbPolicy(alpha=config.alpha, pseudo_weight=config.w_p,
                               pseudo_distance=config.tau_p)
    return QLearningPolicy(eta=config.eta, gamma=config.gamma, epsilon=config.epsilon,
                           codebook_threshold=config.tau_s)


def policy_from_doc(doc: dict):
    kind = doc["kind"]
    if kind == "linucb":
        return LinUcbPolicy.from_doc(doc)
    if kind == "berlinucb":
        return BerlinUcbPolicy.from_doc(doc)
    if kind == "qlearning":
        return QLearningPolicy.from_doc(doc)
    raise ConfigError(f"unknown policy kind {kind!r}")


_EMPTY_HASH = "0" * 64


def _chain(prev_hash: str, line: str) -> str:
    return hashlib.sha256((prev_hash + line).encode("utf-8")).hexdigest()


class Session:
    """Single-writer online loop; see module docstring.

    Feedback may be submitted from any thread; all application happens on the
    thread that calls step()/decide().
    """

    def __init__(self, config: SessionConfig, sample_rate: int = 16000,
                 use_extractor: bool = True):
        self.config = config
        self.sample_rate = sample_rate
        self.extractor = FeatureExtractor(config.features, sample_rate) if use_extractor else None
        self.registry = SpeakerRegistry()
        self.policy = build_policy(config)
        self.rng = Rng(config.seed)
        self.timeline: list[TimelineEntry] = []
        self._by_segment: dict[int, TimelineEntry] = {}
        self.next_segment_id = 0
        self.stream_time = 0.0
        self.transcript_hash = _EMPTY_HASH
        self.transcript_count = 0
        self._queue: list[tuple] = []  # ("feedback", event, tag) | ("register", name, tag)
        self._queue_lock = threading.Lock()
        self._applied: set[tuple[int, str]] = set()
        self._q_pending: TimelineEntry | None = None
        self._last_speech: TimelineEntry | None = None
        # listeners (service hooks); any may stay None
        self.on_entry = None          # fn(entry, transcript_line)
        self.on_reward = None         # fn(record)
        self.on_registry = None       # fn(registry)
        self.on_feedback_rejected = None  # fn(tag, event, FeedbackRejected)

    # ------------------------------------------------------------------ ingest

    def step(self, segment: AudioSegment) -> TimelineEntry:
        """Process one audio segment: gate, extract, decide, emit."""
        if segment.segment_id != self.next_segment_id:
            raise ProtocolError(
                f"expected segment {self.next_segment_id}, got {segment.segment_id}")
        if self.extractor is None:
            raise ConfigError("session was built without a feature extractor")
        if not is_speech(segment, self.config.features):
            self.stream_time = segment.t1
            self._drain(segment.t1)
            entry = TimelineEntry(segment_id=segment.segment_id, t0=segment.t0,
                                  t1=segment.t1, non_speech=True)
            self._append(entry)
            return entry
        x = self.extractor.extract(segment)
        return self.decide(x, segment.t0, segment.t1)

    def decide(self, x: FeatureVector, t0: float, t1: float) -> TimelineEntry:
        """Feature-level step: drain feedback, update chains, select, record."""
        sid = self.next_segment_id
        if x.segment_id != sid:
            raise InputError(f"feature vector is for segment {x.segment_id}, expected {sid}")
        self.stream_time = t1
        self._drain(t1)

        values = np.asarray(x.values, dtype=np.float64)
        entry = TimelineEntry(segment_id=sid, t0=t0, t1=t1, feature=values)

        if isinstance(self.policy, QLearningPolicy):
            s = self.policy.quantize(values)
            entry.state_index = s
            self._bootstrap_pending(s)
            decision = self.policy.select(s, self.registry, sid, self.rng)
        else:
            if isinstance(self.policy, BerlinUcbPolicy):
                self._pseudo_update_previous()
            decision = self.policy.select(values, self.registry, sid)

        entry.decision = decision
        entry.emitted_label = self.registry.name_of(decision.chosen)
        entry.label = entry.emitted_label
        self._append(entry)
        if isinstance(self.policy, QLearningPolicy):
            self._q_pending = entry
        self._last_speech = entry
        return entry

    def _bootstrap_pending(self, s_next: int) -> None:
        prev = self._q_pending
        if prev is None:
            return
        self.policy.update(prev.state_index, prev.decision.chosen,
                           prev.pending_reward, s_next, self.registry)
        for arm, r in prev.pending_credits:
            self.policy.update(prev.state_index, arm, r, s_next, self.registry)
        prev.next_state = s_next
        prev.bootstrapped = True
        prev.pending_credits = []
        self._q_pending = None

    def _pseudo_update_previous(self) -> None:
        prev = self._last_speech
        if prev is None or prev.user_rewarded or prev.pseudo_applied:
            return
        if prev.feature is not None:
            self.policy.update_unrewarded(prev.decision.chosen, prev.feature)
        prev.pseudo_applied = True

    def _append(self, entry: TimelineEntry) -> None:
        self.timeline.append(entry)
        self._by_segment[entry.segment_id] = entry
        self.next_segment_id = entry.segment_id + 1
        line = self.transcript_line(entry)
        self.transcript_hash = _chain(self.transcript_hash, line)
        self.transcript_count += 1
        self._prune_features()
        if self.on_entry:
            self.on_entry(entry, line)

    @staticmethod
    def transcript_line(entry: TimelineEntry) -> str:
        confidence = 0.0 if entry.decision is None else entry.decision.confidence
        return json.dumps({
            "segment_id": entry.segment_id,
            "t0": entry.t0,
            "t1": entry.t1,
            "label": entry.emitted_label,
            "confidence": confidence,
        }, separators=(",", ":"))

    def _prune_features(self) -> None:
        """Drop stored contexts that can no longer receive feedback."""
        horizon = self.stream_time - self.config.feedback_window_s
        protected = {id(self._q_pending), id(self._last_speech)}
        for entry in self.timeline:
            if entry.t1 >= horizon:
                break
            if entry.feature is not None and id(entry) not in protected:
                entry.feature = None

    # ---------------------------------------------------------------- feedback

    def submit_feedback(self, event: FeedbackEvent, tag=None) -> None:
        """Queue feedback from any thread; applied at the next drain."""
        with self._queue_lock:
            self._queue.append(("feedback", event, tag))

    def submit_registration(self, name: str, tag=None) -> None:
        with self._queue_lock:
            self._queue.append(("register", name, tag))

    def drain_now(self, now: float | None = None) -> None:
        """Apply everything matured at the current stream time (idle drains).

        Passing a later `now` advances the stream clock, flushing feedback
        whose delay extends past the final segment.
        """
        if now is not None and now > self.stream_time:
            self.stream_time = now
        self._drain(self.stream_time)

    def _drain(self, now: float) -> None:
        with self._queue_lock:
            pending = self._queue
            self._queue = []
        later = []
        for command in pending:
            if command[0] == "feedback" and command[1].arrival_time > now:
                later.append(command)
                continue
            self._dispatch(command)
        if later:
            with self._queue_lock:
                self._queue = later + self._queue

    def _dispatch(self, command: tuple) -> None:
        kind, payload, tag = command
        try:
            if kind == "register":
                self.register_speaker(payload)
            else:
                record = self.apply_feedback(payload)
                if self.on_reward:
                    self.on_reward(record)
        except FeedbackRejected as exc:
            if self.on_feedback_rejected:
                self.on_feedback_rejected(tag, payload, exc)
            else:
                raise

    def register_speaker(self, name: str) -> int:
        """Explicit registration (no reward attached)."""
        try:
            index = self.registry.confirm(name)
        except DiarlError as exc:
            raise FeedbackRejected(CODE_DUPLICATE_NAME, str(exc)) from exc
        self.policy.add_arm(index)
        if self.on_registry:
            self.on_registry(self.registry)
        return index

    def apply_feedback(self, event: FeedbackEvent) -> RewardRecord:
        """Validate, compute the hybrid reward, and route policy updates."""
        entry = self._by_segment.get(event.segment_id)
        if entry is None or event.segment_id >= self.next_segment_id:
            raise FeedbackRejected(CODE_UNKNOWN_SEGMENT,
                                   f"no decision for segment {event.segment_id}")
        if entry.non_speech:
            raise FeedbackRejected(CODE_NON_SPEECH,
                                   f"segment {event.segment_id} was not a decision")
        if self.stream_time - entry.t1 > self.config.feedback_window_s:
            raise FeedbackRejected(CODE_STALE,
                                   f"segment {event.segment_id} is outside the feedback window")
        key = (event.segment_id, event.kind)
        if key in self._applied:
            raise FeedbackRejected(CODE_DUPLICATE,
                                   f"{event.kind} already applied to segment {event.segment_id}")

        corrected_arm = None
        if event.kind == KIND_CORRECT:
            corrected_arm = self.registry.index_of(event.label)
            if corrected_arm is None:
                raise FeedbackRejected(CODE_UNKNOWN_LABEL,
                                       f"unknown speaker {event.label!r}")
        fresh_arm = None
        if event.kind == KIND_NEW_SPEAKER:
            try:
                fresh_arm = self.registry.confirm(event.label)
            except DiarlError as exc:
                raise FeedbackRejected(CODE_DUPLICATE_NAME, str(exc)) from exc
            self.policy.add_arm(fresh_arm)

        r_user = user_reward(event, entry.decision)
        if event.kind in (KIND_CORRECT, KIND_NEW_SPEAKER):
            entry.corrected = True
            entry.label = event.label
        window = [e for e in self.timeline if not e.non_speech]
        r_time = time_reward(window, now=entry.t1)
        r_conf = confidence_reward(entry.decision)
        record = hybrid_reward(entry.segment_id, r_user, r_time, r_conf, self.config.rewards)

        self._update_policy(entry, entry.decision.chosen, record.r_total)
        if corrected_arm is not None:
            self._update_policy(entry, corrected_arm, 1.0)
        if fresh_arm is not None:
            self._update_policy(entry, fresh_arm, 1.0)

        entry.user_rewarded = True
        entry.reward = record
        entry.corrections.append({
            "kind": event.kind, "label": event.label,
            "rating": event.rating, "arrival_time": event.arrival_time,
        })
        self._applied.add(key)
        if fresh_arm is not None and self.on_registry:
            self.on_registry(self.registry)
        return record

    def _update_policy(self, entry: TimelineEntry, arm: int, r: float) -> None:
        if isinstance(self.policy, QLearningPolicy):
            if entry.bootstrapped:
                self.policy.update(entry.state_index, arm, r, entry.next_state, self.registry)
            elif arm == entry.decision.chosen and not entry.pending_reward_set:
                # folded into the decision's own bootstrap update
                entry.pending_reward = r
                entry.pending_reward_set = True
            else:
                entry.pending_credits.append((arm, r))
        elif isinstance(self.policy, BerlinUcbPolicy):
            self.policy.update_rewarded(arm, entry.feature, r, self.registry)
        else:
            self.policy.update(arm, entry.feature, r, self.registry)

    # ---------------------------------------------------------------- snapshot

    def snapshot(self) -> dict:
        horizon = self.stream_time - self.config.feedback_window_s
        keep = set()
        for entry in self.timeline:
            if entry.t1 >= horizon:
                keep.add(entry.segment_id)
        for special in (self._q_pending, self._last_speech):
            if special is not None:
                keep.add(special.segment_id)
        recent = [e.to_doc() for e in self.timeline if e.segment_id in keep]
        with self._queue_lock:
            queued = [c for c in self._queue if c[0] == "feedback"]
        return {
            "version": 1,
            "config": self.config.to_doc(),
            "next_segment_id": self.next_segment_id,
            "stream_time": self.stream_time,
            "rng": self.rng.state(),
            "registry": self.registry.to_doc(),
            "policy": self.policy.to_doc(),
            "extractor": None if self.extractor is None else self.extractor.to_doc(),
            "transcript": {"count": self.transcript_count, "chain_hash": self.transcript_hash},
            "applied": sorted([sid, kind] for sid, kind in self._applied),
            "pending_feedback": [
                {"segment_id": e.segment_id, "kind": e.kind, "label": e.label,
                 "rating": e.rating, "arrival_time": e.arrival_time}
                for _, e, _ in queued
            ],
            "recent_entries": recent,
            "q_pending_segment": None if self._q_pending is None else self._q_pending.segment_id,
            "last_speech_segment": None if self._last_speech is None else self._last_speech.segment_id,
        }

    def snapshot_json(self) -> str:
        return json.dumps(self.snapshot(), separators=(",", ":"))

    @classmethod
    def from_snapshot(cls, doc: dict) -> "Session":
        config = SessionConfig.from_doc(doc["config"])
        session = cls(config, use_extractor=doc["extractor"] is not None)
        if doc["extractor"] is not None:
            session.extractor.load_doc(doc["extractor"])
        session.registry = SpeakerRegistry.from_doc(doc["registry"])
        session.policy = policy_from_doc(doc["policy"])
        session.rng = Rng.from_state(doc["rng"])
        session.next_segment_id = int(doc["next_segment_id"])
        session.stream_time = float(doc["stream_time"])
        session.transcript_hash = doc["transcript"]["chain_hash"]
        session.transcript_count = int(doc["transcript"]["count"])
        session._applied = {(int(sid), kind) for sid, kind in doc["applied"]}
        session.timeline = [TimelineEntry.from_doc(e) for e in doc["recent_entries"]]
        session._by_segment = {e.segment_id: e for e in session.timeline}
        session._queue = [("feedback", FeedbackEvent(
            segment_id=int(e["segment_id"]), kind=e["kind"], label=e["label"],
            rating=e["rating"], arrival_time=float(e["arrival_time"])), None)
            for e in doc["pending_feedback"]]
        if doc["q_pending_segment"] is not None:
            session._q_pending = session._by_segment[int(doc["q_pending_segment"])]
        if doc["last_speech_segment"] is not None:
            session._last_speech = session._by_segment[int(doc["last_speech_segment"])]
        return session
