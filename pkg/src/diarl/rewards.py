"""Scalar rewards assembled from user feedback, timeline quality, and confidence.

Three independent signal families feed one bounded hybrid reward:
user feedback (confirm / correct / new-speaker / numeric rating), a trailing
time-quality term over recently decided seconds, and an affine map of the
decision's own confidence. A round counts as "unrewarded" for policy purposes
exactly when the user component is absent, whatever the other weights are.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, InputError
from .policies.base import Decision
from .registry import NEW_ACTION

KIND_CONFIRM = "confirm"
KIND_CORRECT = "correct"
KIND_NEW_SPEAKER = "new_speaker"
KIND_RATING = "rating"
FEEDBACK_KINDS = (KIND_CONFIRM, KIND_CORRECT, KIND_NEW_SPEAKER, KIND_RATING)

DEFAULT_TIME_HORIZON_S = 5.0


@dataclass(frozen=True)
class FeedbackEvent:
    """A user judgment about one past decision, possibly arriving late."""

    segment_id: int
    kind: str
    label: str | None = None
    rating: float | None = None
    arrival_time: float = 0.0

    def __post_init__(self):
        if self.kind not in FEEDBACK_KINDS:
            raise InputError(f"unknown feedback kind {self.kind!r}")
        if self.kind in (KIND_CORRECT, KIND_NEW_SPEAKER) and not self.label:
            raise InputError(f"{self.kind} feedback requires a label")
        if self.kind == KIND_RATING:
            if self.rating is None or not -1.0 <= self.rating <= 1.0:
                raise InputError("rating must be a number in [-1, 1]")


@dataclass(frozen=True)
class RewardWeights:
    w_user: float = 1.0
    w_time: float = 0.1
    w_conf: float = 0.05

    def __post_init__(self):
        if min(self.w_user, self.w_time, self.w_conf) < 0:
            raise ConfigError("reward weights must be nonnegative")
        if self.w_user == self.w_time == self.w_conf == 0:
            raise ConfigError("at least one reward weight must be positive")


@dataclass(frozen=True)
class RewardRecord:
    segment_id: int
    r_user: float | None
    r_time: float
    r_conf: float
    r_total: float

    def to_doc(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "r_user": self.r_user,
            "r_time": self.r_time,
            "r_conf": self.r_conf,
            "r_total": self.r_total,
        }


def user_reward(event: FeedbackEvent, decision: Decision) -> float:
    """The user component in {-1, 0, 1} (or the raw rating)."""
    if event.segment_id != decision.segment_id:
        raise InputError(
            f"feedback targets segment {event.segment_id}, decision is {decision.segment_id}")
    if event.kind == KIND_CONFIRM:
        return 1.0
    if event.kind == KIND_CORRECT:
        return -1.0
    if event.kind == KIND_NEW_SPEAKER:
        return 1.0 if decision.chosen == NEW_ACTION else -1.0
    return float(event.rating)


def time_reward(window, now: float, horizon_s: float = DEFAULT_TIME_HORIZON_S) -> float:
    """Quality of the trailing horizon: +1 per uncorrected decided second,
    -1 per corrected one, normalized by the horizon length.

    window items need t0/t1 spans and a `corrected` flag (a decision counts
    as corrected once a correct or new-speaker feedback targeted it).
    """
    if horizon_s <= 0:
        raise ConfigError("horizon must be positive")
    start = now - horizon_s
    total = 0.0
    for entry in window:
        overlap = min(entry.t1, now) - max(entry.t0, start)
        if overlap <= 0:
            continue
        total += -overlap if entry.corrected else overlap
    return max(-1.0, min(1.0, total / horizon_s))


def confidence_reward(decision: Decision) -> float:
    """Affine map of confidence from [0, 1] onto [-1, 1]."""
    return 2.0 * decision.confidence - 1.0


def hybrid_reward(segment_id: int, r_user: float | None, r_time: float,
                  r_conf: float, weights: RewardWeights) -> RewardRecord:
    """Weighted sum of the components, clamped to [-1, 1].

    An absent user component contributes 0 but is preserved in the record:
    policies treat such rounds as unrewarded regardless of the other terms.
    """
    total = (weights.w_user * (r_user if r_user is not None else 0.0)
             + weights.w_time * r_time
             + weights.w_conf * r_conf)
    return RewardRecord(segment_id=segment_id, r_user=r_user, r_time=r_time,
                        r_conf=r_conf, r_total=max(-1.0, min(1.0, total)))
