"""Types and helpers shared by every decision policy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


def clamp_reward(r: float) -> float:
    """Rewards are clamped to [-1, 1] at the policy boundary."""
    return max(-1.0, min(1.0, float(r)))


@dataclass(frozen=True)
class Decision:
    """One labeling decision: the chosen action plus diagnostics."""

    segment_id: int
    chosen: int
    confidence: float
    scores: dict[int, float] = field(default_factory=dict)


def confidence_of(scores) -> float:
    """Map a score vector to [0, 1] via the top-two margin: 1 - exp(-margin).

    With a single arm the margin is the score itself; a negative single-arm
    margin clamps to 0 so the result stays in range.
    """
    values = sorted((float(s) for s in scores), reverse=True)
    if not values:
        raise ValueError("need at least one score")
    margin = values[0] - values[1] if len(values) > 1 else values[0]
    return max(0.0, 1.0 - math.exp(-margin))


def argmax_lowest(scores: dict[int, float]) -> int:
    """Index of the maximal score; exact ties go to the lowest index."""
    best_index = None
    best_score = -math.inf
    for index in sorted(scores):
        if scores[index] > best_score:
            best_score = scores[index]
            best_index = index
    return best_index


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma**t * r_t over a finite reward sequence."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    total = 0.0
    for r in reversed(list(rewards)):
        total = float(r) + gamma * total
    return total
