"""Disjoint linear UCB over the extendable action set.

Every arm keeps its own ridge statistics (A = lambda*I + sum x x^T,
b = sum r x), so arms created mid-session start fresh without disturbing the
others. The NEW arm participates in scoring like any other arm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError, StateError
from ..registry import SpeakerRegistry
from .base import Decision, argmax_lowest, clamp_reward, confidence_of


@dataclass
class LinearArmState:
    A: np.ndarray
    b: np.ndarray
    n_updates: int = 0

    @classmethod
    def fresh(cls, d: int, ridge: float) -> "LinearArmState":
        return cls(A=np.eye(d) * ridge, b=np.zeros(d))

    def to_doc(self) -> dict:
        return {
            "A": [[float(v) for v in row] for row in self.A],
            "b": [float(v) for v in self.b],
            "n_updates": self.n_updates,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "LinearArmState":
        return cls(A=np.array(doc["A"], dtype=np.float64),
                   b=np.array(doc["b"], dtype=np.float64),
                   n_updates=int(doc["n_updates"]))


class LinUcbPolicy:
    """score_a = theta_a . x + alpha * sqrt(x^T A_a^-1 x), ties to lowest index."""

    kind = "linucb"

    def __init__(self, alpha: float = 1.0, ridge: float = 1.0):
        if alpha <= 0:
            raise InputError("alpha must be positive")
        self.alpha = alpha
        self.ridge = ridge
        self.d: int | None = None
        self.arms: dict[int, LinearArmState] = {}

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise InputError("context must be a vector")
        if self.d is None:
            self.d = len(x)
        elif len(x) != self.d:
            raise InputError(f"context dimension {len(x)} != policy dimension {self.d}")
        return x

    def _state(self, arm: int) -> LinearArmState:
        """Materialize the arm's statistics (fresh ridge prior on first touch)."""
        if arm not in self.arms:
            self.arms[arm] = LinearArmState.fresh(self.d, self.ridge)
        return self.arms[arm]

    def _score(self, arm: int, x: np.ndarray) -> float:
        state = self.arms.get(arm)
        if state is None:
            # Fresh arm: A = ridge*I, b = 0, scored without materializing state.
            bonus_sq = float(x @ x) / self.ridge
            estimate = 0.0
        else:
            try:
                theta = np.linalg.solve(state.A, state.b)
                a_inv_x = np.linalg.solve(state.A, x)
            except np.linalg.LinAlgError as exc:
                raise StateError(f"arm {arm} statistics are singular") from exc
            estimate = float(theta @ x)
            bonus_sq = float(x @ a_inv_x)
        if bonus_sq < 0:
            raise StateError(f"arm {arm} statistics are not positive definite")
        return estimate + self.alpha * float(np.sqrt(bonus_sq))

    def select(self, x: np.ndarray, registry: SpeakerRegistry, segment_id: int) -> Decision:
        x = self._check_dim(x)
        scores = {arm: self._score(arm, x) for arm in registry.actions()}
        chosen = argmax_lowest(scores)
        return Decision(segment_id=segment_id, chosen=chosen,
                        confidence=confidence_of(scores.values()), scores=scores)

    def update(self, arm: int, x: np.ndarray, r: float,
               registry: SpeakerRegistry | None = None) -> None:
        if registry is not None and arm not in registry:
            raise StateError(f"unknown arm {arm}")
        x = self._check_dim(x)
        r = clamp_reward(r)
        state = self._state(arm)
        state.A += np.outer(x, x)
        state.b += r * x
        state.n_updates += 1

    def add_arm(self, arm: int) -> None:
        if self.d is not None and arm not in self.arms:
            self.arms[arm] = LinearArmState.fresh(self.d, self.ridge)

    def to_doc(self) -> dict:
        return {
            "version": 1,
            "kind": self.kind,
            "alpha": self.alpha,
            "ridge": self.ridge,
            "d": self.d,
            "arms": {str(a): s.to_doc() for a, s in sorted(self.arms.items())},
        }

    def _load_common(self, doc: dict) -> None:
        self.alpha = float(doc["alpha"])
        self.ridge = float(doc["ridge"])
        self.d = doc["d"]
        self.arms = {int(a): LinearArmState.from_doc(s) for a, s in doc["arms"].items()}

    @classmethod
    def from_doc(cls, doc: dict) -> "LinUcbPolicy":
        policy = cls(alpha=float(doc["alpha"]))
        policy._load_common(doc)
        return policy
