"""Semi-supervised linear UCB for sparsely rewarded rounds (BerlinUCB style).

Selection is plain disjoint LinUCB. The extra machinery only runs on updates:
contexts from positively rewarded rounds accumulate into per-arm centroids,
and on rounds with no user feedback the nearest confirmed centroid acts as a
pseudo-label. A pseudo-label agreeing with the chosen arm reinforces it with
a small pseudo-reward; a disagreeing one only shrinks the chosen arm's
exploration bonus (scaled A update, b untouched).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..registry import NEW_ACTION, SpeakerRegistry
from .base import clamp_reward
from .linucb import LinUcbPolicy


@dataclass
class SelfSupervisionState:
    """Per-arm centroids of confirmed-positive contexts.

    The NEW arm never gets a centroid: it stands for everything unseen, so it
    is not a meaningful pseudo-label target.
    """

    centroids: dict[int, np.ndarray] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)

    def fold(self, arm: int, x: np.ndarray) -> None:
        """Running mean over confirmed contexts for one arm."""
        if arm not in self.centroids:
            self.centroids[arm] = np.array(x, dtype=np.float64)
            self.counts[arm] = 1
            return
        self.counts[arm] += 1
        c = self.centroids[arm]
        c += (x - c) / self.counts[arm]

    def nearest(self, x: np.ndarray) -> tuple[int, float] | None:
        """(arm, euclidean distance) of the closest confirmed centroid."""
        best = None
        for arm in sorted(self.centroids):
            dist = float(np.linalg.norm(x - self.centroids[arm]))
            if best is None or dist < best[1]:
                best = (arm, dist)
        return best

    def to_doc(self) -> dict:
        return {
            "centroids": {str(a): [float(v) for v in c]
                          for a, c in sorted(self.centroids.items())},
            "counts": {str(a): n for a, n in sorted(self.counts.items())},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SelfSupervisionState":
        state = cls()
        state.centroids = {int(a): np.array(c, dtype=np.float64)
                           for a, c in doc["centroids"].items()}
        state.counts = {int(a): int(n) for a, n in doc["counts"].items()}
        return state


class BerlinUcbPolicy(LinUcbPolicy):
    kind = "berlinucb"

    def __init__(self, alpha: float = 1.0, ridge: float = 1.0,
                 pseudo_weight: float = 0.8, pseudo_distance: float = 4.0):
        super().__init__(alpha=alpha, ridge=ridge)
        self.pseudo_weight = pseudo_weight
        self.pseudo_distance = pseudo_distance
        self.ss = SelfSupervisionState()

    def update_rewarded(self, arm: int, x: np.ndarray, r: float,
                        registry: SpeakerRegistry | None = None) -> None:
        """Apply a real reward; positive rewards also confirm the context."""
        r = clamp_reward(r)
        self.update(arm, x, r, registry)
        if r > 0 and arm != NEW_ACTION:
            self.ss.fold(arm, np.asarray(x, dtype=np.float64))

    def update_unrewarded(self, chosen: int, x: np.ndarray) -> None:
        """Pseudo-labeled update for a round that got no user feedback."""
        if self.pseudo_weight == 0.0:
            return
        x = self._check_dim(x)
        nearest = self.ss.nearest(x)
        if nearest is None:
            return
        arm_hat, dist = nearest
        if arm_hat == chosen:
            if dist <= self.pseudo_distance:
                self.update(chosen, x, self.pseudo_weight)
        else:
            state = self._state(chosen)
            state.A += self.pseudo_weight * np.outer(x, x)
            state.n_updates += 1

    def to_doc(self) -> dict:
        doc = super().to_doc()
        doc["kind"] = self.kind
        doc["pseudo_weight"] = self.pseudo_weight
        doc["pseudo_distance"] = self.pseudo_distance
        doc["self_supervision"] = self.ss.to_doc()
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "BerlinUcbPolicy":
        policy = cls(alpha=float(doc["alpha"]),
                     pseudo_weight=float(doc["pseudo_weight"]),
                     pseudo_distance=float(doc["pseudo_distance"]))
        policy._load_common(doc)
        policy.ss = SelfSupervisionState.from_doc(doc["self_supervision"])
        return policy
