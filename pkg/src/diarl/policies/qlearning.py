"""Tabular Q-learning over a learned vector-quantization state space.

Contexts are discretized by an online k-means codebook (bounded size, new
centroids spawned when nothing is near); the Q-table is a sparse map with
absent entries reading 0. Exploration is epsilon-greedy on the session's
generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..registry import SpeakerRegistry
from ..rng import Rng
from .base import Decision, argmax_lowest, clamp_reward, confidence_of


class Codebook:
    """Online k-means quantizer: nearest centroid, or a new one if all far."""

    def __init__(self, distance_threshold: float = 2.0, max_size: int = 64):
        self.distance_threshold = distance_threshold
        self.max_size = max_size
        self.centroids: list[np.ndarray] = []
        self.counts: list[int] = []

    def __len__(self) -> int:
        return len(self.centroids)

    def quantize(self, x: np.ndarray) -> int:
        """Return the state index for x, learning as a side effect.

        A matched centroid moves toward x by 1/count after its count is
        bumped; an unmatched x becomes a new centroid while capacity lasts.
        """
        x = np.asarray(x, dtype=np.float64)
        if not self.centroids:
            self.centroids.append(x.copy())
            self.counts.append(1)
            return 0
        dists = [float(np.linalg.norm(x - c)) for c in self.centroids]
        best = int(np.argmin(dists))
        if dists[best] <= self.distance_threshold or len(self.centroids) >= self.max_size:
            self.counts[best] += 1
            self.centroids[best] += (x - self.centroids[best]) / self.counts[best]
            return best
        self.centroids.append(x.copy())
        self.counts.append(1)
        return len(self.centroids) - 1

    def to_doc(self) -> dict:
        return {
            "distance_threshold": self.distance_threshold,
            "max_size": self.max_size,
            "centroids": [[float(v) for v in c] for c in self.centroids],
            "counts": list(self.counts),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Codebook":
        cb = cls(distance_threshold=float(doc["distance_threshold"]),
                 max_size=int(doc["max_size"]))
        cb.centroids = [np.array(c, dtype=np.float64) for c in doc["centroids"]]
        cb.counts = [int(n) for n in doc["counts"]]
        return cb


@dataclass
class QTable:
    """Sparse state-action values; absent entries read 0."""

    eta: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    q: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must be in [0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError("eta must be in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon must be in [0, 1]")

    def value(self, s: int, a: int) -> float:
        return self.q.get((s, a), 0.0)

    def row(self, s: int, actions) -> dict[int, float]:
        return {a: self.value(s, a) for a in actions}

    def update(self, s: int, a: int, r: float, s_next: int | None, actions) -> None:
        """q(s,a) += eta * (r + gamma * max_a' q(s_next, a') - q(s,a)).

        A missing successor state (end of stream) drops the bootstrap term.
        """
        r = clamp_reward(r)
        best_next = max((self.value(s_next, a2) for a2 in actions), default=0.0) \
            if s_next is not None else 0.0
        current = self.value(s, a)
        self.q[(s, a)] = current + self.eta * (r + self.gamma * best_next - current)

    def to_doc(self) -> dict:
        return {
            "eta": self.eta,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "q": [[s, a, float(v)] for (s, a), v in sorted(self.q.items())],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "QTable":
        table = cls(eta=float(doc["eta"]), gamma=float(doc["gamma"]),
                    epsilon=float(doc["epsilon"]))
        table.q = {(int(s), int(a)): float(v) for s, a, v in doc["q"]}
        return table


class QLearningPolicy:
    kind = "qlearning"

    def __init__(self, eta: float = 0.1, gamma: float = 0.9, epsilon: float = 0.1,
                 codebook_threshold: float = 2.0, codebook_size: int = 64):
        self.table = QTable(eta=eta, gamma=gamma, epsilon=epsilon)
        self.codebook = Codebook(distance_threshold=codebook_threshold,
                                 max_size=codebook_size)

    def quantize(self, x: np.ndarray) -> int:
        return self.codebook.quantize(x)

    def select(self, s: int, registry: SpeakerRegistry, segment_id: int,
               rng: Rng) -> Decision:
        """Epsilon-greedy over the available actions; greedy ties to lowest index."""
        actions = registry.actions()
        scores = self.table.row(s, actions)
        if rng.random() < self.table.epsilon:
            chosen = actions[rng.below(len(actions))]
        else:
            chosen = argmax_lowest(scores)
        return Decision(segment_id=segment_id, chosen=chosen,
                        confidence=confidence_of(scores.values()), scores=scores)

    def update(self, s: int, a: int, r: float, s_next: int | None,
               registry: SpeakerRegistry) -> None:
        self.table.update(s, a, r, s_next, registry.actions())

    def add_arm(self, arm: int) -> None:
        pass  # absent Q entries already read 0 for a fresh arm

    def to_doc(self) -> dict:
        return {
            "version": 1,
            "kind": self.kind,
            "table": self.table.to_doc(),
            "codebook": self.codebook.to_doc(),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "QLearningPolicy":
        policy = cls()
        policy.table = QTable.from_doc(doc["table"])
        policy.codebook = Codebook.from_doc(doc["codebook"])
        return policy
