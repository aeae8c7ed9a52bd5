from .base import Decision, confidence_of, discounted_return
from .linucb import LinearArmState, LinUcbPolicy
from .berlinucb import BerlinUcbPolicy, SelfSupervisionState
from .qlearning import Codebook, QLearningPolicy, QTable

__all__ = [
    "Decision",
    "confidence_of",
    "discounted_return",
    "LinearArmState",
    "LinUcbPolicy",
    "BerlinUcbPolicy",
    "SelfSupervisionState",
    "Codebook",
    "QLearningPolicy",
    "QTable",
]
