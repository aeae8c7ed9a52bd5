"""Online speaker diarization with bandit and Q-learning policies.

The engine labels fixed-hop audio segments with speaker identities, learning
only from sparse in-session feedback: no pretraining, no registration, and an
action set that grows as new speakers are confirmed.
"""

from .audio import AudioSegment, Segmenter, iter_segments, read_audio, read_wav, write_wav
from .bench import (
    FeedbackPolicy,
    LabeledStream,
    MetricsReport,
    compare_policies,
    generate_synthetic,
    load_corpus,
    run_benchmark,
)
from .errors import ConfigError, DiarlError, InputError, ProtocolError, StateError
from .features import (
    FeatureConfig,
    FeatureExtractor,
    FeatureVector,
    fit_pca,
    is_speech,
    mfcc_frame,
    segment_stats,
)
from .policies import (
    BerlinUcbPolicy,
    Codebook,
    Decision,
    LinUcbPolicy,
    QLearningPolicy,
    QTable,
    confidence_of,
    discounted_return,
)
from .registry import NEW_ACTION, SpeakerRegistry
from .rewards import (
    FeedbackEvent,
    RewardRecord,
    RewardWeights,
    confidence_reward,
    hybrid_reward,
    time_reward,
    user_reward,
)
from .rng import Rng
from .session import Session, SessionConfig

__version__ = "0.1.0"

__all__ = [
    "AudioSegment",
    "BerlinUcbPolicy",
    "Codebook",
    "ConfigError",
    "Decision",
    "DiarlError",
    "FeatureConfig",
    "FeatureExtractor",
    "FeatureVector",
    "FeedbackEvent",
    "FeedbackPolicy",
    "InputError",
    "LabeledStream",
    "LinUcbPolicy",
    "MetricsReport",
    "NEW_ACTION",
    "ProtocolError",
    "QLearningPolicy",
    "QTable",
    "RewardRecord",
    "RewardWeights",
    "Rng",
    "Segmenter",
    "Session",
    "SessionConfig",
    "SpeakerRegistry",
    "StateError",
    "compare_policies",
    "confidence_of",
    "confidence_reward",
    "discounted_return",
    "fit_pca",
    "generate_synthetic",
    "hybrid_reward",
    "is_speech",
    "iter_segments",
    "load_corpus",
    "mfcc_frame",
    "read_audio",
    "read_wav",
    "run_benchmark",
    "segment_stats",
    "time_reward",
    "user_reward",
    "write_wav",
]
