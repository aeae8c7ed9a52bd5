import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from diarl.rng import Rng

SR = 16000

# Distinct harmonic textures so MFCC statistics separate the voices.
VOICE_F0 = [118.0, 217.0, 331.0, 409.0]


def voice_samples(speaker: int, n_samples: int, rng: Rng, level: float = 0.25) -> np.ndarray:
    """Deterministic stand-in for one speaker: harmonic stack plus a little noise."""
    f0 = VOICE_F0[speaker % len(VOICE_F0)]
    t = np.arange(n_samples) / SR
    phase = rng.random() * 2 * np.pi
    wave = np.zeros(n_samples)
    for harmonic, amp in ((1, 1.0), (2, 0.6), (3, 0.35), (5, 0.2)):
        wave += amp * np.sin(2 * np.pi * f0 * harmonic * t + phase * harmonic)
    wave += 0.08 * np.array([rng.gauss() for _ in range(n_samples)])
    wave *= level / np.max(np.abs(wave))
    return (wave * 32767.0).astype(np.int16)


def build_audio(plan, seed: int = 0) -> np.ndarray:
    """Concatenate (speaker_or_None, seconds) stretches; None means silence."""
    rng = Rng(seed)
    parts = []
    for speaker, seconds in plan:
        n = int(round(seconds * SR))
        if speaker is None:
            parts.append(np.zeros(n, dtype=np.int16))
        else:
            parts.append(voice_samples(speaker, n, rng))
    return np.concatenate(parts)


def two_speaker_plan(total_s: float, turn_s: float = 3.0):
    plan = []
    speaker = 0
    remaining = total_s
    while remaining > 0:
        chunk = min(turn_s, remaining)
        plan.append((speaker, chunk))
        speaker = 1 - speaker
        remaining -= chunk
    return plan
