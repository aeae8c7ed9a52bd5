#!/usr/bin/env python3
"""From raw samples to per-segment context vectors.

Walks the acoustic front end one stage at a time: framing, MFCCs, the energy
gate, running standardization, and an optional PCA projection fitted on the
session's own history.
"""

import numpy as np

from diarl import FeatureConfig, FeatureExtractor, fit_pca, is_speech, mfcc_frame
from diarl.audio import iter_segments
from diarl.rng import Rng

SR = 16000
rng = Rng(7)

# --- 1. a tiny synthetic recording: tone-like voice, then silence -------------
t = np.arange(2 * SR) / SR
voice = 0.3 * np.sin(2 * np.pi * 180 * t) + 0.1 * np.sin(2 * np.pi * 360 * t)
voice += 0.02 * np.array([rng.gauss() for _ in range(len(t))])
silence = np.zeros(SR)
samples = (np.concatenate([voice, silence]) * 32767 * 0.8).astype(np.int16)
print(f"recording: {len(samples) / SR:.1f}s, {len(samples)} samples at {SR} Hz")

# --- 2. one analysis frame -> 13 cepstral coefficients ------------------------
cfg = FeatureConfig()
frame = samples[:400].astype(np.float64) / 32768.0
coeffs = mfcc_frame(frame, cfg)
print(f"\nfirst frame MFCCs ({len(coeffs)} coefficients):")
print("  " + " ".join(f"{c:7.2f}" for c in coeffs))

# --- 3. segments, the energy gate, and running standardization ----------------
extractor = FeatureExtractor(cfg)
print(f"\nsegments ({cfg.segment_len_s}s window, {cfg.segment_hop_s}s hop):")
vectors = []
for segment in iter_segments(samples, cfg.segment_len_s, cfg.segment_hop_s, SR):
    speech = is_speech(segment, cfg)
    marker = "speech " if speech else "silence"
    line = f"  segment {segment.segment_id} [{segment.t0:.1f}s..{segment.t1:.1f}s] {marker}"
    if speech:
        fv = extractor.extract(segment)
        vectors.append(fv)
        line += f" -> {fv.dim}-dim vector, |x| = {np.linalg.norm(fv.values):.3f}"
    print(line)
print("note: the first vector is exactly zero; running stats start at that segment")

# --- 4. PCA on accumulated history --------------------------------------------
components, mean = fit_pca(vectors, k=2)
print(f"\nPCA fitted on {len(vectors)} vectors: components {components.shape}")
print(f"rows orthonormal: {np.allclose(components @ components.T, np.eye(2))}")
projected = components @ (vectors[-1].values - mean)
print(f"last segment projected to 2-D: [{projected[0]:.3f}, {projected[1]:.3f}]")
print("\na projection fitted offline this way can be installed on a fresh")
print("session via FeatureExtractor.set_projection when pca_dim is configured")
