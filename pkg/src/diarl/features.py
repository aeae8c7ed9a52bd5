"""Per-segment acoustic context vectors from a classical MFCC front end.

Each decision segment is summarized as the concatenation of the per-coefficient
mean and standard deviation of its frame-level MFCCs, optionally standardized
with running session statistics and projected by a pre-fitted PCA. The whole
pipeline is deterministic: identical samples, config, and accumulated state
produce bit-identical vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .audio import INT16_FULL_SCALE, AudioSegment
from .errors import ConfigError, InputError, StateError

# Before this many segments the CMVN variance is floored at 1.0 so early
# estimates cannot blow the scale up; afterwards only a tiny guard remains.
CMVN_WARMUP_SEGMENTS = 10
CMVN_VARIANCE_GUARD = 1e-12

# Power floor for voice-activity energies, ~ -120 dBFS, keeps silence finite.
VAD_POWER_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureConfig:
    """Front-end parameters; defaults are standard ASR values at 16 kHz."""

    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    preemphasis: float = 0.97
    fft_size: int = 512
    n_mels: int = 26
    n_ceps: int = 13
    mel_fmin_hz: float = 0.0
    mel_fmax_hz: float = 8000.0
    log_floor: float = 1e-10
    segment_len_s: float = 1.0
    segment_hop_s: float = 0.5
    vad_energy_threshold_db: float = -55.0
    pca_dim: int | None = None
    cmvn_enabled: bool = True

    def frame_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_len_ms * sample_rate / 1000.0))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_ms * sample_rate / 1000.0))

    def validate(self, sample_rate: int) -> None:
        if self.n_ceps > self.n_mels:
            raise ConfigError("n_ceps must not exceed n_mels")
        if self.fft_size < self.frame_samples(sample_rate):
            raise ConfigError("fft_size must cover one analysis frame")
        if self.mel_fmax_hz > sample_rate / 2:
            raise ConfigError("mel_fmax_hz must not exceed the Nyquist frequency")
        if not 0 <= self.preemphasis < 1:
            raise ConfigError("preemphasis must be in [0, 1)")


@dataclass(frozen=True)
class FeatureVector:
    """The context observed before each labeling decision."""

    values: np.ndarray
    segment_id: int

    @property
    def dim(self) -> int:
        return len(self.values)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(n_mels: int, fft_size: int, sample_rate: int,
                   fmin_hz: float, fmax_hz: float) -> np.ndarray:
    """Triangular filters, linear in Hz between mel-spaced edge frequencies.

    Returns an (n_mels, fft_size // 2 + 1) weight matrix. Adjacent triangles
    overlap so interior bins receive total weight exactly 1.
    """
    n_bins = fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / fft_size
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        left, center, right = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def hamming_window(n: int) -> np.ndarray:
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def preemphasize(frame: np.ndarray, coeff: float) -> np.ndarray:
    out = np.empty_like(frame, dtype=np.float64)
    out[0] = frame[0]
    out[1:] = frame[1:] - coeff * frame[:-1]
    return out


def mfcc_frame(frame: np.ndarray, cfg: FeatureConfig,
               sample_rate: int = 16000) -> np.ndarray:
    """MFCCs of one raw analysis frame.

    Pre-emphasis and the Hamming window are applied here; the power spectrum
    is pooled by the mel filterbank, floored at cfg.log_floor, log-compressed
    (natural log) and transformed by an orthonormal DCT-II, keeping the first
    cfg.n_ceps coefficients.
    """
    frame = np.asarray(frame, dtype=np.float64)
    n = cfg.frame_samples(sample_rate)
    if frame.ndim != 1 or len(frame) != n:
        raise ConfigError(f"frame must have length {n}, got shape {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise InputError("frame contains non-finite samples")
    cfg.validate(sample_rate)

    windowed = preemphasize(frame, cfg.preemphasis) * hamming_window(n)
    spectrum = np.fft.rfft(windowed, n=cfg.fft_size)
    power = spectrum.real**2 + spectrum.imag**2
    fb = mel_filterbank(cfg.n_mels, cfg.fft_size, sample_rate,
                        cfg.mel_fmin_hz, cfg.mel_fmax_hz)
    energies = np.maximum(fb @ power, cfg.log_floor)
    cepstrum = scipy.fft.dct(np.log(energies), type=2, norm="ortho")
    return cepstrum[: cfg.n_ceps]


def frame_iter(samples: np.ndarray, cfg: FeatureConfig, sample_rate: int):
    """Complete analysis frames of a segment (no padding of the tail)."""
    n = cfg.frame_samples(sample_rate)
    hop = cfg.hop_samples(sample_rate)
    for start in range(0, len(samples) - n + 1, hop):
        yield samples[start: start + n]


def segment_stats(segment: AudioSegment, cfg: FeatureConfig) -> np.ndarray:
    """Raw per-segment summary: per-coefficient MFCC mean then std (ddof=0)."""
    samples = segment.samples.astype(np.float64) / INT16_FULL_SCALE
    frames = [mfcc_frame(f, cfg, segment.sample_rate)
              for f in frame_iter(samples, cfg, segment.sample_rate)]
    if not frames:
        raise InputError("segment shorter than one analysis frame")
    coeffs = np.stack(frames)
    # Variance on first-frame-shifted data: exact 0 for identical frames and
    # free of cancellation when the mean dwarfs the spread.
    shifted = coeffs - coeffs[0]
    variance = np.maximum((shifted**2).mean(axis=0) - shifted.mean(axis=0) ** 2, 0.0)
    return np.concatenate([coeffs.mean(axis=0), np.sqrt(variance)])


def is_speech(segment: AudioSegment, cfg: FeatureConfig) -> bool:
    """Energy gate: mean frame log-energy above the threshold (dBFS)."""
    samples = segment.samples.astype(np.float64) / INT16_FULL_SCALE
    frames = list(frame_iter(samples, cfg, segment.sample_rate))
    if not frames:
        frames = [samples]
    powers = np.array([np.mean(f**2) for f in frames])
    energies_db = 10.0 * np.log10(np.maximum(powers, VAD_POWER_FLOOR))
    return float(energies_db.mean()) > cfg.vad_energy_threshold_db


def fit_pca(history, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-k principal axes of a feature history.

    Returns (components, mean) where components is (k, d) with orthonormal
    rows, each flipped so its largest-magnitude entry is positive. Rows are
    ordered by decreasing eigenvalue of the sample covariance.
    """
    data = np.stack([fv.values if isinstance(fv, FeatureVector) else np.asarray(fv)
                     for fv in history]).astype(np.float64)
    n, d = data.shape
    if k < 1 or k > d:
        raise ConfigError(f"k must be in [1, {d}], got {k}")
    if n < k:
        raise StateError(f"need at least {k} observations to fit {k} components, have {n}")
    mean = data.mean(axis=0)
    centered = data - mean
    denom = max(n - 1, 1)
    cov = centered.T @ centered / denom
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return components, mean


@dataclass
class CmvnState:
    """Running per-dimension mean/variance (Welford accumulation)."""

    count: int = 0
    mean: np.ndarray | None = None
    m2: np.ndarray | None = None

    def update(self, x: np.ndarray) -> None:
        if self.mean is None:
            self.mean = np.zeros_like(x)
            self.m2 = np.zeros_like(x)
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def standardize(self, x: np.ndarray) -> np.ndarray:
        variance = self.m2 / self.count if self.count > 0 else np.ones_like(x)
        floor = 1.0 if self.count < CMVN_WARMUP_SEGMENTS else CMVN_VARIANCE_GUARD
        return (x - self.mean) / np.sqrt(np.maximum(variance, floor))

    def to_doc(self) -> dict:
        return {
            "count": self.count,
            "mean": None if self.mean is None else [float(v) for v in self.mean],
            "m2": None if self.m2 is None else [float(v) for v in self.m2],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CmvnState":
        state = cls(count=int(doc["count"]))
        if doc["mean"] is not None:
            state.mean = np.array(doc["mean"], dtype=np.float64)
            state.m2 = np.array(doc["m2"], dtype=np.float64)
        return state


class FeatureExtractor:
    """Stateful segment-to-context pipeline owned by one session.

    Single-writer: the session loop is the only caller of extract(), and the
    CMVN statistics advance exactly once per extracted segment.
    """

    def __init__(self, cfg: FeatureConfig, sample_rate: int = 16000):
        cfg.validate(sample_rate)
        self.cfg = cfg
        self.sample_rate = sample_rate
        self.cmvn = CmvnState()
        self.pca_components: np.ndarray | None = None
        self.pca_mean: np.ndarray | None = None

    def set_projection(self, components: np.ndarray, mean: np.ndarray) -> None:
        if self.cfg.pca_dim is None:
            raise StateError("pca_dim is not set in the feature config")
        if components.shape[0] != self.cfg.pca_dim:
            raise ConfigError("projection rank does not match pca_dim")
        self.pca_components = np.asarray(components, dtype=np.float64)
        self.pca_mean = np.asarray(mean, dtype=np.float64)

    @property
    def dim(self) -> int:
        if self.cfg.pca_dim is not None and self.pca_components is not None:
            return self.cfg.pca_dim
        return 2 * self.cfg.n_ceps

    def extract(self, segment: AudioSegment) -> FeatureVector:
        x = segment_stats(segment, self.cfg)
        if self.cfg.cmvn_enabled:
            self.cmvn.update(x)
            x = self.cmvn.standardize(x)
        if self.cfg.pca_dim is not None and self.pca_components is not None:
            x = self.pca_components @ (x - self.pca_mean)
        if not np.all(np.isfinite(x)):
            raise StateError("feature vector contains non-finite entries")
        return FeatureVector(values=x, segment_id=segment.segment_id)

    def to_doc(self) -> dict:
        return {
            "cmvn": self.cmvn.to_doc(),
            "pca_components": (None if self.pca_components is None
                               else [[float(v) for v in row] for row in self.pca_components]),
            "pca_mean": (None if self.pca_mean is None
                         else [float(v) for v in self.pca_mean]),
        }

    def load_doc(self, doc: dict) -> None:
        self.cmvn = CmvnState.from_doc(doc["cmvn"])
        if doc["pca_components"] is not None:
            self.pca_components = np.array(doc["pca_components"], dtype=np.float64)
            self.pca_mean = np.array(doc["pca_mean"], dtype=np.float64)


def format_feature_row(fv: FeatureVector, t0: float, t1: float) -> str:
    """Debug CSV row: segment_id,t0,t1,v0,... with 9 significant digits."""
    values = ",".join(f"{v:.9g}" for v in fv.values)
    return f"{fv.segment_id},{t0:.9g},{t1:.9g},{values}"
