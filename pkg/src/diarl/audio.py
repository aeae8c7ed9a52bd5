"""Audio ingest: 16 kHz mono signed 16-bit PCM, raw or WAV, cut into segments.

The only accepted input format is 16 kHz / mono / 16-bit little-endian PCM,
either headerless or inside a WAV container; anything else is rejected rather
than resampled.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError

SAMPLE_RATE = 16000
INT16_FULL_SCALE = 32768.0


@dataclass(frozen=True)
class AudioSegment:
    """One fixed-length window of the input stream.

    samples are int16; t0/t1 are seconds from session start; segment_id
    increases by exactly 1 per emitted segment.
    """

    samples: np.ndarray
    sample_rate: int
    t0: float
    t1: float
    segment_id: int


def read_wav(path: str | Path) -> np.ndarray:
    """Read a WAV file, enforcing 16 kHz mono 16-bit PCM."""
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise InputError(f"expected mono audio, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise InputError(f"expected 16-bit samples, got {8 * wf.getsampwidth()}-bit")
        if wf.getframerate() != SAMPLE_RATE:
            raise InputError(f"expected {SAMPLE_RATE} Hz, got {wf.getframerate()} Hz")
        if wf.getcomptype() != "NONE":
            raise InputError(f"expected uncompressed PCM, got {wf.getcomptype()}")
        raw = wf.readframes(wf.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.int16)


def write_wav(path: str | Path, samples: np.ndarray) -> None:
    """Write int16 samples as a 16 kHz mono WAV file."""
    samples = np.asarray(samples, dtype="<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(SAMPLE_RATE)
        wf.writeframes(samples.tobytes())


def read_pcm(path: str | Path) -> np.ndarray:
    """Read a headerless stream of 16-bit little-endian samples."""
    data = Path(path).read_bytes()
    if len(data) % 2:
        raise InputError("raw PCM byte count must be even (16-bit samples)")
    return np.frombuffer(data, dtype="<i2").astype(np.int16)


def read_audio(path: str | Path) -> np.ndarray:
    """Read either WAV or raw PCM based on the RIFF magic."""
    p = Path(path)
    with open(p, "rb") as fh:
        magic = fh.read(4)
    if magic == b"RIFF":
        return read_wav(p)
    return read_pcm(p)


class Segmenter:
    """Slice a pushed sample stream into overlapping fixed-length segments."""

    def __init__(self, segment_len_s: float, segment_hop_s: float,
                 sample_rate: int = SAMPLE_RATE, first_segment_id: int = 0):
        self.sample_rate = sample_rate
        self.seg_len = int(round(segment_len_s * sample_rate))
        self.hop = int(round(segment_hop_s * sample_rate))
        if self.seg_len <= 0 or self.hop <= 0:
            raise InputError("segment length and hop must be positive")
        self._buffer = np.zeros(0, dtype=np.int16)
        self._next_id = first_segment_id

    def push(self, samples: np.ndarray) -> list[AudioSegment]:
        """Append samples; return every segment that became complete."""
        samples = np.asarray(samples, dtype=np.int16)
        self._buffer = np.concatenate([self._buffer, samples])
        out = []
        while len(self._buffer) >= self.seg_len:
            t0 = self._next_id * self.hop / self.sample_rate
            out.append(AudioSegment(
                samples=self._buffer[: self.seg_len].copy(),
                sample_rate=self.sample_rate,
                t0=t0,
                t1=t0 + self.seg_len / self.sample_rate,
                segment_id=self._next_id,
            ))
            self._buffer = self._buffer[self.hop:]
            self._next_id += 1
        return out

    @property
    def next_segment_id(self) -> int:
        return self._next_id


def iter_segments(samples: np.ndarray, segment_len_s: float, segment_hop_s: float,
                  sample_rate: int = SAMPLE_RATE, first_segment_id: int = 0):
    """Segment a complete in-memory recording."""
    seg = Segmenter(segment_len_s, segment_hop_s, sample_rate, first_segment_id)
    yield from seg.push(samples)
