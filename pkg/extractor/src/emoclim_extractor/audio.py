"""Audio preprocessing: WAV loading, resampling, sliding-window chunking."""

from __future__ import annotations

import math

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly


def load_wav(path: str) -> tuple[np.ndarray, int]:
    """Load a WAV file as mono float32 in [-1, 1]."""
    sr, samples = wavfile.read(path)
    samples = np.asarray(samples)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.dtype == np.int16:
        samples = samples.astype(np.float32) / 32768.0
    elif samples.dtype == np.int32:
        samples = samples.astype(np.float32) / 2147483648.0
    elif samples.dtype == np.uint8:
        samples = (samples.astype(np.float32) - 128.0) / 128.0
    else:
        samples = samples.astype(np.float32)
    return samples, int(sr)


def resample(samples: np.ndarray, sr: int, target_sr: int) -> np.ndarray:
    if sr == target_sr:
        return samples.astype(np.float32)
    g = math.gcd(sr, target_sr)
    out = resample_poly(samples, target_sr // g, sr // g)
    return out.astype(np.float32)


def sliding_windows(samples: np.ndarray, sr: int, window_s: float,
                    overlap: float) -> list[np.ndarray]:
    """Cut the clip into windows of `window_s` seconds with the given
    overlap ratio: hop = window * (1 - overlap),
    count = floor((total - window)/hop) + 1. Clips shorter than one window
    yield a single zero-padded window.
    """
    window = int(round(window_s * sr))
    if window <= 0:
        raise ValueError(f"window of {window_s}s at {sr}Hz is empty")
    total = samples.shape[0]
    if total <= window:
        padded = np.zeros(window, dtype=np.float32)
        padded[:total] = samples
        return [padded]
    hop = window_s * (1.0 - overlap)
    hop_samples = int(round(hop * sr))
    if hop_samples <= 0:
        raise ValueError(f"overlap {overlap} leaves an empty hop")
    count = int(math.floor((total - window) / hop_samples + 1e-9)) + 1
    return [samples[i * hop_samples:i * hop_samples + window].astype(np.float32)
            for i in range(count)]
