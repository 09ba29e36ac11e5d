"""Encoder registry.

Two weight-free built-in encoders (image histogram statistics, audio
mel-spectrogram statistics) always work and carry the smoke tests; the
`clip` and `clap` wrappers use pretrained towers through transformers and
are available when their weights are (they cannot be downloaded from an
offline build environment).

Every encoder is frozen and deterministic; the feature dimension is
whatever the encoder emits and is recorded in the output file header.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import stft

from .errors import EncoderLoadError


class HistogramImageEncoder:
    """Per-channel histograms and moments of the normalized crop."""

    name = "histogram"
    modality = "image"
    n_bins = 16

    @property
    def feature_dim(self) -> int:
        return 3 * self.n_bins + 6

    def encode(self, crops: list[np.ndarray]) -> np.ndarray:
        out = np.empty((len(crops), self.feature_dim), dtype=np.float32)
        for i, crop in enumerate(crops):
            parts = []
            for ch in range(3):
                hist, _ = np.histogram(crop[ch], bins=self.n_bins, range=(-3.0, 3.0))
                parts.append(hist / crop[ch].size)
            for ch in range(3):
                parts.append([crop[ch].mean(), crop[ch].std()])
            out[i] = np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])
        return out


def _mel_filterbank(n_mels: int, n_fft: int, sr: int) -> np.ndarray:
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(sr / 2.0), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bins = np.floor((n_fft + 1) * hz_points / sr).astype(int)
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(1, n_mels + 1):
        left, center, right = bins[m - 1], bins[m], bins[m + 1]
        for k in range(left, center):
            if center > left:
                fb[m - 1, k] = (k - left) / (center - left)
        for k in range(center, right):
            if right > center:
                fb[m - 1, k] = (right - k) / (right - center)
    return fb


class MelStatsAudioEncoder:
    """Log-mel band statistics plus coarse spectral/temporal summaries."""

    name = "melstats"
    modality = "audio"
    target_sample_rate = 16_000
    expected_window_s: float | None = None  # any window length
    n_mels = 32
    n_fft = 1024

    def __init__(self):
        self._fb = _mel_filterbank(self.n_mels, self.n_fft, self.target_sample_rate)

    @property
    def feature_dim(self) -> int:
        return 2 * self.n_mels + 4

    def encode(self, windows: list[np.ndarray]) -> np.ndarray:
        out = np.empty((len(windows), self.feature_dim), dtype=np.float32)
        for i, w in enumerate(windows):
            _, _, spec = stft(w, fs=self.target_sample_rate, nperseg=self.n_fft,
                              noverlap=self.n_fft // 2, padded=True)
            power = np.abs(spec) ** 2
            mel = np.log10(self._fb @ power + 1e-10)
            rms = float(np.sqrt(np.mean(w ** 2)))
            zcr = float(np.mean(np.abs(np.diff(np.signbit(w).astype(np.int8)))))
            freqs = np.linspace(0, self.target_sample_rate / 2, power.shape[0])
            frame_energy = power.sum(axis=0) + 1e-10
            centroid = float(np.mean((freqs[:, None] * power).sum(axis=0) / frame_energy))
            flatness = float(np.mean(
                np.exp(np.mean(np.log(power + 1e-10), axis=0)) / (power.mean(axis=0) + 1e-10)))
            out[i] = np.concatenate([
                mel.mean(axis=1), mel.std(axis=1),
                [rms, zcr, centroid / (self.target_sample_rate / 2), flatness],
            ])
        return out


class ClipImageEncoder:
    """Frozen CLIP vision tower (via transformers)."""

    name = "clip"
    modality = "image"

    def __init__(self, model_name: str = "openai/clip-vit-base-patch32"):
        try:
            import torch
            from transformers import CLIPVisionModel
        except ImportError as exc:
            raise EncoderLoadError(f"clip encoder needs torch+transformers: {exc}") from exc
        try:
            self._model = CLIPVisionModel.from_pretrained(model_name)
        except Exception as exc:
            raise EncoderLoadError(f"could not load CLIP weights '{model_name}': {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.feature_dim = int(self._model.config.hidden_size)

    def encode(self, crops: list[np.ndarray]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            batch = torch.from_numpy(np.stack(crops))
            out = self._model(pixel_values=batch).pooler_output
        return out.numpy().astype(np.float32)


class ClapAudioEncoder:
    """Frozen CLAP audio tower (via transformers); expects 10 s at 48 kHz."""

    name = "clap"
    modality = "audio"
    target_sample_rate = 48_000
    expected_window_s = 10.0

    def __init__(self, model_name: str = "laion/clap-htsat-unfused"):
        try:
            import torch
            from transformers import ClapAudioModelWithProjection, ClapProcessor
        except ImportError as exc:
            raise EncoderLoadError(f"clap encoder needs torch+transformers: {exc}") from exc
        try:
            self._model = ClapAudioModelWithProjection.from_pretrained(model_name)
            self._processor = ClapProcessor.from_pretrained(model_name)
        except Exception as exc:
            raise EncoderLoadError(f"could not load CLAP weights '{model_name}': {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.feature_dim = int(self._model.config.projection_dim)

    def encode(self, windows: list[np.ndarray]) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(audios=[w.astype(np.float32) for w in windows],
                                 sampling_rate=self.target_sample_rate,
                                 return_tensors="pt")
        with torch.no_grad():
            out = self._model(**inputs).audio_embeds
        return out.numpy().astype(np.float32)


_REGISTRY = {
    "histogram": HistogramImageEncoder,
    "melstats": MelStatsAudioEncoder,
    "clip": ClipImageEncoder,
    "clap": ClapAudioEncoder,
}


def available_encoders() -> list[str]:
    return sorted(_REGISTRY)


def get_encoder(name: str):
    if name not in _REGISTRY:
        raise EncoderLoadError(
            f"unknown encoder '{name}'; available: {', '.join(available_encoders())}")
    return _REGISTRY[name]()
