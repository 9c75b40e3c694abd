"""
Waveform value type and 16-bit PCM discretization.

Amplitudes live in the normalized float domain [-1, 1]; the PCM grid is
int16 / 32768.
"""
from typing import Sequence, Union

import numpy as np
import torch

PCM16_SCALE = 32768.0
PCM16_MIN = -32768
PCM16_MAX = 32767


class Waveform:
    """Immutable mono signal: normalized samples plus sample rate"""

    __slots__ = ("_samples", "_sample_rate")

    def __init__(self, samples: Union[Sequence[float], np.ndarray], sample_rate: int):
        arr = np.array(samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"waveform samples must be 1-D, got shape {arr.shape}")
        if arr.size < 1:
            raise ValueError("waveform must contain at least one sample")
        if int(sample_rate) != sample_rate or sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {sample_rate}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("waveform samples must be finite")
        if np.any(np.abs(arr) > 1.0):
            raise ValueError(f"waveform samples must lie in [-1, 1], max |s| = {np.max(np.abs(arr))}")
        arr.setflags(write=False)
        self._samples = arr
        self._sample_rate = int(sample_rate)

    @property
    def samples(self) -> np.ndarray:
        return self._samples

    @property
    def sample_rate(self) -> int:
        return self._sample_rate

    @property
    def duration_s(self) -> float:
        return len(self._samples) / self._sample_rate

    def __len__(self) -> int:
        return len(self._samples)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return self._sample_rate == other._sample_rate and np.array_equal(self._samples, other._samples)

    def __hash__(self):
        return hash((self._sample_rate, self._samples.tobytes()))

    def __repr__(self) -> str:
        return f"Waveform(n={len(self)}, sample_rate={self._sample_rate})"

    def to_tensor(self) -> torch.Tensor:
        """float64 tensor copy of the samples"""
        return torch.tensor(self._samples, dtype=torch.float64)

    @classmethod
    def from_tensor(cls, x: torch.Tensor, sample_rate: int) -> "Waveform":
        return cls(x.detach().cpu().numpy().astype(np.float64), sample_rate)

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self._sample_rate)

    def fit_length(self, n: int) -> "Waveform":
        """Crop or zero-pad to exactly n samples"""
        if n < 1:
            raise ValueError(f"target length must be >= 1, got {n}")
        if len(self) >= n:
            return self.with_samples(self._samples[:n])
        return self.with_samples(np.pad(self._samples, (0, n - len(self))))


def _round_half_away(a):
    return np.sign(a) * np.floor(np.abs(a) + 0.5)


def pcm16_codes(samples: np.ndarray) -> np.ndarray:
    """int16 codes of normalized samples: round half away from zero, then clamp"""
    codes = _round_half_away(np.asarray(samples, dtype=np.float64) * PCM16_SCALE)
    return np.clip(codes, PCM16_MIN, PCM16_MAX).astype(np.int16)


def quantize_pcm16(w: Waveform) -> Waveform:
    """Snap a waveform onto the 16-bit PCM grid (idempotent)"""
    return w.with_samples(pcm16_codes(w.samples).astype(np.float64) / PCM16_SCALE)


def quantize_pcm16_tensor(x: torch.Tensor) -> torch.Tensor:
    """Tensor version of quantize_pcm16, applied elementwise"""
    codes = torch.sign(x) * torch.floor(torch.abs(x) * PCM16_SCALE + 0.5)
    return torch.clamp(codes, PCM16_MIN, PCM16_MAX) / PCM16_SCALE
