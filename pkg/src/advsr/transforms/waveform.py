"""
Waveform-level defenses: quantization, additive noise, mean / median
smoothing and down-sampling with recovery.
"""
import math
from typing import Optional, Union

import torch
import torch.nn.functional as F

from advsr.audio.waveform import PCM16_SCALE, Waveform
from advsr.exceptions import TransformError
from advsr.transforms.base import Transform
from advsr.transforms.fir import fir_filter_tensor, lowpass_taps

RngLike = Union[int, torch.Generator, None]


def _as_batch(x: torch.Tensor):
    """[..., L] -> ([B, 1, L], restore)"""
    shape = x.shape
    return x.reshape(-1, 1, shape[-1]), (lambda y: y.reshape(*shape[:-1], y.shape[-1]))


def _round_half_away(a: torch.Tensor) -> torch.Tensor:
    return torch.sign(a) * torch.floor(torch.abs(a) + 0.5)


def _check_odd_kernel(k: int):
    if int(k) != k or k < 1 or k % 2 == 0:
        raise TransformError(f"kernel size must be an odd integer >= 1, got {k}")


# quantization

def qt_tensor(x: torch.Tensor, q: int) -> torch.Tensor:
    if q <= 0:
        raise TransformError(f"quantization factor q must be > 0, got {q}")
    a = _round_half_away(x * PCM16_SCALE)
    return torch.clamp(q * _round_half_away(a / q) / PCM16_SCALE, -1.0, 1.0)


def make_qt(q: int = 512) -> Transform:
    if q <= 0:
        raise TransformError(f"quantization factor q must be > 0, got {q}")
    return Transform('qt', {'q': q}, lambda x, sr, g: qt_tensor(x, q), differentiable=False, randomized=False)


# additive uniform noise

def at_tensor(x: torch.Tensor, snr_db: float, generator: Optional[torch.Generator]) -> torch.Tensor:
    signal_power = (x.detach() ** 2).mean(dim=-1, keepdim=True)
    if bool((signal_power == 0).any()):
        raise TransformError("cannot scale noise to an SNR for an all-zero input")
    noise_power = signal_power / 10.0 ** (snr_db / 10.0)
    # uniform on [-a, a] has power a^2 / 3
    amplitude = torch.sqrt(3.0 * noise_power)
    noise = (torch.rand(x.shape, generator=generator, dtype=x.dtype) * 2.0 - 1.0) * amplitude
    return torch.clamp(x + noise, -1.0, 1.0)


def make_at(snr_db: float = 16.0, rng_seed: Optional[int] = None) -> Transform:
    return Transform('at', {'snr_db': snr_db}, lambda x, sr, g: at_tensor(x, snr_db, g),
                     differentiable=True, randomized=True, rng_seed=rng_seed)


# smoothing

def _windows(x: torch.Tensor, k: int) -> torch.Tensor:
    """[..., L] -> [..., L, k] replicate-padded sliding windows"""
    batch, restore = _as_batch(x)
    padded = F.pad(batch, (k // 2, k // 2), mode='replicate') if k > 1 else batch
    return restore(padded).unfold(-1, k, 1)


def as_tensor(x: torch.Tensor, k: int) -> torch.Tensor:
    _check_odd_kernel(k)
    return _windows(x, k).mean(dim=-1)


def ms_tensor(x: torch.Tensor, k: int) -> torch.Tensor:
    _check_odd_kernel(k)
    return _windows(x, k).median(dim=-1).values


def make_as(k: int = 17) -> Transform:
    _check_odd_kernel(k)
    return Transform('as', {'k': k}, lambda x, sr, g: as_tensor(x, k), differentiable=True, randomized=False)


def make_ms(k: int = 7) -> Transform:
    _check_odd_kernel(k)
    return Transform('ms', {'k': k}, lambda x, sr, g: ms_tensor(x, k), differentiable=True, randomized=False)


# down-sampling

def ds_tensor(x: torch.Tensor, tau: float, sample_rate: int) -> torch.Tensor:
    """
    Low-pass below the reduced Nyquist, resample linearly to tau * L samples
    and back to L.
    """
    if not 0 < tau <= 1:
        raise TransformError(f"down-sampling ratio must lie in (0, 1], got {tau}")
    if tau == 1:
        return x
    reduced_nyquist = tau * sample_rate / 2.0
    taps = lowpass_taps(0.8 * reduced_nyquist, reduced_nyquist, sample_rate)
    smoothed = fir_filter_tensor(x, taps)
    batch, restore = _as_batch(smoothed)
    length = batch.shape[-1]
    reduced = max(2, int(math.floor(length * tau + 0.5)))
    down = F.interpolate(batch, size=reduced, mode='linear', align_corners=True)
    up = F.interpolate(down, size=length, mode='linear', align_corners=True)
    return torch.clamp(restore(up), -1.0, 1.0)


def make_ds(tau: float = 0.45) -> Transform:
    if not 0 < tau <= 1:
        raise TransformError(f"down-sampling ratio must lie in (0, 1], got {tau}")
    return Transform('ds', {'tau': tau}, lambda x, sr, g: ds_tensor(x, tau, sr),
                     differentiable=True, randomized=False)


# Waveform API

def _apply(t: Transform, w: Waveform, rng: RngLike = None) -> Waveform:
    if isinstance(rng, torch.Generator):
        with torch.no_grad():
            out = t.apply_tensor(w.to_tensor(), w.sample_rate, rng)
        return Waveform.from_tensor(out, w.sample_rate)
    return t(w, seed=rng)


def qt(w: Waveform, q: int = 512) -> Waveform:
    return _apply(make_qt(q), w)


def at(w: Waveform, snr_db: float = 16.0, rng: RngLike = 0) -> Waveform:
    return _apply(make_at(snr_db), w, rng)


def as_(w: Waveform, k: int = 17) -> Waveform:
    return _apply(make_as(k), w)


def ms(w: Waveform, k: int = 7) -> Waveform:
    return _apply(make_ms(k), w)


def ds(w: Waveform, tau: float = 0.45) -> Waveform:
    return _apply(make_ds(tau), w)
