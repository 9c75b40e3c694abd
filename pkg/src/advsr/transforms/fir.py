"""
Linear-phase FIR filtering (Hamming-window design) for the LPF / BPF defenses.
"""
import math
from functools import lru_cache
from typing import Tuple

import numpy as np
import torch
import torch.nn.functional as F
from scipy.signal import firwin

from advsr.audio.waveform import Waveform
from advsr.exceptions import TransformError
from advsr.transforms.base import Transform


def numtaps_for(transition_hz: float, sample_rate: int) -> int:
    """ceil(3.3 / normalized transition width), bumped to odd"""
    n = int(math.ceil(3.3 / (transition_hz / sample_rate)))
    return n if n % 2 == 1 else n + 1


@lru_cache(maxsize=64)
def lowpass_taps(f_p: float, f_s: float, sample_rate: int) -> Tuple[float, ...]:
    nyquist = sample_rate / 2.0
    if not 0 < f_p < f_s <= nyquist:
        raise TransformError(f"low-pass edges need 0 < f_p < f_s <= {nyquist} Hz, got f_p={f_p}, f_s={f_s}")
    n = numtaps_for(f_s - f_p, sample_rate)
    return tuple(firwin(n, (f_p + f_s) / 2.0, window='hamming', fs=sample_rate))


@lru_cache(maxsize=64)
def bandpass_taps(f_sl: float, f_pl: float, f_pu: float, f_su: float, sample_rate: int) -> Tuple[float, ...]:
    nyquist = sample_rate / 2.0
    if not 0 < f_sl < f_pl < f_pu < f_su < nyquist:
        raise TransformError(
            f"band-pass edges need 0 < f_sl < f_pl < f_pu < f_su < {nyquist} Hz, "
            f"got ({f_sl}, {f_pl}, {f_pu}, {f_su})")
    n = numtaps_for(min(f_pl - f_sl, f_su - f_pu), sample_rate)
    cutoff = [(f_sl + f_pl) / 2.0, (f_pu + f_su) / 2.0]
    return tuple(firwin(n, cutoff, window='hamming', pass_zero=False, fs=sample_rate))


def fir_filter_tensor(x: torch.Tensor, taps) -> torch.Tensor:
    """Zero-delay filtering of [..., L]: replicate-padded, centered, clamped to [-1, 1]"""
    kernel = torch.as_tensor(np.asarray(taps)[::-1].copy(), dtype=x.dtype, device=x.device).view(1, 1, -1)
    half = kernel.shape[-1] // 2
    shape = x.shape
    batch = F.pad(x.reshape(-1, 1, shape[-1]), (half, half), mode='replicate')
    out = F.conv1d(batch, kernel).reshape(shape)
    return torch.clamp(out, -1.0, 1.0)


def make_lpf(f_p: float = 4000.0, f_s: float = 4500.0) -> Transform:
    if not 0 < f_p < f_s:
        raise TransformError(f"low-pass edges need 0 < f_p < f_s, got f_p={f_p}, f_s={f_s}")

    def kernel(x, sample_rate, generator=None):
        return fir_filter_tensor(x, lowpass_taps(f_p, f_s, sample_rate))

    return Transform('lpf', {'f_p': f_p, 'f_s': f_s}, kernel, differentiable=True, randomized=False)


def make_bpf(f_sl: float = 150.0, f_pl: float = 300.0, f_pu: float = 4000.0, f_su: float = 6000.0) -> Transform:
    if not 0 < f_sl < f_pl < f_pu < f_su:
        raise TransformError(f"band-pass edges out of order: ({f_sl}, {f_pl}, {f_pu}, {f_su})")

    def kernel(x, sample_rate, generator=None):
        return fir_filter_tensor(x, bandpass_taps(f_sl, f_pl, f_pu, f_su, sample_rate))

    return Transform('bpf', {'f_sl': f_sl, 'f_pl': f_pl, 'f_pu': f_pu, 'f_su': f_su}, kernel,
                     differentiable=True, randomized=False)


def lpf(w: Waveform, f_p: float = 4000.0, f_s: float = 4500.0) -> Waveform:
    return make_lpf(f_p, f_s)(w)


def bpf(w: Waveform, f_pl: float = 300.0, f_pu: float = 4000.0, f_sl: float = 150.0, f_su: float = 6000.0) -> Waveform:
    return make_bpf(f_sl, f_pl, f_pu, f_su)(w)
