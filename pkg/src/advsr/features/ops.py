"""
Differentiable MFCC flow kernels.

The *_tensor functions work on float64 tensors with arbitrary leading batch
dimensions ([..., L] samples or [..., N, d] features) and are what the model
differentiates through. The Waveform / FeatureMatrix wrappers below them are
the single-voice API.
"""
from functools import lru_cache

import numpy as np
import torch
from scipy.fft import dct

from advsr.audio.waveform import Waveform
from advsr.exceptions import FeatureError
from advsr.features.config import FeatureConfig
from advsr.features.matrix import FeatureMatrix

DELTA_WINDOW = 2


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=32)
def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular HTK-spaced filters, shape [n_fft//2 + 1, n_mels]"""
    bin_hz = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_mels + 2))
    fb = np.zeros((len(bin_hz), n_mels))
    for m in range(n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        fb[:, m] = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


@lru_cache(maxsize=32)
def dct_basis(n_mels: int, n_ceps: int) -> np.ndarray:
    """Orthonormal DCT-II rows kept to n_ceps, shape [n_mels, n_ceps]"""
    basis = dct(np.eye(n_mels), type=2, norm='ortho', axis=0)[:n_ceps, :].T.copy()
    basis.setflags(write=False)
    return basis


def n_frames_for(length: int, cfg: FeatureConfig, sample_rate: int) -> int:
    frame = cfg.frame_samples(sample_rate)
    if length < frame:
        raise FeatureError(f"signal of {length} samples is shorter than one frame ({frame} samples)")
    return (length - frame) // cfg.hop_samples(sample_rate) + 1


def frame_tensor(x: torch.Tensor, cfg: FeatureConfig, sample_rate: int, window: bool = True) -> torch.Tensor:
    """[..., L] -> [..., N, F] frames, Hamming-windowed unless window=False"""
    n_frames_for(x.shape[-1], cfg, sample_rate)
    frame = cfg.frame_samples(sample_rate)
    frames = x.unfold(-1, frame, cfg.hop_samples(sample_rate))
    if window:
        frames = frames * torch.hamming_window(frame, periodic=False, dtype=x.dtype, device=x.device)
    return frames


def mfcc_tensor(x: torch.Tensor, cfg: FeatureConfig, sample_rate: int) -> torch.Tensor:
    """[..., L] -> [..., N, n_ceps]"""
    frame = cfg.frame_samples(sample_rate)
    if frame > cfg.n_fft:
        raise FeatureError(f"frame of {frame} samples does not fit n_fft={cfg.n_fft}")
    if cfg.preemphasis > 0:
        x = torch.cat([x[..., :1], x[..., 1:] - cfg.preemphasis * x[..., :-1]], dim=-1)
    frames = frame_tensor(x, cfg, sample_rate)
    spectrum = torch.fft.rfft(frames, n=cfg.n_fft, dim=-1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    fb = torch.as_tensor(mel_filterbank(cfg.n_mels, cfg.n_fft, sample_rate), dtype=x.dtype, device=x.device)
    log_mel = torch.clamp(power @ fb, min=cfg.log_floor).log()
    basis = torch.as_tensor(dct_basis(cfg.n_mels, cfg.n_ceps), dtype=x.dtype, device=x.device)
    return log_mel @ basis


def delta_tensor(c: torch.Tensor, window: int = DELTA_WINDOW) -> torch.Tensor:
    """Regression deltas along the frame axis (-2), replicate-padded"""
    n = c.shape[-2]
    if n < 1:
        raise FeatureError("cannot take deltas of an empty feature matrix")
    padded = torch.cat([c[..., :1, :].expand(*c.shape[:-2], window, c.shape[-1]),
                        c,
                        c[..., -1:, :].expand(*c.shape[:-2], window, c.shape[-1])], dim=-2)
    denom = 2.0 * sum(k * k for k in range(1, window + 1))
    out = torch.zeros_like(c)
    for k in range(1, window + 1):
        out = out + k * (padded[..., window + k:window + k + n, :] - padded[..., window - k:window - k + n, :])
    return out / denom


def add_deltas_tensor(c: torch.Tensor, orders: int) -> torch.Tensor:
    blocks = [c]
    for _ in range(orders):
        blocks.append(delta_tensor(blocks[-1]))
    return torch.cat(blocks, dim=-1)


def cmvn_tensor(c: torch.Tensor, std_floor: float = 1e-8) -> torch.Tensor:
    if c.shape[-2] < 2:
        raise FeatureError(f"cmvn needs at least 2 frames, got {c.shape[-2]}")
    centered = c - c.mean(dim=-2, keepdim=True)
    # max(std, floor) taken on the variance keeps sqrt away from 0
    var = (centered ** 2).mean(dim=-2, keepdim=True)
    return centered / torch.sqrt(torch.clamp(var, min=std_floor ** 2))


@torch.no_grad()
def vad_mask(x: torch.Tensor, cfg: FeatureConfig, sample_rate: int) -> torch.Tensor:
    """Boolean [N] mask of frames within vad_threshold_db of the loudest one"""
    frames = frame_tensor(x.detach(), cfg, sample_rate, window=False)
    energy_db = 10.0 * torch.log10((frames ** 2).sum(dim=-1) + 1e-20)
    mask = energy_db >= energy_db.max() - cfg.vad_threshold_db
    if not bool(mask.any()):
        mask[torch.argmax(energy_db)] = True
    return mask


def frame_starts(n_frames: int, cfg: FeatureConfig, sample_rate: int):
    hop = cfg.hop_samples(sample_rate)
    return [i * hop for i in range(n_frames)]


# Waveform / FeatureMatrix API


def frame_signal(w: Waveform, cfg: FeatureConfig) -> torch.Tensor:
    """Hamming-windowed frames of a voice, shape [N, frame samples]"""
    return frame_tensor(w.to_tensor(), cfg, w.sample_rate)


def mfcc(w: Waveform, cfg: FeatureConfig) -> FeatureMatrix:
    values = mfcc_tensor(w.to_tensor(), cfg, w.sample_rate)
    return FeatureMatrix(values, 'origin', frame_starts(values.shape[0], cfg, w.sample_rate))


def add_deltas(f: FeatureMatrix, orders: int) -> FeatureMatrix:
    if f.stage != 'origin':
        raise FeatureError(f"deltas are taken on origin features, got stage '{f.stage}'")
    return f.with_values(add_deltas_tensor(f.values, orders), 'delta')


def cmvn(f: FeatureMatrix, std_floor: float = 1e-8) -> FeatureMatrix:
    return f.with_values(cmvn_tensor(f.values, std_floor), 'cmvn')


def vad(f: FeatureMatrix, w: Waveform, cfg: FeatureConfig) -> FeatureMatrix:
    """Drop frames quieter than the loudest frame by more than vad_threshold_db"""
    mask = vad_mask(w.to_tensor(), cfg, w.sample_rate)
    if mask.shape[0] != f.n_frames:
        raise FeatureError(f"VAD mask covers {mask.shape[0]} frames, features have {f.n_frames}")
    keep = torch.nonzero(mask).flatten()
    return FeatureMatrix(f.values[keep], 'final', [f.frame_times[i] for i in keep.tolist()])
