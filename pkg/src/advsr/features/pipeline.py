"""
Feature flow: mfcc -> deltas -> cmvn -> vad, with optional per-stage taps.

A tap is a transform applied to the matrix produced at a stage before the
following stages run; it is how feature-level defenses are placed.
"""
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import torch

from advsr.audio.waveform import Waveform
from advsr.exceptions import FeatureError
from advsr.features.config import STAGES, FeatureConfig
from advsr.features.matrix import FeatureMatrix
from advsr.features.ops import add_deltas_tensor, cmvn_tensor, frame_starts, mfcc_tensor, vad_mask

TensorTap = Callable[[torch.Tensor], torch.Tensor]
MatrixTap = Callable[[FeatureMatrix], FeatureMatrix]


def _check_taps(taps: Mapping[str, TensorTap]):
    for stage in taps:
        if stage not in STAGES:
            raise FeatureError(f"unknown tap stage '{stage}', expected one of {STAGES}")


def _apply_tap(taps: Mapping[str, TensorTap], stage: str, values: torch.Tensor) -> torch.Tensor:
    tap = taps.get(stage)
    if tap is None:
        return values
    out = tap(values)
    if out.shape != values.shape:
        raise FeatureError(f"{stage} tap changed feature shape {tuple(values.shape)} -> {tuple(out.shape)}")
    return out


def extract(x: torch.Tensor, cfg: FeatureConfig, sample_rate: int,
            taps: Optional[Mapping[str, TensorTap]] = None) -> Tuple[torch.Tensor, List[int]]:
    """Single voice [L] -> (final features [N', d], frame start samples)"""
    taps = taps or {}
    _check_taps(taps)
    values = _apply_tap(taps, 'origin', mfcc_tensor(x, cfg, sample_rate))
    starts = frame_starts(values.shape[0], cfg, sample_rate)
    values = _apply_tap(taps, 'delta', add_deltas_tensor(values, cfg.delta_orders))
    if cfg.apply_cmvn:
        values = cmvn_tensor(values, cfg.cmvn_std_floor)
    values = _apply_tap(taps, 'cmvn', values)
    if cfg.apply_vad:
        # mask is constant for backprop
        keep = torch.nonzero(vad_mask(x, cfg, sample_rate)).flatten()
        values = values[keep]
        starts = [starts[i] for i in keep.tolist()]
    values = _apply_tap(taps, 'final', values)
    return values, starts


def extract_batch(x: torch.Tensor, cfg: FeatureConfig, sample_rate: int,
                  taps: Optional[Mapping[str, TensorTap]] = None) -> Union[torch.Tensor, List[torch.Tensor]]:
    """
    [B, L] -> [B, N, d] when every item keeps the same frames (no VAD, no
    taps); otherwise a list of per-item [N_i, d] matrices.
    """
    if x.dim() != 2:
        raise FeatureError(f"expected a [B, L] batch, got shape {tuple(x.shape)}")
    if not taps and not cfg.apply_vad:
        values = add_deltas_tensor(mfcc_tensor(x, cfg, sample_rate), cfg.delta_orders)
        if cfg.apply_cmvn:
            values = cmvn_tensor(values, cfg.cmvn_std_floor)
        return values
    return [extract(item, cfg, sample_rate, taps)[0] for item in x]


def pipeline(w: Waveform, cfg: FeatureConfig,
             tap: Optional[Tuple[str, MatrixTap]] = None) -> FeatureMatrix:
    """Run the full flow on one voice; tap=(stage, transform) rewrites that stage's matrix"""
    taps: Dict[str, TensorTap] = {}
    if tap is not None:
        stage, transform = tap

        def tensor_tap(values: torch.Tensor) -> torch.Tensor:
            return transform(FeatureMatrix(values, stage)).values

        taps[stage] = tensor_tap
    values, starts = extract(w.to_tensor(), cfg, w.sample_rate, taps)
    return FeatureMatrix(values, 'final', starts)


def stage_matrices(w: Waveform, cfg: FeatureConfig) -> Dict[str, FeatureMatrix]:
    """Every stage's matrix for one voice, for inspection and CSV dumps"""
    captured: Dict[str, FeatureMatrix] = {}

    def capture(stage):
        def tap(values: torch.Tensor) -> torch.Tensor:
            captured[stage] = FeatureMatrix(values.detach(), stage)
            return values
        return tap

    values, starts = extract(w.to_tensor(), cfg, w.sample_rate, {s: capture(s) for s in STAGES})
    captured['final'] = FeatureMatrix(values.detach(), 'final', starts)
    return captured
