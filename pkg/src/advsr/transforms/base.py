"""
Transform descriptor: one defense transformation plus its executable.

Waveform-level kernels take a [..., L] sample tensor; feature-level kernels
take an [N, d] feature tensor. Both receive the sample rate and an optional
torch.Generator (randomized transforms draw only from it).
"""
from typing import Any, Callable, Dict, Optional, Union

import torch

from advsr.audio.waveform import Waveform
from advsr.exceptions import TransformError
from advsr.features.config import STAGES
from advsr.features.matrix import FeatureMatrix

Kernel = Callable[[torch.Tensor, int, Optional[torch.Generator]], torch.Tensor]


class Transform:
    """Immutable transform value; flags drive adaptive-attack wrapping"""

    __slots__ = ("name", "params", "fn", "differentiable", "randomized", "level", "stage", "rng_seed")

    def __init__(self, name: str, params: Dict[str, Any], fn: Kernel, *, differentiable: bool,
                 randomized: bool, level: str = 'waveform', stage: Optional[str] = None,
                 rng_seed: Optional[int] = None):
        if level not in ('waveform', 'feature'):
            raise TransformError(f"unknown transform level '{level}'")
        if level == 'feature' and stage not in STAGES:
            raise TransformError(f"feature-level transform needs a stage in {STAGES}, got {stage!r}")
        if level == 'waveform' and stage is not None:
            raise TransformError("waveform-level transforms take no stage")
        self.name = name
        self.params = dict(params)
        self.fn = fn
        self.differentiable = differentiable
        self.randomized = randomized
        self.level = level
        self.stage = stage
        self.rng_seed = rng_seed

    @property
    def label(self) -> str:
        args = ",".join(f"{k}={v}" for k, v in self.params.items())
        where = f"@{self.stage}" if self.stage else ""
        return f"{self.name}{where}({args})"

    def _generator(self, generator: Optional[torch.Generator], seed: Optional[int] = None):
        if not self.randomized:
            return generator
        if seed is not None:
            return torch.Generator().manual_seed(int(seed))
        if generator is None:
            return torch.Generator().manual_seed(self.rng_seed or 0)
        return generator

    def apply_tensor(self, x: torch.Tensor, sample_rate: int,
                     generator: Optional[torch.Generator] = None) -> torch.Tensor:
        out = self.fn(x, sample_rate, self._generator(generator))
        if out.shape != x.shape:
            raise TransformError(f"{self.label} changed shape {tuple(x.shape)} -> {tuple(out.shape)}")
        return out

    def __call__(self, item: Union[Waveform, FeatureMatrix], seed: Optional[int] = None,
                 sample_rate: Optional[int] = None):
        """Apply to a Waveform (waveform level) or a FeatureMatrix (feature level)"""
        if self.level == 'waveform':
            if not isinstance(item, Waveform):
                raise TransformError(f"{self.label} applies to waveforms")
            with torch.no_grad():
                out = self.fn(item.to_tensor(), item.sample_rate, self._generator(None, seed))
            return Waveform.from_tensor(out, item.sample_rate)
        if not isinstance(item, FeatureMatrix):
            raise TransformError(f"{self.label} applies to feature matrices")
        out = self.fn(item.values, sample_rate or 0, self._generator(None, seed))
        return item.with_values(out)

    def __repr__(self) -> str:
        return f"Transform({self.label}, D={self.differentiable}, R={self.randomized})"


def _identity(x: torch.Tensor, sample_rate: int, generator=None) -> torch.Tensor:
    return x


def identity(level: str = 'waveform', stage: Optional[str] = None) -> Transform:
    return Transform('identity', {}, _identity, differentiable=True, randomized=False, level=level, stage=stage)
