"""
Natural-evolution-strategies gradient estimation for score-only access.
"""
from typing import Callable, Optional, Tuple, Union

import torch

from advsr.adaptive.providers import GradProvider
from advsr.exceptions import AttackError
from advsr.model.losses import LossSpec
from advsr.model.system import SpeakerSystem

Oracle = Callable[[torch.Tensor], torch.Tensor]


class QueryCounter:
    """Wraps a batched oracle [k, ...] -> [k] and counts every point it scores"""

    def __init__(self, oracle: Oracle):
        self.oracle = oracle
        self.queries = 0

    def __call__(self, points: torch.Tensor) -> torch.Tensor:
        self.queries += points.shape[0]
        with torch.no_grad():
            return self.oracle(points)


def _as_generator(rng: Union[int, torch.Generator, None]) -> torch.Generator:
    if isinstance(rng, torch.Generator):
        return rng
    return torch.Generator().manual_seed(int(rng or 0))


def nes_grad(loss_oracle: Oracle, w: torch.Tensor, m: int = 50, sigma: float = 1e-3,
             rng: Union[int, torch.Generator, None] = None, batched: bool = True) -> torch.Tensor:
    """
    Antithetic Gaussian estimate of the oracle's gradient at w using exactly
    m queries: (1/(m sigma)) sum_j [f(w + sigma u_j) - f(w - sigma u_j)] u_j.

    The oracle scores a stacked batch of points when batched, else one point
    at a time.
    """
    if m < 2 or m % 2:
        raise AttackError(f"NES needs an even number of samples, got m={m}")
    if sigma <= 0:
        raise AttackError(f"NES smoothing sigma must be > 0, got {sigma}")
    w = torch.as_tensor(w, dtype=torch.float64)
    half = m // 2
    u = torch.randn((half, *w.shape), generator=_as_generator(rng), dtype=w.dtype)
    points = torch.cat([w + sigma * u, w - sigma * u])
    with torch.no_grad():
        if batched:
            values = loss_oracle(points)
        else:
            values = torch.stack([torch.as_tensor(loss_oracle(p), dtype=w.dtype) for p in points])
    diff = (values[:half] - values[half:]).reshape(half, *([1] * w.dim()))
    return (diff * u).sum(dim=0) / (m * sigma)


class NES(GradProvider):
    """Gradient-free provider: the defended system is only queried for scores"""

    def __init__(self, system: SpeakerSystem, m: int = 50, sigma: float = 1e-3):
        if m < 2 or m % 2:
            raise AttackError(f"NES needs an even number of samples, got m={m}")
        if sigma <= 0:
            raise AttackError(f"NES smoothing sigma must be > 0, got {sigma}")
        self._system = system
        self.m = int(m)
        self.sigma = float(sigma)
        self.queries = 0

    @property
    def system(self) -> SpeakerSystem:
        return self._system

    @property
    def descriptor(self) -> str:
        return f"nes(m={self.m}, sigma={self.sigma})"

    def rebind(self, system: SpeakerSystem) -> "NES":
        return NES(system, self.m, self.sigma)

    def oracle(self, label: torch.Tensor, loss_spec: LossSpec, targeted: bool,
               generator: Optional[torch.Generator]) -> QueryCounter:
        def score(points: torch.Tensor) -> torch.Tensor:
            labels = label.expand(points.shape[0])
            return self._system.loss(points, labels, loss_spec, targeted, generator)
        return QueryCounter(score)

    def evaluate(self, x, labels, loss_spec, targeted=False, generator=None) -> Tuple[torch.Tensor, torch.Tensor]:
        losses, grads = [], []
        for item, label in zip(x.detach(), labels):
            counter = self.oracle(label.reshape(1), loss_spec, targeted, generator)
            grads.append(nes_grad(counter, item, self.m, self.sigma, generator))
            losses.append(counter(item[None])[0])
            self.queries += counter.queries
        return torch.stack(losses), torch.stack(grads)
