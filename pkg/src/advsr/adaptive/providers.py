"""
Gradient providers for adaptive attacks.

A provider turns (waveform batch, labels, loss) into (per-example loss,
input gradient). Providers compose: EOT(BPDA(Exact(system))). The forward
value always equals the defended system's true forward pass; only how the
gradient is obtained changes.
"""
from typing import Callable, Optional, Tuple

import torch

from advsr.exceptions import AttackError, TransformError
from advsr.logging_config import get_defense_logger
from advsr.model.losses import LossSpec
from advsr.model.system import SpeakerSystem
from advsr.transforms.base import Transform

logger = get_defense_logger()

Surrogate = Callable[[torch.Tensor], torch.Tensor]


def _identity(x: torch.Tensor) -> torch.Tensor:
    return x


class GradProvider:
    """evaluate(x [B, L], labels [B], loss_spec, targeted, generator) -> (loss [B], grad [B, L])"""

    descriptor = 'abstract'

    @property
    def system(self) -> SpeakerSystem:
        raise NotImplementedError

    @property
    def randomized(self) -> bool:
        return self.system.randomized

    def rebind(self, system: SpeakerSystem) -> "GradProvider":
        """Same wrapper stack over another system"""
        raise NotImplementedError

    def evaluate(self, x: torch.Tensor, labels: torch.Tensor, loss_spec: LossSpec, targeted: bool = False,
                 generator: Optional[torch.Generator] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return self.descriptor


class Exact(GradProvider):
    """Reverse-mode gradient straight through the defended system"""

    def __init__(self, system: SpeakerSystem):
        self._system = system

    @property
    def system(self) -> SpeakerSystem:
        return self._system

    @property
    def descriptor(self) -> str:
        return 'exact'

    def rebind(self, system: SpeakerSystem) -> "Exact":
        return Exact(system)

    def evaluate(self, x, labels, loss_spec, targeted=False, generator=None):
        blocked = [t.label for t in self._system.transforms if not t.differentiable]
        if blocked:
            raise AttackError(f"gradient unavailable through non-differentiable {', '.join(blocked)}; "
                              f"wrap with bpda")
        x = x.detach().clone().requires_grad_(True)
        loss = self._system.loss(x, labels, loss_spec, targeted, generator)
        (grad,) = torch.autograd.grad(loss.sum(), x)
        return loss.detach(), grad


class _BackwardSurrogate(torch.autograd.Function):
    """Forward returns the exact transform output; backward differentiates the surrogate"""

    @staticmethod
    def forward(ctx, x, exact, surrogate):
        ctx.save_for_backward(x)
        ctx.surrogate = surrogate
        return exact.clone()

    @staticmethod
    def backward(ctx, grad_out):
        (x,) = ctx.saved_tensors
        with torch.enable_grad():
            xd = x.detach().requires_grad_(True)
            (grad,) = torch.autograd.grad(ctx.surrogate(xd), xd, grad_out, allow_unused=True)
        return (torch.zeros_like(x) if grad is None else grad), None, None


def bpda_transform(t: Transform, surrogate: Surrogate = _identity) -> Transform:
    """The same transform, with its backward pass replaced by the surrogate's"""

    def kernel(x: torch.Tensor, sample_rate: int, generator=None) -> torch.Tensor:
        with torch.no_grad():
            exact = t.apply_tensor(x.detach(), sample_rate, generator)
            approx = surrogate(x.detach())
        if approx.shape != exact.shape:
            raise TransformError(f"surrogate output shape {tuple(approx.shape)} does not match "
                                 f"{t.label} output {tuple(exact.shape)}")
        return _BackwardSurrogate.apply(x, exact, surrogate)

    return Transform(t.name, t.params, kernel, differentiable=True, randomized=t.randomized,
                     level=t.level, stage=t.stage, rng_seed=t.rng_seed)


class BPDA(GradProvider):
    """Backward-pass differentiable approximation for one transform of the inner system"""

    def __init__(self, inner: GradProvider, transform: Transform, surrogate: Optional[Surrogate] = None):
        if transform not in inner.system.transforms:
            raise AttackError(f"{transform.label} is not part of the defended system")
        self.inner = inner
        self.transform = transform
        self.surrogate = surrogate or _identity
        index = inner.system.transforms.index(transform)
        self._wrapped = inner.rebind(inner.system.replace_transform(index, bpda_transform(transform, self.surrogate)))

    @property
    def system(self) -> SpeakerSystem:
        return self._wrapped.system

    @property
    def descriptor(self) -> str:
        return f"bpda({self.transform.name}) -> {self.inner.descriptor}"

    def rebind(self, system: SpeakerSystem) -> GradProvider:
        return self._wrapped.rebind(system)

    def evaluate(self, x, labels, loss_spec, targeted=False, generator=None):
        return self._wrapped.evaluate(x, labels, loss_spec, targeted, generator)


def bpda_all(inner: GradProvider, surrogate: Optional[Surrogate] = None) -> GradProvider:
    """BPDA around every non-differentiable transform"""
    provider = inner
    for i, t in enumerate(inner.system.transforms):
        if not t.differentiable:
            provider = BPDA(provider, provider.system.transforms[i], surrogate)
    return provider


class EOT(GradProvider):
    """Loss and gradient averaged over r independent transform draws"""

    def __init__(self, inner: GradProvider, r: int = 50):
        if r < 1:
            raise AttackError(f"EOT needs r >= 1 draws, got {r}")
        self.inner = inner
        self.r = int(r)

    @property
    def system(self) -> SpeakerSystem:
        return self.inner.system

    @property
    def descriptor(self) -> str:
        return f"eot(r={self.r}) -> {self.inner.descriptor}"

    def rebind(self, system: SpeakerSystem) -> "EOT":
        return EOT(self.inner.rebind(system), self.r)

    def evaluate(self, x, labels, loss_spec, targeted=False, generator=None):
        if not self.inner.randomized:
            return self.inner.evaluate(x, labels, loss_spec, targeted, generator)
        loss_sum, grad_sum = None, None
        for _ in range(self.r):
            seed = int(torch.randint(0, 2 ** 62, (1,), generator=generator))
            loss, grad = self.inner.evaluate(x, labels, loss_spec, targeted, torch.Generator().manual_seed(seed))
            loss_sum = loss if loss_sum is None else loss_sum + loss
            grad_sum = grad if grad_sum is None else grad_sum + grad
        return loss_sum / self.r, grad_sum / self.r


def bpda_wrap(inner: GradProvider, transform: Transform, surrogate: Optional[Surrogate] = None) -> GradProvider:
    return BPDA(inner, transform, surrogate)


def eot_wrap(inner: GradProvider, r: int) -> GradProvider:
    return EOT(inner, r)
