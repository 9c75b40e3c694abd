"""
L-infinity gradient attacks: FGSM, PGD and CW-inf (PGD on the CW margin).
"""
from typing import List, Optional, Sequence

import torch

from advsr.attacks.base import Target, as_provider, attack_labels, finalize, make_generator, to_batch
from advsr.attacks.config import AttackConfig, AttackResult
from advsr.audio.waveform import Waveform
from advsr.exceptions import AttackError
from advsr.logging_config import get_attack_logger

logger = get_attack_logger()


def _budget(x: torch.Tensor, epsilon: float):
    return torch.clamp(x - epsilon, -1.0, 1.0), torch.clamp(x + epsilon, -1.0, 1.0)


def fgsm_batch(target: Target, ws: Sequence[Waveform], labels: Sequence[int], cfg: AttackConfig,
               generator: Optional[torch.Generator] = None) -> List[AttackResult]:
    """x + eps * sign(grad) (descending for targeted / margin losses), one step"""
    provider = as_provider(target)
    generator = make_generator(cfg, generator)
    x = to_batch(ws)
    y = torch.as_tensor(list(labels), dtype=torch.long)
    against = attack_labels(cfg, y, provider.system.n_classes, generator)
    direction = 1.0 if cfg.loss_spec.ascends(cfg.targeted) else -1.0

    loss, grad = provider.evaluate(x, against, cfg.loss_spec, cfg.targeted, generator)
    adv = torch.clamp(x + direction * cfg.epsilon * torch.sign(grad), -1.0, 1.0)
    traces = [[float(v)] for v in loss]
    logger.debug(f"{cfg.label}: mean loss {float(loss.mean()):.4f}")
    return finalize(provider, cfg, x, adv, y, against, traces, [1] * len(ws), [0] * len(ws), generator)


def pgd_batch(target: Target, ws: Sequence[Waveform], labels: Sequence[int], cfg: AttackConfig,
              generator: Optional[torch.Generator] = None) -> List[AttackResult]:
    """
    Iterated sign steps of size alpha projected onto the eps-ball around the
    voice (and [-1, 1]); starts from a uniform random point in the ball
    unless random_init is off.
    """
    provider = as_provider(target)
    generator = make_generator(cfg, generator)
    x = to_batch(ws)
    y = torch.as_tensor(list(labels), dtype=torch.long)
    against = attack_labels(cfg, y, provider.system.n_classes, generator)
    direction = 1.0 if cfg.loss_spec.ascends(cfg.targeted) else -1.0
    lo, hi = _budget(x, cfg.epsilon)

    adv = x.clone()
    if cfg.uses_random_init:
        noise = (torch.rand(x.shape, generator=generator, dtype=x.dtype) * 2.0 - 1.0) * cfg.epsilon
        adv = torch.min(torch.max(x + noise, lo), hi)

    traces: List[List[float]] = [[] for _ in ws]
    for step in range(cfg.steps):
        loss, grad = provider.evaluate(adv, against, cfg.loss_spec, cfg.targeted, generator)
        for trace, v in zip(traces, loss.tolist()):
            trace.append(v)
        adv = torch.min(torch.max(adv + direction * cfg.step_size * torch.sign(grad), lo), hi)
        logger.debug(f"{cfg.label} step {step + 1}/{cfg.steps}: mean loss {float(loss.mean()):.4f}")
    return finalize(provider, cfg, x, adv, y, against, traces, [cfg.steps] * len(ws), [0] * len(ws), generator)


def cw_inf_batch(target: Target, ws: Sequence[Waveform], labels: Sequence[int], cfg: AttackConfig,
                 generator: Optional[torch.Generator] = None) -> List[AttackResult]:
    """PGD on the CW margin loss with confidence kappa"""
    if cfg.loss_spec.kind != 'cw':
        cfg = cfg.model_copy(update={'loss': 'cw'})
    return pgd_batch(target, ws, labels, cfg, generator)


def _single(batch_fn, kind: str):
    def run(target: Target, w: Waveform, y: int, cfg: AttackConfig,
            generator: Optional[torch.Generator] = None) -> AttackResult:
        if cfg.kind != kind:
            raise AttackError(f"{kind} called with a {cfg.kind} config")
        return batch_fn(target, [w], [y], cfg, generator)[0]
    run.__name__ = kind
    run.__doc__ = batch_fn.__doc__
    return run


fgsm = _single(fgsm_batch, 'fgsm')
pgd = _single(pgd_batch, 'pgd')
cw_inf = _single(cw_inf_batch, 'cw_inf')
