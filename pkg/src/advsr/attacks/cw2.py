"""
CW2: least-L2 perturbation found by Adam in tanh space with a binary search
over the trade-off constant c.
"""
from typing import List, Optional, Sequence

import torch

from advsr.attacks.base import Target, as_provider, attack_labels, finalize, make_generator, succeeded, to_batch
from advsr.attacks.config import AttackConfig, AttackResult
from advsr.audio.waveform import Waveform
from advsr.exceptions import AttackError
from advsr.logging_config import get_attack_logger
from advsr.model.losses import LossSpec

logger = get_attack_logger()

C_MAX = 1e10
BOX = 1.0 - 1e-7


def cw2_batch(target: Target, ws: Sequence[Waveform], labels: Sequence[int], cfg: AttackConfig,
              generator: Optional[torch.Generator] = None) -> List[AttackResult]:
    """
    minimize ||delta||^2 + c * max(margin, -kappa) over x + delta = tanh(v);
    c halves after a success and grows tenfold after a failure. Keeps the
    least-L2 successful point per voice (the input itself when it already
    succeeds with margin kappa).
    """
    provider = as_provider(target)
    generator = make_generator(cfg, generator)
    system = provider.system
    x = to_batch(ws)
    y = torch.as_tensor(list(labels), dtype=torch.long)
    against = attack_labels(cfg, y, system.n_classes, generator)
    kappa = cfg.confidence
    loss_spec = LossSpec(kind='cw', kappa=kappa)
    n = x.shape[0]

    with torch.no_grad():
        start_ok = succeeded(system.scores(x, generator), y, against, cfg.targeted, kappa, system=system)
    best_adv = x.clone()
    best_l2 = torch.where(start_ok, torch.zeros(n, dtype=x.dtype), torch.full((n,), float('inf'), dtype=x.dtype))
    c = torch.full((n,), cfg.c_init, dtype=x.dtype)
    iters_per_c = max(1, cfg.max_iters // cfg.binary_search_steps)
    traces: List[List[float]] = [[] for _ in ws]
    total_iters = 0

    for bs_step in range(cfg.binary_search_steps):
        v = torch.atanh(torch.clamp(x, -BOX, BOX)).clone().requires_grad_(True)
        optimizer = torch.optim.Adam([v], lr=cfg.lr)
        found = start_ok.clone()
        for _ in range(iters_per_c):
            with torch.no_grad():
                adv = torch.tanh(v)
            f, grad_f = provider.evaluate(adv, against, loss_spec, cfg.targeted, generator)
            delta = adv - x
            l2_sq = (delta ** 2).sum(dim=1)
            objective = l2_sq + c * f
            optimizer.zero_grad()
            v.grad = (2.0 * delta + c[:, None] * grad_f) * (1.0 - adv ** 2)
            optimizer.step()
            total_iters += 1
            for trace, value in zip(traces, objective.tolist()):
                trace.append(value)

            with torch.no_grad():
                ok = succeeded(system.scores(adv, generator), y, against, cfg.targeted, kappa, system=system)
                l2 = l2_sq.sqrt()
                better = ok & (l2 < best_l2)
                best_l2 = torch.where(better, l2, best_l2)
                best_adv[better] = adv[better]
                found |= ok
        c = torch.where(found, c / 2.0, torch.clamp(c * 10.0, max=C_MAX))
        logger.debug(f"{cfg.label} search step {bs_step + 1}/{cfg.binary_search_steps}: "
                     f"{int(found.sum())}/{n} succeeded")

    # failures report their last iterate
    with torch.no_grad():
        last = torch.tanh(v)
    failed = torch.isinf(best_l2)
    best_adv[failed] = last[failed]
    return finalize(provider, cfg, x, best_adv, y, against, traces, [total_iters] * n, [0] * n, generator)


def cw2(target: Target, w: Waveform, y: int, cfg: AttackConfig,
        generator: Optional[torch.Generator] = None) -> AttackResult:
    if cfg.kind != 'cw2':
        raise AttackError(f"cw2 called with a {cfg.kind} config")
    return cw2_batch(target, [w], [y], cfg, generator)[0]
