"""
FAKEBOB: PGD-style sign steps on a NES gradient estimate, starting at the
voice itself and stopping as soon as the margin reaches -kappa.
"""
from typing import List, Optional, Sequence

import torch

from advsr.adaptive.nes import QueryCounter, nes_grad
from advsr.attacks.base import Target, as_provider, attack_labels, finalize, make_generator, succeeded, to_batch
from advsr.attacks.config import AttackConfig, AttackResult
from advsr.audio.waveform import Waveform
from advsr.exceptions import AttackError
from advsr.logging_config import get_attack_logger
from advsr.model.losses import margin, per_example_loss

logger = get_attack_logger()


def fakebob_batch(target: Target, ws: Sequence[Waveform], labels: Sequence[int], cfg: AttackConfig,
                  generator: Optional[torch.Generator] = None) -> List[AttackResult]:
    """
    Only scores of the defended system are used. Query accounting: the
    benign observation is free, every iteration costs m NES queries plus one
    success check. An iteration that would overrun max_queries is not started.
    """
    provider = as_provider(target)
    system = provider.system
    generator = make_generator(cfg, generator)
    x = to_batch(ws)
    y = torch.as_tensor(list(labels), dtype=torch.long)
    against = attack_labels(cfg, y, system.n_classes, generator)
    loss_spec = cfg.loss_spec
    kappa = cfg.confidence
    direction = 1.0 if loss_spec.ascends(cfg.targeted) else -1.0
    per_iteration = cfg.m + 1

    advs, traces, iterations, queries = [], [], [], []
    for i in range(x.shape[0]):
        w = x[i]
        label = against[i:i + 1]
        counter = QueryCounter(lambda points: system.scores(points, generator))

        def loss_oracle(points: torch.Tensor, label=label) -> torch.Tensor:
            return per_example_loss(counter(points), label.expand(points.shape[0]), loss_spec, cfg.targeted)

        def reached(scores: torch.Tensor, i=i, label=label):
            current = float(margin(scores, label, cfg.targeted)[0])
            done = current <= -kappa
            if done and system.task in ('SV', 'OSI'):
                done = bool(succeeded(scores, y[i:i + 1], label, cfg.targeted, system=system)[0])
            return current, done

        with torch.no_grad():
            start = system.scores(w[None], generator)
        current_margin, done = reached(start)
        lo = torch.clamp(w - cfg.epsilon, -1.0, 1.0)
        hi = torch.clamp(w + cfg.epsilon, -1.0, 1.0)
        adv = w.clone()
        trace: List[float] = []
        it = 0
        while not done and it < cfg.iter_limit:
            if cfg.max_queries is not None and counter.queries + per_iteration > cfg.max_queries:
                logger.debug(f"{cfg.label} voice {i}: query budget {cfg.max_queries} exhausted")
                break
            grad = nes_grad(loss_oracle, adv, cfg.m, cfg.sigma, generator)
            adv = torch.min(torch.max(adv + direction * cfg.step_size * torch.sign(grad), lo), hi)
            scores = counter(adv[None])
            current_margin, done = reached(scores)
            trace.append(float(per_example_loss(scores, label, loss_spec, cfg.targeted)[0]))
            it += 1
        logger.debug(f"{cfg.label} voice {i}: {it} iterations, {counter.queries} queries, "
                     f"margin {current_margin:.4f}")
        advs.append(adv)
        traces.append(trace)
        iterations.append(it)
        queries.append(counter.queries)

    return finalize(provider, cfg, x, torch.stack(advs), y, against, traces, iterations, queries, generator)


def fakebob(target: Target, w: Waveform, y: int, cfg: AttackConfig,
            generator: Optional[torch.Generator] = None) -> AttackResult:
    if cfg.kind != 'fakebob':
        raise AttackError(f"fakebob called with a {cfg.kind} config")
    return fakebob_batch(target, [w], [y], cfg, generator)[0]
