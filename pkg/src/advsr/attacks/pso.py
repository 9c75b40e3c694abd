"""
Particle swarm optimization and the SirenAttack built on it.
"""
from typing import Callable, List, Optional, Sequence

import torch
from pydantic import BaseModel, ConfigDict

from advsr.attacks.base import Target, as_provider, attack_labels, finalize, make_generator, to_batch
from advsr.attacks.config import AttackConfig, AttackResult
from advsr.audio.waveform import Waveform
from advsr.exceptions import AttackError
from advsr.logging_config import get_attack_logger
from advsr.model.losses import per_example_loss

logger = get_attack_logger()

Objective = Callable[[torch.Tensor], torch.Tensor]


class PSOResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    best: torch.Tensor
    best_value: float
    history: List[float]
    iterations: int
    evaluations: int


def pso_minimize(objective: Objective, lo: torch.Tensor, hi: torch.Tensor, swarm_size: int = 30,
                 iters: int = 100, inertia_start: float = 0.9, inertia_end: float = 0.4,
                 c1: float = 2.0, c2: float = 2.0, generator: Optional[torch.Generator] = None,
                 max_evaluations: Optional[int] = None,
                 stop: Optional[Callable[[float], bool]] = None) -> PSOResult:
    """
    Minimize a batched objective ([k, D] -> [k]) over the box [lo, hi].

    Velocities start at zero and are clamped to the box width; inertia decays
    linearly from inertia_start to inertia_end. history[i] is the global best
    after iteration i (history[0] is the initial swarm), so it never increases.
    """
    if swarm_size < 1 or iters < 0:
        raise AttackError(f"invalid swarm size {swarm_size} / iterations {iters}")
    lo = lo.to(torch.float64)
    hi = hi.to(torch.float64)
    if torch.any(hi < lo):
        raise AttackError("PSO box has an upper bound below its lower bound")
    if max_evaluations is not None and max_evaluations < swarm_size:
        raise AttackError(f"evaluation budget {max_evaluations} is below the swarm size {swarm_size}")
    generator = generator or torch.Generator().manual_seed(0)
    shape = (swarm_size, *lo.shape)
    span = hi - lo

    pos = lo + torch.rand(shape, generator=generator, dtype=torch.float64) * span
    vel = torch.zeros(shape, dtype=torch.float64)
    with torch.no_grad():
        values = objective(pos)
    evaluations = swarm_size
    pbest, pbest_val = pos.clone(), values.clone()
    g = int(torch.argmin(pbest_val))
    gbest, gbest_val = pbest[g].clone(), float(pbest_val[g])
    history = [gbest_val]

    it = 0
    for it in range(1, iters + 1):
        if stop is not None and stop(gbest_val):
            it -= 1
            break
        if max_evaluations is not None and evaluations + swarm_size > max_evaluations:
            it -= 1
            break
        frac = (it - 1) / max(iters - 1, 1)
        omega = inertia_start + (inertia_end - inertia_start) * frac
        r1 = torch.rand(shape, generator=generator, dtype=torch.float64)
        r2 = torch.rand(shape, generator=generator, dtype=torch.float64)
        vel = omega * vel + c1 * r1 * (pbest - pos) + c2 * r2 * (gbest - pos)
        vel = torch.max(torch.min(vel, span), -span)
        pos = torch.min(torch.max(pos + vel, lo), hi)
        with torch.no_grad():
            values = objective(pos)
        evaluations += swarm_size

        improved = values < pbest_val
        pbest[improved] = pos[improved]
        pbest_val = torch.where(improved, values, pbest_val)
        g = int(torch.argmin(pbest_val))
        if float(pbest_val[g]) < gbest_val:
            gbest, gbest_val = pbest[g].clone(), float(pbest_val[g])
        history.append(gbest_val)

    return PSOResult(best=gbest, best_value=gbest_val, history=history, iterations=it, evaluations=evaluations)


def siren_batch(target: Target, ws: Sequence[Waveform], labels: Sequence[int], cfg: AttackConfig,
                generator: Optional[torch.Generator] = None) -> List[AttackResult]:
    """
    Particles are perturbations inside the eps-box (intersected with the
    valid sample range); the swarm minimizes the attack loss using scores only
    and stops once the best particle reaches the -kappa margin.
    """
    provider = as_provider(target)
    system = provider.system
    generator = make_generator(cfg, generator)
    x = to_batch(ws)
    y = torch.as_tensor(list(labels), dtype=torch.long)
    against = attack_labels(cfg, y, system.n_classes, generator)
    loss_spec = cfg.loss_spec
    sign = -1.0 if loss_spec.ascends(cfg.targeted) else 1.0
    goal = -cfg.confidence if loss_spec.kind == 'cw' else None

    advs, traces, iterations, queries = [], [], [], []
    for i in range(x.shape[0]):
        w = x[i]
        label = against[i:i + 1]

        def objective(deltas: torch.Tensor, w=w, label=label) -> torch.Tensor:
            scores = system.scores(w[None] + deltas, generator)
            return sign * per_example_loss(scores, label.expand(deltas.shape[0]), loss_spec, cfg.targeted)

        lo = torch.clamp(w - cfg.epsilon, -1.0, 1.0) - w
        hi = torch.clamp(w + cfg.epsilon, -1.0, 1.0) - w
        result = pso_minimize(
            objective, lo, hi, swarm_size=cfg.swarm_size, iters=cfg.pso_iters,
            inertia_start=cfg.inertia_start, inertia_end=cfg.inertia_end, c1=cfg.c1, c2=cfg.c2,
            generator=generator, max_evaluations=cfg.max_queries,
            stop=(lambda v: v <= goal) if goal is not None else None,
        )
        logger.debug(f"{cfg.label} voice {i}: {result.iterations} iterations, best loss {result.best_value:.4f}")
        advs.append(w + result.best)
        traces.append([sign * v for v in result.history])
        iterations.append(result.iterations)
        queries.append(result.evaluations)

    return finalize(provider, cfg, x, torch.stack(advs), y, against, traces, iterations, queries, generator)


def siren_pso(target: Target, w: Waveform, y: int, cfg: AttackConfig,
              generator: Optional[torch.Generator] = None) -> AttackResult:
    if cfg.kind != 'siren':
        raise AttackError(f"siren_pso called with a {cfg.kind} config")
    return siren_batch(target, [w], [y], cfg, generator)[0]
