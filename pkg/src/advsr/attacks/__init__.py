import time
from typing import List, Optional, Sequence

import torch

from advsr.attacks.base import Target, as_provider, draw_targets, succeeded
from advsr.attacks.config import AttackConfig, AttackResult
from advsr.attacks.cw2 import cw2, cw2_batch
from advsr.attacks.fakebob import fakebob, fakebob_batch
from advsr.attacks.gradient import cw_inf, cw_inf_batch, fgsm, fgsm_batch, pgd, pgd_batch
from advsr.attacks.pso import PSOResult, pso_minimize, siren_batch, siren_pso
from advsr.audio.waveform import Waveform
from advsr.logging_config import get_attack_logger, log_performance

logger = get_attack_logger()

BATCH_FUNCTIONS = {
    'fgsm': fgsm_batch,
    'pgd': pgd_batch,
    'cw_inf': cw_inf_batch,
    'cw2': cw2_batch,
    'fakebob': fakebob_batch,
    'siren': siren_batch,
}


def run_attack(target: Target, ws: Sequence[Waveform], labels: Sequence[int], cfg: AttackConfig,
               generator: Optional[torch.Generator] = None) -> List[AttackResult]:
    """Run the configured attack over equal-length voices and log a summary"""
    started = time.perf_counter()
    results = BATCH_FUNCTIONS[cfg.kind](target, ws, labels, cfg, generator)
    elapsed = time.perf_counter() - started
    wins = sum(r.success for r in results)
    logger.info(f"{cfg.label}: {wins}/{len(results)} succeeded after quantization")
    log_performance(f"attack {cfg.label}", attack=cfg.label, examples=len(results),
                    successes=wins, runtime_s=round(elapsed, 3))
    return results


__all__ = [
    'AttackConfig', 'AttackResult', 'PSOResult', 'Target', 'BATCH_FUNCTIONS',
    'as_provider', 'draw_targets', 'succeeded', 'run_attack', 'pso_minimize',
    'fgsm', 'pgd', 'cw_inf', 'cw2', 'fakebob', 'siren_pso',
    'fgsm_batch', 'pgd_batch', 'cw_inf_batch', 'cw2_batch', 'fakebob_batch', 'siren_batch',
]
