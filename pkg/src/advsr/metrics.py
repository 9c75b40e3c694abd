"""
Attack and defense metrics: Lp distortions and SNR, attack success rate,
benign / adversarial accuracy and their harmonic mean R1.
"""
import math
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from advsr.audio.waveform import Waveform

ArrayLike = Union[Waveform, np.ndarray, Sequence[float]]


def _samples(x: ArrayLike) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=np.float64).ravel()


class DistortionReport(BaseModel):
    """Perturbation size; snr_db is +inf for a zero perturbation"""
    model_config = ConfigDict(frozen=True)

    l0: int = Field(ge=0)
    l1: float = Field(ge=0)
    l2: float = Field(ge=0)
    linf: float = Field(ge=0)
    snr_db: float


def distortion(x: ArrayLike, adv: ArrayLike) -> DistortionReport:
    """
    Raises:
        ValueError: lengths differ
    """
    a, b = _samples(x), _samples(adv)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    delta = b - a
    signal_power = float(np.sum(a ** 2))
    noise_power = float(np.sum(delta ** 2))
    if noise_power == 0:
        snr = math.inf
    elif signal_power == 0:
        snr = -math.inf
    else:
        snr = 10.0 * math.log10(signal_power / noise_power)
    return DistortionReport(
        l0=int(np.count_nonzero(delta)),
        l1=float(np.sum(np.abs(delta))),
        l2=float(np.sqrt(noise_power)),
        linf=float(np.max(np.abs(delta))) if delta.size else 0.0,
        snr_db=snr,
    )


def asr(results: Sequence, mode: Optional[str] = None) -> float:
    """
    Share of successful attack results. Success already encodes the mode:
    misclassified (untargeted) or recognized as the target (targeted).

    Raises:
        ValueError: empty list, unknown mode or results of the other mode
    """
    if len(results) == 0:
        raise ValueError("attack success rate of an empty result list is undefined")
    if mode is not None:
        if mode not in ('targeted', 'untargeted'):
            raise ValueError(f"mode must be 'targeted' or 'untargeted', got {mode!r}")
        wanted = mode == 'targeted'
        if any(getattr(r, 'targeted', wanted) != wanted for r in results):
            raise ValueError(f"results mix targeted and untargeted attacks (expected {mode})")
    return sum(1 for r in results if r.success) / len(results)


def accuracy(correct: Iterable[bool]) -> float:
    flags = list(correct)
    if not flags:
        raise ValueError("accuracy of an empty set is undefined")
    return sum(1 for c in flags if c) / len(flags)


def r1(a_b: float, a_a_mean: float) -> float:
    """Harmonic mean of benign and adversarial accuracy; (0, 0) -> 0"""
    for name, v in (('a_b', a_b), ('a_a', a_a_mean)):
        if not 0 <= v <= 1:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    if a_b + a_a_mean == 0:
        return 0.0
    return 2.0 * a_b * a_a_mean / (a_b + a_a_mean)


def summarize_distortion(reports: Sequence[DistortionReport]) -> Dict[str, float]:
    """Mean / median L2 and mean SNR over reports, skipping infinite SNRs"""
    if not reports:
        return {'l2_mean': math.nan, 'l2_median': math.nan, 'snr_mean': math.nan}
    l2 = np.array([r.l2 for r in reports])
    finite_snr = [r.snr_db for r in reports if math.isfinite(r.snr_db)]
    return {
        'l2_mean': float(l2.mean()),
        'l2_median': float(np.median(l2)),
        'snr_mean': float(np.mean(finite_snr)) if finite_snr else math.inf,
    }


class EvalReport(BaseModel):
    """Benign accuracy, per-attack adversarial accuracy / ASR, and R1 over the attack mean"""
    model_config = ConfigDict(frozen=True)

    a_b: float = Field(ge=0, le=1)
    a_a: Dict[str, float]
    asr: Dict[str, float]
    r1: float = Field(0.0, ge=0, le=1)

    @model_validator(mode="after")
    def _check(self):
        for table in (self.a_a, self.asr):
            for attack, v in table.items():
                if not 0 <= v <= 1:
                    raise ValueError(f"{attack}: {v} outside [0, 1]")
        return self

    @property
    def a_a_mean(self) -> float:
        return float(np.mean(list(self.a_a.values()))) if self.a_a else 0.0

    @classmethod
    def build(cls, a_b: float, a_a: Dict[str, float], asr_by_attack: Dict[str, float]) -> "EvalReport":
        mean = float(np.mean(list(a_a.values()))) if a_a else 0.0
        return cls(a_b=a_b, a_a=dict(a_a), asr=dict(asr_by_attack), r1=r1(a_b, mean))
