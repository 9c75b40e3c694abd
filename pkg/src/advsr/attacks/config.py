"""
Attack configuration and result types.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from advsr.audio.waveform import Waveform
from advsr.metrics import DistortionReport
from advsr.model.losses import LossSpec

AttackKind = Literal['fgsm', 'pgd', 'cw_inf', 'cw2', 'fakebob', 'siren']

# loss used when the config leaves it open
DEFAULT_LOSS = {'fgsm': 'ce', 'pgd': 'ce', 'cw_inf': 'cw', 'cw2': 'cw', 'fakebob': 'cw', 'siren': 'cw'}


class AttackConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: AttackKind
    name: Optional[str] = None
    epsilon: float = Field(0.002, gt=0)
    alpha: Optional[float] = Field(None, gt=0)
    steps: int = Field(10, ge=1)
    kappa: Optional[float] = Field(None, ge=0)
    loss: Optional[Literal['ce', 'cw']] = None
    targeted: bool = False
    target_label: Optional[int] = Field(None, ge=0)
    random_init: Optional[bool] = None
    # cw2
    c_init: float = Field(1e-2, gt=0)
    binary_search_steps: int = Field(9, ge=1)
    max_iters: int = Field(900, ge=1)
    lr: float = Field(1e-4, gt=0)
    # fakebob (NES)
    m: int = Field(50, ge=2)
    sigma: float = Field(1e-3, gt=0)
    iter_limit: int = Field(1000, ge=1)
    max_queries: Optional[int] = Field(None, ge=1)
    # siren (PSO)
    swarm_size: int = Field(30, ge=1)
    pso_iters: int = Field(100, ge=1)
    inertia_start: float = Field(0.9, ge=0)
    inertia_end: float = Field(0.4, ge=0)
    c1: float = Field(2.0, ge=0)
    c2: float = Field(2.0, ge=0)
    # harness: craft through the defended system with the adaptive wrapper stack
    adaptive: bool = False
    seed: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.alpha is not None and self.alpha > self.epsilon:
            raise ValueError(f"step size alpha ({self.alpha}) must not exceed epsilon ({self.epsilon})")
        if self.m % 2:
            raise ValueError(f"NES samples m must be even, got {self.m}")
        if self.target_label is not None and not self.targeted:
            raise ValueError("target_label given for an untargeted attack")
        return self

    @property
    def step_size(self) -> float:
        return self.alpha if self.alpha is not None else self.epsilon / 5.0

    @property
    def confidence(self) -> float:
        if self.kappa is not None:
            return self.kappa
        return 0.5 if self.kind == 'fakebob' else 0.0

    @property
    def loss_spec(self) -> LossSpec:
        return LossSpec(kind=self.loss or DEFAULT_LOSS[self.kind], kappa=self.confidence)

    @property
    def uses_random_init(self) -> bool:
        if self.random_init is not None:
            return self.random_init
        return self.kind in ('pgd', 'cw_inf')

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind in ('pgd', 'cw_inf'):
            base = f"{self.kind.upper().replace('_INF', 'inf')}-{self.steps}"
            base = base if self.kind == 'pgd' else f"{base}-k{self.confidence:g}"
        elif self.kind == 'cw2':
            base = f"CW2-k{self.confidence:g}"
        else:
            base = self.kind.upper()
        return f"{base}-targeted" if self.targeted else base


class AttackResult(BaseModel):
    """One adversarial voice; success is judged on its PCM16-quantized version"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    adv: Waveform
    label: int
    target: Optional[int] = None
    targeted: bool = False
    success: bool
    success_pre_quant: bool
    iterations: int = 0
    queries: int = 0
    loss_trace: List[float] = Field(default_factory=list)
    adv_loss: float
    margin: float
    distortion: DistortionReport
    distortion_stored: DistortionReport
