"""
Config-file form of transforms. Each spec validates its parameters and
builds the executable Transform.
"""
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from advsr.transforms.base import Transform, identity
from advsr.transforms.codec import make_codec
from advsr.transforms.featcompress import make_fc
from advsr.transforms.fir import make_bpf, make_lpf
from advsr.transforms.waveform import make_as, make_at, make_ds, make_ms, make_qt


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class _KernelSpec(_Spec):
    k: int

    @field_validator('k')
    @classmethod
    def _odd(cls, k: int) -> int:
        if k < 1 or k % 2 == 0:
            raise ValueError(f"kernel size must be odd and >= 1, got {k}")
        return k


class IdentitySpec(_Spec):
    kind: Literal['identity'] = 'identity'

    def build(self) -> Transform:
        return identity()


class QTSpec(_Spec):
    kind: Literal['qt'] = 'qt'
    q: int = Field(512, gt=0)

    def build(self) -> Transform:
        return make_qt(self.q)


class ATSpec(_Spec):
    kind: Literal['at'] = 'at'
    snr_db: float = 16.0
    seed: Optional[int] = None

    def build(self) -> Transform:
        return make_at(self.snr_db, self.seed)


class ASSpec(_KernelSpec):
    kind: Literal['as'] = 'as'
    k: int = 17

    def build(self) -> Transform:
        return make_as(self.k)


class MSSpec(_KernelSpec):
    kind: Literal['ms'] = 'ms'
    k: int = 7

    def build(self) -> Transform:
        return make_ms(self.k)


class DSSpec(_Spec):
    kind: Literal['ds'] = 'ds'
    tau: float = Field(0.45, gt=0, le=1)

    def build(self) -> Transform:
        return make_ds(self.tau)


class LPFSpec(_Spec):
    kind: Literal['lpf'] = 'lpf'
    f_p: float = 4000.0
    f_s: float = 4500.0

    @model_validator(mode="after")
    def _edges(self):
        if not 0 < self.f_p < self.f_s:
            raise ValueError(f"need 0 < f_p < f_s, got f_p={self.f_p}, f_s={self.f_s}")
        return self

    def build(self) -> Transform:
        return make_lpf(self.f_p, self.f_s)


class BPFSpec(_Spec):
    kind: Literal['bpf'] = 'bpf'
    f_sl: float = 150.0
    f_pl: float = 300.0
    f_pu: float = 4000.0
    f_su: float = 6000.0

    @model_validator(mode="after")
    def _edges(self):
        if not 0 < self.f_sl < self.f_pl < self.f_pu < self.f_su:
            raise ValueError(f"need f_sl < f_pl < f_pu < f_su, got ({self.f_sl}, {self.f_pl}, {self.f_pu}, {self.f_su})")
        return self

    def build(self) -> Transform:
        return make_bpf(self.f_sl, self.f_pl, self.f_pu, self.f_su)


class FCSpec(_Spec):
    kind: Literal['fc'] = 'fc'
    stage: Literal['origin', 'delta', 'cmvn', 'final'] = 'origin'
    method: Literal['kmeans', 'warped-kmeans'] = 'kmeans'
    cl_r: Optional[float] = Field(None, gt=0, le=1)
    seed: Optional[int] = None

    def build(self) -> Transform:
        return make_fc(self.stage, self.method, self.cl_r, self.seed)


class CodecSpec(_Spec):
    kind: Literal['codec'] = 'codec'
    command: str
    timeout_s: Optional[float] = Field(None, gt=0)

    def build(self) -> Transform:
        return make_codec(self.command, self.timeout_s)


TransformSpec = Annotated[
    Union[IdentitySpec, QTSpec, ATSpec, ASSpec, MSSpec, DSSpec, LPFSpec, BPFSpec, FCSpec, CodecSpec],
    Field(discriminator='kind'),
]


def build_transforms(specs: List[TransformSpec]) -> List[Transform]:
    return [spec.build() for spec in specs]
