"""
Feature extraction configuration and named presets.
"""
from typing import Dict, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

STAGES = ('origin', 'delta', 'cmvn', 'final')
Stage = Literal['origin', 'delta', 'cmvn', 'final']


class FeatureConfig(BaseModel):
    """MFCC flow settings: mfcc -> deltas -> cmvn -> vad"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    frame_len_ms: float = Field(25.0, gt=0)
    hop_ms: float = Field(10.0, gt=0)
    n_fft: int = Field(512, gt=0)
    n_mels: int = Field(26, gt=0)
    n_ceps: int = Field(13, gt=0)
    log_floor: float = Field(1e-10, gt=0)
    delta_orders: int = Field(0, ge=0, le=2)
    apply_cmvn: bool = False
    apply_vad: bool = False
    vad_threshold_db: float = Field(30.0, gt=0)
    cmvn_std_floor: float = Field(1e-8, gt=0)
    preemphasis: float = Field(0.0, ge=0, lt=1)

    @model_validator(mode="after")
    def _check_dims(self):
        if self.frame_len_ms < self.hop_ms:
            raise ValueError(f"frame_len_ms ({self.frame_len_ms}) must be >= hop_ms ({self.hop_ms})")
        if not self.n_ceps <= self.n_mels <= self.n_fft // 2 + 1:
            raise ValueError(
                f"need n_ceps <= n_mels <= n_fft/2+1, got {self.n_ceps}, {self.n_mels}, {self.n_fft // 2 + 1}")
        return self

    def frame_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_len_ms * sample_rate / 1000.0))

    def hop_samples(self, sample_rate: int) -> int:
        return max(1, int(round(self.hop_ms * sample_rate / 1000.0)))

    @property
    def dim(self) -> int:
        """Coefficients per frame after deltas"""
        return self.n_ceps * (1 + self.delta_orders)


PRESETS: Dict[str, FeatureConfig] = {
    'default': FeatureConfig(),
    'audionet': FeatureConfig(n_mels=40, n_ceps=32),
    'ivector-like': FeatureConfig(n_mels=40, n_ceps=24, delta_orders=2, apply_cmvn=True, apply_vad=True),
    'xvector-like': FeatureConfig(n_mels=30, n_ceps=30, apply_cmvn=True, apply_vad=True),
}


def feature_preset(name: str) -> FeatureConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown feature preset '{name}', expected one of {sorted(PRESETS)}") from None
