"""
Training configuration and per-epoch history.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class TrainingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = Field(30, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-3, gt=0)
    optimizer: Literal['adam', 'sgd'] = 'adam'
    # uniform noise added to benign rows of every minibatch
    noise_budget: float = Field(0.002, ge=0)
    # fixed training length in seconds; None keeps the voices as they are
    crop_s: Optional[float] = Field(1.0, gt=0)
    seed: int = Field(0, ge=0)
    # adversarial training
    ratio: float = Field(0.5, ge=0, le=1)
    eot_draws: int = Field(10, ge=1)


class EpochRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    epoch: int
    loss: float
    train_accuracy: float
    test_accuracy: Optional[float] = None
    adversarial_rows: int = 0


class TrainingHistory(BaseModel):
    records: List[EpochRecord] = Field(default_factory=list)

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.records[-1] if self.records else None

    @property
    def test_accuracy(self) -> Optional[float]:
        return self.final.test_accuracy if self.final else None
