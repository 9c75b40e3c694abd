"""
FeatureMatrix: N frames x d coefficients at a named flow stage.
"""
import csv
import os
from typing import Optional, Sequence, Union

import numpy as np
import torch

from advsr.exceptions import FeatureError
from advsr.features.config import STAGES


class FeatureMatrix:
    """Frame-major feature values (float64 tensor, may carry autograd history)"""

    __slots__ = ("values", "stage", "frame_times")

    def __init__(self, values: torch.Tensor, stage: str, frame_times: Optional[Sequence[int]] = None):
        if stage not in STAGES:
            raise FeatureError(f"unknown feature stage '{stage}'")
        if values.dim() != 2 or values.shape[0] < 1:
            raise FeatureError(f"feature matrix must be N x d with N >= 1, got shape {tuple(values.shape)}")
        if not bool(torch.isfinite(values).all()):
            raise FeatureError(f"non-finite values in {stage} features")
        if frame_times is None:
            frame_times = list(range(values.shape[0]))
        if len(frame_times) != values.shape[0]:
            raise FeatureError(f"{len(frame_times)} frame times for {values.shape[0]} frames")
        self.values = values
        self.stage = stage
        self.frame_times = [int(t) for t in frame_times]

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: torch.Tensor, stage: Optional[str] = None) -> "FeatureMatrix":
        return FeatureMatrix(values, stage or self.stage, self.frame_times)

    def to_numpy(self) -> np.ndarray:
        return self.values.detach().cpu().numpy()

    def to_csv(self, path: Union[str, os.PathLike]) -> None:
        """One frame per row, preceded by its start sample"""
        values = self.to_numpy()
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['frame_start'] + [f"c{j}" for j in range(self.dim)])
            for start, row in zip(self.frame_times, values):
                writer.writerow([start] + [repr(float(v)) for v in row])

    def __repr__(self) -> str:
        return f"FeatureMatrix(stage={self.stage}, shape=({self.n_frames}, {self.dim}))"
