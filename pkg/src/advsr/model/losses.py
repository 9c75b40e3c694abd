"""
Attack / training losses over score matrices [B, S].
"""
from typing import Literal

import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field

from advsr.exceptions import ModelError


class LossSpec(BaseModel):
    """ce = cross-entropy; cw = clamped logit margin with confidence kappa"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal['ce', 'cw'] = 'ce'
    kappa: float = Field(0.0, ge=0)

    def ascends(self, targeted: bool) -> bool:
        """True when an attack should increase this loss"""
        return self.kind == 'ce' and not targeted


def check_labels(labels: torch.Tensor, n_classes: int) -> None:
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= n_classes):
        raise ModelError(f"label out of range for {n_classes} classes: {labels.tolist()}")


def _best_other(scores: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    masked = scores.masked_fill(F.one_hot(labels, scores.shape[1]).bool(), float('-inf'))
    return masked.max(dim=1).values


def margin(scores: torch.Tensor, labels: torch.Tensor, targeted: bool = False) -> torch.Tensor:
    """
    Untargeted: Z_y - max_{i!=y} Z_i. Targeted (labels are targets):
    max_{i!=t} Z_i - Z_t. The attack has succeeded once this is negative.
    """
    own = scores.gather(1, labels[:, None]).squeeze(1)
    other = _best_other(scores, labels)
    return other - own if targeted else own - other


def per_example_loss(scores: torch.Tensor, labels: torch.Tensor, spec: LossSpec,
                     targeted: bool = False) -> torch.Tensor:
    check_labels(labels, scores.shape[1])
    if spec.kind == 'ce':
        return F.cross_entropy(scores, labels, reduction='none')
    return torch.clamp(margin(scores, labels, targeted), min=-spec.kappa)
