"""
Identity-approximation gap: how far a waveform transform moves clean voices.
"""
from typing import Optional, Sequence

import numpy as np

from advsr.audio.waveform import Waveform
from advsr.exceptions import TransformError
from advsr.transforms.base import Transform


def identity_gap(t: Transform, corpus: Sequence[Waveform], seed: Optional[int] = 0) -> float:
    """Mean L2 distance between each voice and its transformed version"""
    if t.level != 'waveform':
        raise TransformError(f"identity gap needs a waveform-level transform, got {t.label}")
    if len(corpus) == 0:
        raise ValueError("identity gap of an empty corpus is undefined")
    gaps = []
    for i, w in enumerate(corpus):
        out = t(w, seed=None if seed is None else seed + i)
        gaps.append(float(np.linalg.norm(w.samples - out.samples)))
    return float(np.mean(gaps))
