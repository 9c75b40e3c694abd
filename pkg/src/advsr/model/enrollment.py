"""
Enrollment database and cosine scoring.
"""
import json
import math
import os
from pathlib import Path
from typing import Dict, List, Mapping, Union

import numpy as np
import torch

from advsr.exceptions import ConfigError, ModelError

THETA_KEY = 'theta'
NORM_EPS = 1e-12


def score_coss(e1, e2) -> float:
    """Cosine similarity of two embeddings"""
    a = np.asarray(e1.detach().cpu() if isinstance(e1, torch.Tensor) else e1, dtype=np.float64).ravel()
    b = np.asarray(e2.detach().cpu() if isinstance(e2, torch.Tensor) else e2, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ModelError(f"embedding dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ModelError("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def cosine_scores(embeddings: torch.Tensor, templates: torch.Tensor) -> torch.Tensor:
    """[B, D] x [S, D] -> [B, S] cosine similarities (differentiable)"""
    e = embeddings / (embeddings.norm(dim=1, keepdim=True) + NORM_EPS)
    t = templates / (templates.norm(dim=1, keepdim=True) + NORM_EPS)
    return e @ t.T


class EnrollmentDB:
    """Speaker id -> enrollment embedding, plus the SV/OSI threshold"""

    def __init__(self, embeddings: Mapping[str, Union[np.ndarray, List[float]]], theta: float = -math.inf):
        if not embeddings:
            raise ModelError("enrollment database needs at least one speaker")
        if THETA_KEY in embeddings:
            raise ModelError(f"'{THETA_KEY}' is reserved and cannot be a speaker id")
        rows = {k: np.asarray(v, dtype=np.float64).ravel() for k, v in embeddings.items()}
        dims = {r.shape[0] for r in rows.values()}
        if len(dims) != 1:
            raise ModelError(f"enrollment embeddings have mixed dimensions {sorted(dims)}")
        if math.isnan(theta) or theta == math.inf:
            raise ModelError(f"invalid threshold {theta}")
        self._speakers: List[str] = list(rows)
        self._matrix = np.stack([rows[s] for s in self._speakers])
        self._matrix.setflags(write=False)
        self.theta = float(theta)

    @property
    def speakers(self) -> List[str]:
        return list(self._speakers)

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def __len__(self) -> int:
        return len(self._speakers)

    def embedding(self, speaker_id: str) -> np.ndarray:
        try:
            return self._matrix[self._speakers.index(speaker_id)]
        except ValueError:
            raise ModelError(f"speaker '{speaker_id}' is not enrolled") from None

    def templates(self) -> torch.Tensor:
        return torch.as_tensor(self._matrix.copy(), dtype=torch.float64)

    def with_threshold(self, theta: float) -> "EnrollmentDB":
        return EnrollmentDB(dict(zip(self._speakers, self._matrix)), theta)

    def to_json(self) -> Dict:
        doc = {s: row.tolist() for s, row in zip(self._speakers, self._matrix)}
        doc[THETA_KEY] = None if math.isinf(self.theta) else self.theta
        return doc

    def save(self, path: Union[str, os.PathLike]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_json(), f)

    @classmethod
    def from_json(cls, doc: Mapping) -> "EnrollmentDB":
        doc = dict(doc)
        theta = doc.pop(THETA_KEY, None)
        return cls(doc, -math.inf if theta is None else float(theta))

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "EnrollmentDB":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"enrollment database not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_json(json.load(f))
