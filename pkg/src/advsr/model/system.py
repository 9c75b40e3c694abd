"""
Speaker system: a model plus its defense transforms, scored either by the
classifier head (CSI-NE) or by cosine similarity against an enrollment
database (CSI-E / SV / OSI). Everything an attack differentiates goes
through SpeakerSystem.scores.
"""
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict

from advsr.audio.manifest import DatasetManifest
from advsr.audio.waveform import Waveform
from advsr.exceptions import ModelError
from advsr.logging_config import get_data_logger
from advsr.model.enrollment import EnrollmentDB, cosine_scores
from advsr.model.losses import LossSpec, check_labels, per_example_loss
from advsr.model.network import AudioNet
from advsr.transforms.base import Transform

logger = get_data_logger()

Task = Literal['CSI-NE', 'CSI-E', 'SV', 'OSI']
TASKS = ('CSI-NE', 'CSI-E', 'SV', 'OSI')
# decision index of a rejected SV / OSI trial
REJECT = -1


class SpeakerSystem:
    """Immutable (model, transforms, enrollment db, task) bundle"""

    def __init__(self, model: AudioNet, transforms: Sequence[Transform] = (),
                 db: Optional[EnrollmentDB] = None, task: Task = 'CSI-NE'):
        if task not in TASKS:
            raise ModelError(f"unknown task '{task}', expected one of {TASKS}")
        if task != 'CSI-NE' and db is None:
            raise ModelError(f"task {task} needs an enrollment database")
        if db is not None and db.dim != model.embed_dim:
            raise ModelError(f"enrollment dim {db.dim} does not match embedding dim {model.embed_dim}")
        self.model = model
        self.transforms: Tuple[Transform, ...] = tuple(transforms)
        self.db = db
        self.task = task
        self._templates = db.templates() if db is not None else None

    @property
    def speakers(self) -> List[str]:
        return self.model.speakers if self.task == 'CSI-NE' else self.db.speakers

    @property
    def n_classes(self) -> int:
        return len(self.speakers)

    @property
    def sample_rate(self) -> int:
        return self.model.sample_rate

    @property
    def randomized(self) -> bool:
        return any(t.randomized for t in self.transforms)

    def with_transforms(self, transforms: Sequence[Transform]) -> "SpeakerSystem":
        return SpeakerSystem(self.model, transforms, self.db, self.task)

    def replace_transform(self, index: int, transform: Transform) -> "SpeakerSystem":
        transforms = list(self.transforms)
        transforms[index] = transform
        return self.with_transforms(transforms)

    def transformed(self, x: torch.Tensor, generator: Optional[torch.Generator] = None):
        """Apply waveform-level transforms; returns (samples, feature taps)"""
        x = self.model.check_input(x)
        taps = {}
        for t in self.transforms:
            if t.level == 'waveform':
                x = t.apply_tensor(x, self.sample_rate, generator)
            else:
                taps[t.stage] = _chain(taps.get(t.stage), t, self.sample_rate, generator)
        return x, taps

    def embeddings(self, x: torch.Tensor, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        x, taps = self.transformed(x, generator)
        return self.model.embed(x, taps)

    def scores(self, x: torch.Tensor, generator: Optional[torch.Generator] = None) -> torch.Tensor:
        """[B, L] waveforms -> [B, S] scores through every transform"""
        x, taps = self.transformed(x, generator)
        if self.task == 'CSI-NE':
            return self.model(x, taps)
        return cosine_scores(self.model.embed(x, taps), self._templates)

    def decisions(self, scores: torch.Tensor, claimed: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Decision index per item from [B, S] scores, REJECT where SV / OSI
        falls below theta. SV accepts or rejects the claimed index.
        """
        if self.task == 'SV':
            if claimed is None:
                if self.n_classes != 1:
                    raise ModelError("speaker verification needs claimed labels")
                claimed = torch.zeros(scores.shape[0], dtype=torch.long)
            check_labels(claimed, self.n_classes)
            accepted = scores.gather(1, claimed[:, None])[:, 0] >= self.db.theta
            return torch.where(accepted, claimed, torch.full_like(claimed, REJECT))
        pred = scores.argmax(dim=1)
        if self.task == 'OSI':
            accepted = scores.max(dim=1).values >= self.db.theta
            pred = torch.where(accepted, pred, torch.full_like(pred, REJECT))
        return pred

    @torch.no_grad()
    def predict(self, x: torch.Tensor, generator: Optional[torch.Generator] = None,
                claimed: Optional[torch.Tensor] = None) -> torch.Tensor:
        """Decision per item (ties to the lowest index, REJECT below theta)"""
        return self.decisions(self.scores(x, generator), claimed)

    def loss(self, x: torch.Tensor, labels: torch.Tensor, loss_spec: LossSpec, targeted: bool = False,
             generator: Optional[torch.Generator] = None) -> torch.Tensor:
        return per_example_loss(self.scores(x, generator), labels, loss_spec, targeted)


def _chain(previous, t: Transform, sample_rate: int, generator):
    def tap(values: torch.Tensor) -> torch.Tensor:
        if previous is not None:
            values = previous(values)
        return t.apply_tensor(values, sample_rate, generator)
    return tap


def _check_rate(model: AudioNet, w: Waveform):
    if w.sample_rate != model.sample_rate:
        raise ModelError(f"waveform sample rate {w.sample_rate} does not match model rate {model.sample_rate}")


@torch.no_grad()
def forward(model: AudioNet, w: Waveform, transforms: Sequence[Transform] = ()) -> torch.Tensor:
    """Logits [n_classes] for one voice"""
    _check_rate(model, w)
    return SpeakerSystem(model, transforms).scores(w.to_tensor()[None])[0]


@torch.no_grad()
def embed(model: AudioNet, w: Waveform, transforms: Sequence[Transform] = ()) -> torch.Tensor:
    """Penultimate-layer activations [embed_dim] for one voice"""
    _check_rate(model, w)
    return SpeakerSystem(model, transforms).embeddings(w.to_tensor()[None])[0]


def loss_and_input_grad(model: AudioNet, w: Waveform, label: int, loss_spec: Optional[LossSpec] = None,
                        targeted: bool = False, system: Optional[SpeakerSystem] = None) -> Tuple[float, np.ndarray]:
    """
    Loss of one voice and its gradient with respect to the samples.

    Raises:
        ModelError: label out of range
    """
    system = system or SpeakerSystem(model)
    _check_rate(system.model, w)
    check_labels(torch.tensor([label]), system.n_classes)
    x = w.to_tensor()[None].requires_grad_(True)
    loss = system.loss(x, torch.tensor([label]), loss_spec or LossSpec(), targeted)[0]
    (grad,) = torch.autograd.grad(loss, x)
    return float(loss.detach()), grad[0].numpy()


@torch.no_grad()
def enroll(model: AudioNet, manifest: DatasetManifest, transforms: Sequence[Transform] = ()) -> EnrollmentDB:
    """Mean embedding per speaker; threshold left at -inf"""
    embeddings: Dict[str, np.ndarray] = {}
    for speaker_id, refs in manifest.entries.items():
        if not refs:
            raise ModelError(f"speaker '{speaker_id}' has no enrollment voices")
        rows = torch.stack([embed(model, manifest.resolve(ref), transforms) for ref in refs])
        embeddings[speaker_id] = rows.mean(dim=0).numpy()
    logger.info(f"Enrolled {len(embeddings)} speakers from {len(manifest)} voices")
    return EnrollmentDB(embeddings)


class Decision(BaseModel):
    model_config = ConfigDict(frozen=True)

    outcome: Optional[str]
    scores: Dict[str, float]

    @property
    def accepted(self) -> bool:
        return self.outcome is not None


def decide(task: Task, model: AudioNet, db: Optional[EnrollmentDB], w: Waveform,
           claimed: Optional[str] = None, transforms: Sequence[Transform] = ()) -> Decision:
    """
    CSI-NE: arg-max logit. CSI-E: arg-max cosine score. SV: accept the
    claimed speaker iff its score >= theta. OSI: arg-max accepted iff the
    best score >= theta. Ties go to the lowest speaker index.
    """
    if task not in TASKS:
        raise ModelError(f"unknown task '{task}', expected one of {TASKS}")
    if task != 'CSI-NE' and db is None:
        raise ModelError(f"task {task} needs an enrollment database")
    _check_rate(model, w)
    system = SpeakerSystem(model, transforms, db, 'CSI-NE' if task == 'CSI-NE' else 'CSI-E')
    with torch.no_grad():
        values = system.scores(w.to_tensor()[None])[0].numpy()
    speakers = system.speakers
    scores = {s: float(v) for s, v in zip(speakers, values)}

    if task == 'SV':
        if claimed is None:
            if len(speakers) != 1:
                raise ModelError("speaker verification needs a claimed speaker id")
            claimed = speakers[0]
        if claimed not in scores:
            raise ModelError(f"claimed speaker '{claimed}' is not enrolled")
        return Decision(outcome=claimed if scores[claimed] >= db.theta else None, scores=scores)

    best = int(np.argmax(values))
    if task == 'OSI' and values[best] < db.theta:
        return Decision(outcome=None, scores=scores)
    return Decision(outcome=speakers[best], scores=scores)


def calibrate_threshold(db: EnrollmentDB, model: AudioNet, imposter_manifest: DatasetManifest,
                        target_far: float, transforms: Sequence[Transform] = ()) -> float:
    """
    Smallest theta whose imposter acceptance rate (max score >= theta) is at
    most target_far; -inf when every imposter may be accepted.
    """
    if not 0 <= target_far <= 1:
        raise ModelError(f"target_far must lie in [0, 1], got {target_far}")
    voices = imposter_manifest.load_voices()
    if not voices:
        raise ModelError("threshold calibration needs at least one imposter voice")
    system = SpeakerSystem(model, transforms, db, 'CSI-E')
    with torch.no_grad():
        best = sorted((float(system.scores(w.to_tensor()[None])[0].max()) for _, _, w in voices), reverse=True)
    n = len(best)
    allowed = int(math.floor(target_far * n + 1e-9))
    if allowed >= n:
        return -math.inf
    theta = math.nextafter(best[allowed], math.inf)
    logger.info(f"Calibrated threshold {theta:.6f} on {n} imposter voices (target FAR {target_far})")
    return theta
