"""
Standard and adversarial training of AudioNet models.

Two private generators drive a run: one for shuffling and noise, one for the
attacks that craft adversarial rows. A zero adversarial ratio never touches
the second, so adv_train(ratio=0) reproduces train exactly.
"""
import time
from typing import Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from advsr.adaptive.stack import build_provider, default_stack
from advsr.attacks import BATCH_FUNCTIONS
from advsr.attacks.config import AttackConfig
from advsr.audio.manifest import DatasetManifest
from advsr.audio.waveform import Waveform
from advsr.exceptions import ModelError
from advsr.logging_config import get_training_logger, log_performance
from advsr.model.network import AudioNet
from advsr.model.system import SpeakerSystem
from advsr.training.config import EpochRecord, TrainingConfig, TrainingHistory
from advsr.transforms.base import Transform

logger = get_training_logger()

EVAL_BATCH = 64


def load_labelled(model: AudioNet, manifest: DatasetManifest,
                  crop_s: Optional[float] = None) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Voices of a manifest as a [N, L] batch with class indices of the model.

    Raises:
        ModelError: empty manifest, unknown speaker or unequal lengths
    """
    if len(manifest) == 0:
        raise ModelError(f"{manifest.role} manifest has no voices")
    unknown = [s for s in manifest.speakers if s not in model.speakers]
    if unknown:
        raise ModelError(f"speakers not known to the model: {unknown}")
    rows, labels = [], []
    for speaker_id, _, w in manifest.load_voices():
        if crop_s is not None:
            w = w.fit_length(int(round(crop_s * w.sample_rate)))
        rows.append(w.to_tensor())
        labels.append(model.speakers.index(speaker_id))
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise ModelError(f"training needs equal-length voices, got lengths {sorted(lengths)}; set crop_s")
    return torch.stack(rows), torch.tensor(labels, dtype=torch.long)


@torch.no_grad()
def accuracy_of(system: SpeakerSystem, x: torch.Tensor, y: torch.Tensor,
                generator: Optional[torch.Generator] = None) -> float:
    correct = 0
    for start in range(0, x.shape[0], EVAL_BATCH):
        batch_y = y[start:start + EVAL_BATCH]
        # SV trials claim the true speaker
        pred = system.predict(x[start:start + EVAL_BATCH], generator, claimed=batch_y)
        correct += int((pred == batch_y).sum())
    return correct / x.shape[0]


def _optimizer(model: AudioNet, cfg: TrainingConfig) -> torch.optim.Optimizer:
    if cfg.optimizer == 'sgd':
        return torch.optim.SGD(model.parameters(), lr=cfg.lr)
    return torch.optim.Adam(model.parameters(), lr=cfg.lr)


def _fit_normalization(model: AudioNet, x: torch.Tensor) -> None:
    with torch.no_grad():
        feats = model.features(x)
        if isinstance(feats, list):
            feats = torch.cat(feats, dim=0)
        model.fit_normalization(feats)


def _fit(model: AudioNet, manifest: DatasetManifest, cfg: TrainingConfig, transforms: Sequence[Transform],
         test_manifest: Optional[DatasetManifest], attack_cfg: Optional[AttackConfig],
         ratio: float) -> TrainingHistory:
    if model.n_classes < 2:
        raise ModelError("training needs at least 2 classes")
    x, y = load_labelled(model, manifest, cfg.crop_s)
    test = load_labelled(model, test_manifest, cfg.crop_s) if test_manifest is not None else None
    _fit_normalization(model, x)

    data_gen = torch.Generator().manual_seed(cfg.seed)
    attack_gen = torch.Generator().manual_seed(cfg.seed + 1)
    optimizer = _optimizer(model, cfg)
    history = TrainingHistory()
    n = x.shape[0]
    started = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        order = torch.randperm(n, generator=data_gen)
        total_loss, correct, adversarial = 0.0, 0, 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            noise = (torch.rand(xb.shape, generator=data_gen, dtype=xb.dtype) * 2.0 - 1.0) * cfg.noise_budget
            batch = torch.clamp(xb + noise, -1.0, 1.0)

            k = int(round(ratio * xb.shape[0])) if attack_cfg is not None else 0
            if k > 0:
                system = SpeakerSystem(model, transforms)
                provider = build_provider(system, default_stack(system, cfg.eot_draws))
                model.eval()
                ws = [Waveform.from_tensor(xb[i], model.sample_rate) for i in range(k)]
                results = BATCH_FUNCTIONS[attack_cfg.kind](provider, ws, yb[:k].tolist(), attack_cfg, attack_gen)
                batch = batch.clone()
                batch[:k] = torch.stack([r.adv.to_tensor() for r in results])
                adversarial += k

            model.train()
            optimizer.zero_grad()
            scores = SpeakerSystem(model, transforms).scores(batch, data_gen if transforms else None)
            loss = F.cross_entropy(scores, yb)
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * xb.shape[0]
            correct += int((scores.detach().argmax(dim=1) == yb).sum())

        model.eval()
        test_acc = None
        if test is not None:
            test_acc = accuracy_of(SpeakerSystem(model, transforms), *test, data_gen if transforms else None)
        record = EpochRecord(epoch=epoch, loss=total_loss / n, train_accuracy=correct / n,
                             test_accuracy=test_acc, adversarial_rows=adversarial)
        history.records.append(record)
        held_out = f", held-out accuracy {test_acc:.4f}" if test_acc is not None else ""
        logger.info(f"Epoch {epoch}/{cfg.epochs}: loss {record.loss:.4f}, "
                    f"train accuracy {record.train_accuracy:.4f}{held_out}")

    log_performance("training finished", epochs=cfg.epochs, examples=n, adversarial=attack_cfg is not None,
                    runtime_s=round(time.perf_counter() - started, 3))
    return history


def train(model: AudioNet, manifest: DatasetManifest, cfg: Optional[TrainingConfig] = None,
          test_manifest: Optional[DatasetManifest] = None,
          transforms: Sequence[Transform] = ()) -> Tuple[AudioNet, TrainingHistory]:
    """
    Cross-entropy training with Adam (or SGD) on noise-augmented minibatches.
    The model is updated in place and returned with its per-epoch history.
    """
    cfg = cfg or TrainingConfig()
    logger.info(f"Training on {len(manifest)} voices of {len(manifest.speakers)} speakers "
                f"for {cfg.epochs} epochs")
    return model, _fit(model, manifest, cfg, transforms, test_manifest, None, 0.0)


def adv_train(model: AudioNet, manifest: DatasetManifest, attack_cfg: Optional[AttackConfig] = None,
              ratio: Optional[float] = None, cfg: Optional[TrainingConfig] = None,
              test_manifest: Optional[DatasetManifest] = None,
              transforms: Sequence[Transform] = ()) -> Tuple[AudioNet, TrainingHistory]:
    """
    Training where the first ratio-share of every shuffled minibatch is
    replaced by adversarial voices crafted against the current parameters
    (PGD-10 by default). With transforms, attacks go through the defended
    system with BPDA for non-differentiable and EOT for randomized ones.
    """
    cfg = cfg or TrainingConfig()
    attack_cfg = attack_cfg or AttackConfig(kind='pgd', steps=10)
    ratio = cfg.ratio if ratio is None else ratio
    if not 0 <= ratio <= 1:
        raise ModelError(f"adversarial ratio must lie in [0, 1], got {ratio}")
    logger.info(f"Adversarial training with {attack_cfg.label} at ratio {ratio} "
                f"({len(transforms)} transforms)")
    return model, _fit(model, manifest, cfg, transforms, test_manifest, attack_cfg, ratio)


