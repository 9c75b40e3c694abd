"""
Shared attack plumbing: providers, target labels and result assembly.
"""
from typing import List, Optional, Sequence, Union

import torch

from advsr.adaptive.providers import Exact, GradProvider
from advsr.attacks.config import AttackConfig, AttackResult
from advsr.audio.waveform import Waveform, quantize_pcm16_tensor
from advsr.exceptions import AttackError
from advsr.metrics import distortion
from advsr.model.losses import margin
from advsr.model.network import AudioNet
from advsr.model.system import SpeakerSystem

Target = Union[AudioNet, SpeakerSystem, GradProvider]


def as_provider(target: Target) -> GradProvider:
    if isinstance(target, GradProvider):
        return target
    if isinstance(target, AudioNet):
        return Exact(SpeakerSystem(target))
    if isinstance(target, SpeakerSystem):
        return Exact(target)
    raise AttackError(f"cannot attack a {type(target).__name__}")


def make_generator(cfg: AttackConfig, generator: Optional[torch.Generator] = None) -> torch.Generator:
    if generator is not None:
        return generator
    return torch.Generator().manual_seed(cfg.seed or 0)


def draw_targets(labels: torch.Tensor, n_classes: int, generator: torch.Generator) -> torch.Tensor:
    """Uniform target among the labels other than the ground truth"""
    if n_classes < 2:
        raise AttackError("targeted attacks need at least 2 classes")
    offset = torch.randint(1, n_classes, labels.shape, generator=generator)
    return (labels + offset) % n_classes


def attack_labels(cfg: AttackConfig, labels: torch.Tensor, n_classes: int,
                  generator: torch.Generator) -> torch.Tensor:
    """Labels the loss is taken against: ground truth, or targets when targeted"""
    if not cfg.targeted:
        return labels
    if cfg.target_label is not None:
        if cfg.target_label >= n_classes:
            raise AttackError(f"target label {cfg.target_label} out of range for {n_classes} classes")
        return torch.full_like(labels, cfg.target_label)
    return draw_targets(labels, n_classes, generator)


def succeeded(scores: torch.Tensor, labels: torch.Tensor, attack_against: torch.Tensor, targeted: bool,
              kappa: float = 0.0, system: Optional[SpeakerSystem] = None) -> torch.Tensor:
    """
    Decision changed (or hit the target) with margin at least kappa. With a
    system the SV / OSI threshold applies; SV claims the attacked label.
    """
    pred = system.decisions(scores, attack_against) if system is not None else scores.argmax(dim=1)
    hit = pred == attack_against if targeted else pred != labels
    if kappa > 0:
        hit = hit & (margin(scores, attack_against, targeted) <= -kappa)
    return hit


def to_batch(ws: Sequence[Waveform]) -> torch.Tensor:
    lengths = {len(w) for w in ws}
    if len(lengths) != 1:
        raise AttackError(f"batched attacks need equal-length voices, got lengths {sorted(lengths)}")
    return torch.stack([w.to_tensor() for w in ws])


def finalize(provider: GradProvider, cfg: AttackConfig, x: torch.Tensor, adv: torch.Tensor,
             labels: torch.Tensor, attack_against: torch.Tensor, traces: List[List[float]],
             iterations: Sequence[int], queries: Sequence[int], generator: torch.Generator) -> List[AttackResult]:
    """Judge every adversarial voice after storing it as 16-bit PCM"""
    system = provider.system
    sample_rate = system.sample_rate
    adv = adv.detach()
    stored = quantize_pcm16_tensor(adv)
    stored_x = quantize_pcm16_tensor(x)
    with torch.no_grad():
        pre_scores = system.scores(adv, generator)
        post_scores = system.scores(stored, generator)
        adv_loss = system.loss(adv, attack_against, cfg.loss_spec, cfg.targeted, generator)
    pre_ok = succeeded(pre_scores, labels, attack_against, cfg.targeted, system=system)
    post_ok = succeeded(post_scores, labels, attack_against, cfg.targeted, system=system)
    margins = margin(post_scores, attack_against, cfg.targeted)

    results = []
    for i in range(x.shape[0]):
        adv_w = Waveform.from_tensor(adv[i], sample_rate)
        results.append(AttackResult(
            adv=adv_w,
            label=int(labels[i]),
            target=int(attack_against[i]) if cfg.targeted else None,
            targeted=cfg.targeted,
            success=bool(post_ok[i]),
            success_pre_quant=bool(pre_ok[i]),
            iterations=int(iterations[i]),
            queries=int(queries[i]),
            loss_trace=list(traces[i]),
            adv_loss=float(adv_loss[i]),
            margin=float(margins[i]),
            distortion=distortion(x[i].numpy(), adv[i].numpy()),
            distortion_stored=distortion(stored_x[i].numpy(), stored[i].numpy()),
        ))
    return results
