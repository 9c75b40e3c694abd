"""
AudioNet-style 1-D convolutional speaker classifier.

Waveform batch -> MFCC flow -> fixed feature normalization -> conv blocks over
time -> mean pool -> embedding (penultimate layer) -> logits.
"""
from typing import List, Mapping, Optional, Sequence, Union

import torch
from torch import nn

from advsr.exceptions import ModelError
from advsr.features.config import FeatureConfig, feature_preset
from advsr.features.pipeline import TensorTap, extract_batch

DEFAULT_CHANNELS = (16, 32, 32)
DEFAULT_KERNEL = 5
DEFAULT_EMBED_DIM = 64


class AudioNet(nn.Module):
    def __init__(self, speakers: Sequence[str], feature_cfg: Optional[FeatureConfig] = None,
                 sample_rate: int = 16000, channels: Sequence[int] = DEFAULT_CHANNELS,
                 kernel_size: int = DEFAULT_KERNEL, embed_dim: int = DEFAULT_EMBED_DIM):
        super().__init__()
        if len(speakers) < 2:
            raise ModelError(f"a classifier needs at least 2 speakers, got {len(speakers)}")
        if len(set(speakers)) != len(speakers):
            raise ModelError("speaker ids must be unique")
        self.speakers: List[str] = list(speakers)
        self.feature_cfg = feature_cfg or feature_preset('audionet')
        self.sample_rate = int(sample_rate)
        self.channels = tuple(int(c) for c in channels)
        self.kernel_size = int(kernel_size)
        self.embed_dim = int(embed_dim)

        dim = self.feature_cfg.dim
        self.register_buffer('feat_mean', torch.zeros(dim, dtype=torch.float64))
        self.register_buffer('feat_std', torch.ones(dim, dtype=torch.float64))

        blocks = []
        in_ch = dim
        for out_ch in self.channels:
            blocks.append(nn.Conv1d(in_ch, out_ch, self.kernel_size, stride=2, padding=self.kernel_size // 2))
            in_ch = out_ch
        self.convs = nn.ModuleList(blocks)
        self.pool = nn.MaxPool1d(2, ceil_mode=True)
        self.embedding = nn.Linear(in_ch, self.embed_dim)
        self.classifier = nn.Linear(self.embed_dim, len(self.speakers))
        self.double()

    @property
    def n_classes(self) -> int:
        return len(self.speakers)

    def topology(self) -> dict:
        return {'channels': list(self.channels), 'kernel_size': self.kernel_size, 'embed_dim': self.embed_dim}

    @torch.no_grad()
    def fit_normalization(self, features: torch.Tensor) -> None:
        """Set the fixed per-coefficient normalization from [.., d] training features"""
        flat = features.reshape(-1, features.shape[-1]).to(torch.float64)
        self.feat_mean.copy_(flat.mean(dim=0))
        self.feat_std.copy_(torch.clamp(flat.std(dim=0, correction=0), min=1e-6))

    def features(self, x: torch.Tensor, taps: Optional[Mapping[str, TensorTap]] = None
                 ) -> Union[torch.Tensor, List[torch.Tensor]]:
        return extract_batch(x, self.feature_cfg, self.sample_rate, taps)

    def _embed_one(self, feats: torch.Tensor) -> torch.Tensor:
        """[B, N, d] -> [B, embed_dim]"""
        h = ((feats - self.feat_mean) / self.feat_std).transpose(1, 2)
        for i, conv in enumerate(self.convs):
            h = torch.relu(conv(h))
            if i == 0 and h.shape[-1] >= 2:
                h = self.pool(h)
        return torch.relu(self.embedding(h.mean(dim=-1)))

    def embed_features(self, feats: Union[torch.Tensor, List[torch.Tensor]]) -> torch.Tensor:
        if isinstance(feats, torch.Tensor):
            return self._embed_one(feats)
        return torch.cat([self._embed_one(f.unsqueeze(0)) for f in feats], dim=0)

    def check_input(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 1:
            x = x.unsqueeze(0)
        if x.dim() != 2:
            raise ModelError(f"expected waveform batch [B, L], got shape {tuple(x.shape)}")
        return x.to(torch.float64)

    def embed(self, x: torch.Tensor, taps: Optional[Mapping[str, TensorTap]] = None) -> torch.Tensor:
        return self.embed_features(self.features(self.check_input(x), taps))

    def forward(self, x: torch.Tensor, taps: Optional[Mapping[str, TensorTap]] = None) -> torch.Tensor:
        """[B, L] (or [L]) waveform batch -> [B, n_classes] logits"""
        return self.classifier(self.embed(x, taps))


def build_model(speakers: Sequence[str], feature_cfg: Optional[FeatureConfig] = None, sample_rate: int = 16000,
                seed: int = 0, **topology) -> AudioNet:
    """Construct an AudioNet with parameters drawn from a private seeded RNG"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return AudioNet(speakers, feature_cfg, sample_rate, **topology)
