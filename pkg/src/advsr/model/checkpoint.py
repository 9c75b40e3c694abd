"""
Single-file model checkpoints (torch.save of plain containers and tensors).
"""
import os
from pathlib import Path
from typing import Union

import torch

from advsr.exceptions import ConfigError, ModelError
from advsr.features.config import FeatureConfig
from advsr.logging_config import get_training_logger
from advsr.model.network import AudioNet

logger = get_training_logger()

FORMAT_VERSION = 1


def save_checkpoint(model: AudioNet, path: Union[str, os.PathLike]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        'format_version': FORMAT_VERSION,
        'speakers': list(model.speakers),
        'sample_rate': model.sample_rate,
        'feature_cfg': model.feature_cfg.model_dump(),
        'topology': model.topology(),
        'state_dict': {k: v.detach().clone() for k, v in model.state_dict().items()},
    }, path)
    logger.info(f"Saved checkpoint ({model.n_classes} speakers) to {path}")


def load_checkpoint(path: Union[str, os.PathLike]) -> AudioNet:
    """
    Raises:
        ConfigError: file missing
        ModelError: unknown format version or mismatched parameters
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location='cpu', weights_only=True)
    version = payload.get('format_version')
    if version != FORMAT_VERSION:
        raise ModelError(f"unsupported checkpoint format version {version} in {path}")
    model = AudioNet(payload['speakers'], FeatureConfig(**payload['feature_cfg']),
                     payload['sample_rate'], **payload['topology'])
    try:
        model.load_state_dict(payload['state_dict'])
    except RuntimeError as e:
        raise ModelError(f"checkpoint parameters do not match the topology: {e}") from e
    model.eval()
    return model
