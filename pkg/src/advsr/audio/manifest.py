"""
Dataset manifests: role-tagged maps of speaker id -> voice references.

A voice reference is either a WAV path (relative paths resolve against the
manifest's directory) or a synth:// reference rendered on demand.
"""
import json
import os
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

from advsr.audio.waveform import Waveform
from advsr.audio.wav_io import read_wav
from advsr.exceptions import ConfigError
from advsr.logging_config import get_data_logger

logger = get_data_logger()

Role = Literal['enroll', 'test', 'imposter', 'train', 'train-test']


class DatasetManifest(BaseModel):
    """Role-tagged voice references per speaker"""
    model_config = ConfigDict(extra="forbid")

    role: Role
    seed: int = Field(0, ge=0)
    entries: Dict[str, List[str]]

    _base_dir: Optional[Path] = PrivateAttr(default=None)

    @field_validator('entries')
    @classmethod
    def _non_empty_entries(cls, v: Dict[str, List[str]]):
        for speaker_id, refs in v.items():
            if not refs:
                raise ValueError(f"speaker '{speaker_id}' has no voices")
        return v

    @property
    def speakers(self) -> List[str]:
        return list(self.entries)

    def __len__(self) -> int:
        return sum(len(refs) for refs in self.entries.values())

    def items(self) -> Iterator[Tuple[str, int, str]]:
        """(speaker_id, index within speaker, reference) in manifest order"""
        for speaker_id, refs in self.entries.items():
            for index, ref in enumerate(refs):
                yield speaker_id, index, ref

    def resolve(self, ref: str) -> Waveform:
        return resolve_voice(ref, self._base_dir)

    def load_voices(self) -> List[Tuple[str, int, Waveform]]:
        """Resolve every entry; raises on the first unreadable reference"""
        return [(speaker_id, index, self.resolve(ref)) for speaker_id, index, ref in self.items()]

    def save(self, path: Union[str, os.PathLike]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.model_dump(), f, indent=2, sort_keys=True)
            f.write('\n')
        logger.debug(f"Saved {self.role} manifest ({len(self)} voices) to {path}")

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "DatasetManifest":
        """
        Raises:
            ConfigError: missing or unparsable manifest file
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"manifest file not found: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                manifest = cls.model_validate(json.load(f))
        except (json.JSONDecodeError, ValueError) as e:
            raise ConfigError(f"invalid manifest {path}: {e}") from e
        manifest._base_dir = path.parent
        return manifest


def resolve_voice(ref: str, base_dir: Optional[Path] = None) -> Waveform:
    """Resolve a voice reference to a waveform"""
    # deferred: synth imports this module
    from advsr.audio.synth import SYNTH_SCHEME, resolve_synth_ref

    if ref.startswith(f"{SYNTH_SCHEME}://"):
        return resolve_synth_ref(ref)
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return read_wav(path)


def check_role_partition(manifests: Mapping[str, DatasetManifest]) -> None:
    """
    enroll and test share speaker ids; imposter ids are disjoint from enroll ids.

    Raises:
        ConfigError: the partition is violated
    """
    enroll = manifests.get('enroll')
    test = manifests.get('test')
    imposter = manifests.get('imposter')
    if enroll is not None and test is not None and set(enroll.speakers) != set(test.speakers):
        raise ConfigError("enroll and test manifests must cover the same speakers")
    if enroll is not None and imposter is not None:
        overlap = set(enroll.speakers) & set(imposter.speakers)
        if overlap:
            raise ConfigError(f"imposter speakers overlap enrolled speakers: {sorted(overlap)}")
