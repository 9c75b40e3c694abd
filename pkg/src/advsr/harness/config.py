"""
Experiment configuration: one JSON (or YAML) document, every section strict.
"""
import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from advsr.adaptive.stack import WrapperSpec
from advsr.attacks.config import AttackConfig
from advsr.audio.synth import SyntheticSpeakerSpec
from advsr.exceptions import ConfigError
from advsr.features.config import PRESETS, FeatureConfig, feature_preset
from advsr.model.system import Task
from advsr.training.config import TrainingConfig
from advsr.transforms.specs import (
    ASSpec, ATSpec, BPFSpec, DSSpec, IdentitySpec, LPFSpec, MSSpec, QTSpec, TransformSpec,
)

MANIFEST_ROLES = ('train', 'train-test', 'enroll', 'test', 'imposter')


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetSection(_Section):
    synthetic: SyntheticSpeakerSpec = Field(default_factory=SyntheticSpeakerSpec)
    # role -> manifest path; overrides the synthetic corpus when given
    manifests: Optional[Dict[str, str]] = None
    # where synth-data writes (default <out>/data)
    dir: Optional[str] = None

    @model_validator(mode="after")
    def _roles(self):
        for role in self.manifests or {}:
            if role not in MANIFEST_ROLES:
                raise ValueError(f"unknown manifest role '{role}', expected one of {MANIFEST_ROLES}")
        if self.manifests is not None and 'train' not in self.manifests and 'test' not in self.manifests:
            raise ValueError("manifests need at least a 'train' or 'test' entry")
        return self


class ModelSection(_Section):
    features: str = 'audionet'
    feature_overrides: Dict[str, Union[int, float, bool, List[int]]] = Field(default_factory=dict)
    channels: Tuple[int, ...] = (16, 32, 32)
    kernel_size: int = Field(5, ge=1)
    embed_dim: int = Field(64, ge=1)
    checkpoint: Optional[str] = None
    task: Task = 'CSI-NE'
    # SV / OSI threshold calibrated on the imposter manifest
    target_far: Optional[float] = Field(None, ge=0, le=1)

    @model_validator(mode="after")
    def _preset(self):
        if self.features not in PRESETS:
            raise ValueError(f"unknown feature preset '{self.features}', expected one of {sorted(PRESETS)}")
        self.feature_config()
        return self

    def feature_config(self) -> FeatureConfig:
        base = feature_preset(self.features).model_dump()
        return FeatureConfig(**{**base, **self.feature_overrides})

    def topology(self) -> dict:
        return {'channels': tuple(self.channels), 'kernel_size': self.kernel_size, 'embed_dim': self.embed_dim}


class TrainingSection(TrainingConfig):
    model_config = ConfigDict(extra="forbid", frozen=True)

    adversarial: bool = False
    attack: AttackConfig = Field(default_factory=lambda: AttackConfig(kind='pgd', steps=10))
    # defenses composed before the network during (adversarial) training
    transforms: List[TransformSpec] = Field(default_factory=list)
    resume: bool = False

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(**{k: getattr(self, k) for k in TrainingConfig.model_fields})


class DefenseSpec(_Section):
    name: Optional[str] = None
    transforms: List[TransformSpec] = Field(default_factory=list)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if not self.transforms:
            return 'none'
        return '+'.join(spec.build().label for spec in self.transforms)


class AdaptiveSection(_Section):
    # outermost first; None picks BPDA / EOT from the defense's flags
    stack: Optional[List[WrapperSpec]] = None
    eot_draws: int = Field(50, ge=1)
    trials: int = Field(10, ge=1)


class SweepTarget(_Section):
    kind: Literal['qt', 'ds', 'at', 'as', 'ms', 'lpf', 'bpf', 'fc']
    param: str
    values: Optional[List[float]] = None


def _steps(start: float, stop: float, step: float) -> List[float]:
    return [float(v) for v in np.round(np.arange(start, stop + step / 2.0, step), 10)]


SWEEP_DEFAULTS: Dict[Tuple[str, str], List[float]] = {
    ('qt', 'q'): [128.0, 256.0, 512.0, 1024.0],
    ('ds', 'tau'): _steps(0.05, 0.95, 0.05),
    ('at', 'snr_db'): _steps(2, 20, 2),
    ('as', 'k'): _steps(3, 21, 2),
    ('ms', 'k'): _steps(3, 21, 2),
    ('lpf', 'f_s'): _steps(4500, 8000, 500),
    ('bpf', 'f_sl'): _steps(50, 200, 50),
    # f_su must stay below Nyquist at 16 kHz
    ('bpf', 'f_su'): _steps(5000, 7500, 500),
    ('fc', 'cl_r'): _steps(0.05, 0.95, 0.05),
}


class SweepSection(_Section):
    targets: List[SweepTarget] = Field(
        default_factory=lambda: [SweepTarget(kind=k, param=p) for k, p in SWEEP_DEFAULTS])
    attack: AttackConfig = Field(default_factory=lambda: AttackConfig(kind='fgsm'))

    @model_validator(mode="after")
    def _known(self):
        for t in self.targets:
            if t.values is None and (t.kind, t.param) not in SWEEP_DEFAULTS:
                raise ValueError(f"no default range for {t.kind}.{t.param}; give explicit values")
            if t.values is not None and not t.values:
                raise ValueError(f"empty sweep range for {t.kind}.{t.param}")
        return self


class GapSection(_Section):
    transforms: List[TransformSpec] = Field(default_factory=lambda: [
        IdentitySpec(), QTSpec(), ATSpec(), ASSpec(), MSSpec(), DSSpec(), LPFSpec(), BPFSpec(),
    ])
    max_voices: Optional[int] = Field(None, ge=1)


class OutputSection(_Section):
    dir: str = 'out'
    save_wavs: bool = True
    dump_traces: bool = False
    max_examples: Optional[int] = Field(None, ge=1)


class ExperimentConfig(_Section):
    seed: int = Field(0, ge=0)
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    model: ModelSection = Field(default_factory=ModelSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    defenses: List[DefenseSpec] = Field(default_factory=lambda: [DefenseSpec()])
    attacks: List[AttackConfig] = Field(default_factory=lambda: [AttackConfig(kind='fgsm'),
                                                                 AttackConfig(kind='pgd', steps=10)])
    adaptive: AdaptiveSection = Field(default_factory=AdaptiveSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    gap: GapSection = Field(default_factory=GapSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @property
    def out_dir(self) -> Path:
        return Path(self.output.dir)

    @property
    def data_dir(self) -> Path:
        return Path(self.dataset.dir) if self.dataset.dir else self.out_dir / 'data'

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.model.checkpoint) if self.model.checkpoint else self.out_dir / 'model.pt'

    @property
    def enrollment_path(self) -> Path:
        return self.out_dir / 'enrollment.json'


def load_config(path: Union[str, os.PathLike, None] = None, seed: Optional[int] = None,
                out: Optional[str] = None) -> ExperimentConfig:
    """
    Read and validate an experiment document; --seed / --out override the file.

    Raises:
        ConfigError: missing file, unparsable document or invalid keys / values
    """
    doc: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, 'r') as f:
                doc = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError(f"{path} must hold a mapping at the top level")
    if seed is not None:
        doc['seed'] = seed
    if out is not None:
        doc['output'] = {**(doc.get('output') or {}), 'dir': out}
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e
