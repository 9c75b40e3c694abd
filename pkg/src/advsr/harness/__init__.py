from advsr.harness.config import (
    SWEEP_DEFAULTS, AdaptiveSection, DatasetSection, DefenseSpec, ExperimentConfig, GapSection, ModelSection,
    OutputSection, SweepSection, SweepTarget, TrainingSection, load_config,
)
from advsr.harness.results import GapRow, ResultRow, SweepRow, write_csv, write_summary, write_trace
from advsr.harness.runner import COMMANDS, ExperimentRunner, cell_seed, run_command

__all__ = [
    'SWEEP_DEFAULTS', 'AdaptiveSection', 'DatasetSection', 'DefenseSpec', 'ExperimentConfig', 'GapSection',
    'ModelSection', 'OutputSection', 'SweepSection', 'SweepTarget', 'TrainingSection', 'load_config',
    'GapRow', 'ResultRow', 'SweepRow', 'write_csv', 'write_summary', 'write_trace',
    'COMMANDS', 'ExperimentRunner', 'cell_seed', 'run_command',
]
