from advsr.features.config import PRESETS, STAGES, FeatureConfig, feature_preset
from advsr.features.matrix import FeatureMatrix
from advsr.features.ops import add_deltas, cmvn, frame_signal, mfcc, vad
from advsr.features.pipeline import extract, extract_batch, pipeline, stage_matrices

__all__ = [
    'PRESETS', 'STAGES', 'FeatureConfig', 'feature_preset', 'FeatureMatrix',
    'add_deltas', 'cmvn', 'frame_signal', 'mfcc', 'vad',
    'extract', 'extract_batch', 'pipeline', 'stage_matrices',
]
