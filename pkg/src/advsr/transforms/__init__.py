from advsr.transforms.base import Transform, identity
from advsr.transforms.codec import external_codec, make_codec
from advsr.transforms.featcompress import fc, kmeans, make_fc, warped_kmeans
from advsr.transforms.fir import bpf, lpf, make_bpf, make_lpf
from advsr.transforms.gap import identity_gap
from advsr.transforms.specs import TransformSpec, build_transforms
from advsr.transforms.waveform import as_, at, ds, make_as, make_at, make_ds, make_ms, make_qt, ms, qt

__all__ = [
    'Transform', 'identity', 'external_codec', 'make_codec',
    'fc', 'kmeans', 'make_fc', 'warped_kmeans',
    'bpf', 'lpf', 'make_bpf', 'make_lpf', 'identity_gap',
    'TransformSpec', 'build_transforms',
    'as_', 'at', 'ds', 'make_as', 'make_at', 'make_ds', 'make_ms', 'make_qt', 'ms', 'qt',
]
