"""
Constants and builders shared by the test modules.
"""
from advsr.audio.synth import SyntheticSpeakerSpec
from advsr.features.config import feature_preset
from advsr.model.network import build_model
from advsr.training.config import TrainingConfig

TINY_SPEC = SyntheticSpeakerSpec(n_speakers=3, voices_per_speaker=6, duration_s=0.25,
                                 sample_rate=8000, seed=3, n_imposters=2)
TINY_TOPOLOGY = {'channels': (8, 8, 8), 'kernel_size': 3, 'embed_dim': 16}
TINY_TRAINING = TrainingConfig(epochs=8, batch_size=4, lr=1e-2, crop_s=None, seed=0)


def fresh_model(corpus, seed: int = 0):
    return build_model(corpus['train'].speakers, feature_preset('default'), TINY_SPEC.sample_rate,
                       seed=seed, **TINY_TOPOLOGY)
