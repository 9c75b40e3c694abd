"""
Shared fixtures: a tiny synthetic corpus at 8 kHz and a model trained on it.
"""
import numpy as np
import pytest
import torch

from advsr.audio.synth import synth_corpus
from advsr.audio.waveform import Waveform
from advsr.logging_config import log_manager
from advsr.training.trainer import train

from advsr.tests.helpers import TINY_SPEC, TINY_TRAINING, fresh_model


@pytest.fixture(scope='session')
def corpus():
    return synth_corpus(TINY_SPEC)


@pytest.fixture(scope='session')
def train_voices(corpus):
    return corpus['train'].load_voices()


@pytest.fixture(scope='session')
def test_voices(corpus):
    return corpus['test'].load_voices()


@pytest.fixture(scope='session')
def trained(corpus):
    """(model, history) after a short standard training run"""
    model, history = train(fresh_model(corpus), corpus['train'], TINY_TRAINING, corpus['test'])
    model.eval()
    return model, history


@pytest.fixture(scope='session')
def model(trained):
    return trained[0]


@pytest.fixture(scope='session')
def victims(test_voices, model):
    """Test voices with their class indices"""
    ws = [w for _, _, w in test_voices]
    labels = [model.speakers.index(s) for s, _, _ in test_voices]
    return ws, labels


@pytest.fixture
def tone():
    """Half a second of a 440 Hz tone at 8 kHz"""
    t = np.arange(4000) / 8000.0
    return Waveform(0.5 * np.sin(2 * np.pi * 440.0 * t), 8000)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture
def console_logging():
    """Restore console-only logging after a test reconfigures it"""
    yield
    log_manager.configure(base_dir=None, console_level=None)
