from advsr.audio.waveform import PCM16_SCALE, Waveform, pcm16_codes, quantize_pcm16, quantize_pcm16_tensor
from advsr.audio.wav_io import read_wav, write_wav
from advsr.audio.manifest import DatasetManifest, check_role_partition, resolve_voice
from advsr.audio.synth import SyntheticSpeakerSpec, synth_corpus, synth_voice

__all__ = [
    'PCM16_SCALE', 'Waveform', 'pcm16_codes', 'quantize_pcm16', 'quantize_pcm16_tensor',
    'read_wav', 'write_wav',
    'DatasetManifest', 'check_role_partition', 'resolve_voice',
    'SyntheticSpeakerSpec', 'synth_corpus', 'synth_voice',
]
