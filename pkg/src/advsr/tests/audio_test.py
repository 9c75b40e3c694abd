import numpy as np
import pytest
import soundfile as sf

from advsr.audio.manifest import DatasetManifest, check_role_partition
from advsr.audio.synth import SyntheticSpeakerSpec, synth_corpus, synth_voice
from advsr.audio.waveform import Waveform, pcm16_codes, quantize_pcm16, quantize_pcm16_tensor
from advsr.audio.wav_io import read_wav, write_wav
from advsr.exceptions import AudioFormatError, ConfigError

from advsr.tests.helpers import TINY_SPEC


class TestWaveform:
    def test_rejects_out_of_range_samples(self):
        with pytest.raises(ValueError):
            Waveform([0.0, 1.5], 16000)

    def test_rejects_non_finite_samples(self):
        with pytest.raises(ValueError):
            Waveform([0.0, np.nan], 16000)

    def test_rejects_bad_sample_rate(self):
        with pytest.raises(ValueError):
            Waveform([0.0], 0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Waveform([], 16000)

    def test_samples_are_read_only(self):
        w = Waveform([0.1, 0.2], 8000)
        with pytest.raises(ValueError):
            w.samples[0] = 0.5

    def test_fit_length_crops_and_pads(self):
        w = Waveform([0.1, 0.2, 0.3], 8000)
        assert w.fit_length(2).samples.tolist() == [0.1, 0.2]
        assert w.fit_length(5).samples.tolist() == [0.1, 0.2, 0.3, 0.0, 0.0]


class TestQuantization:
    def test_rounds_half_away_from_zero(self):
        half = 0.5 / 32768.0
        assert pcm16_codes(np.array([half, -half, 1.5 / 32768.0])).tolist() == [1, -1, 2]

    def test_clamps_full_scale(self):
        assert pcm16_codes(np.array([1.0, -1.0])).tolist() == [32767, -32768]

    def test_idempotent(self, tone):
        once = quantize_pcm16(tone)
        assert quantize_pcm16(once) == once

    def test_tensor_matches_numpy(self, tone):
        expected = quantize_pcm16(tone).samples
        assert np.array_equal(quantize_pcm16_tensor(tone.to_tensor()).numpy(), expected)


class TestWavIO:
    def test_write_then_read_equals_quantized(self, tone, tmp_path):
        path = tmp_path / 'tone.wav'
        write_wav(tone, path)
        back = read_wav(path)
        assert back.sample_rate == 8000
        assert back == quantize_pcm16(tone)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / 'absent.wav')

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / 'stereo.wav'
        sf.write(str(path), np.zeros((100, 2), dtype=np.int16), 8000, subtype='PCM_16')
        with pytest.raises(AudioFormatError, match='channel count: 2'):
            read_wav(path)

    def test_24_bit_rejected(self, tmp_path):
        path = tmp_path / 'deep.wav'
        sf.write(str(path), np.zeros(100), 8000, subtype='PCM_24')
        with pytest.raises(AudioFormatError, match='bit depth'):
            read_wav(path)

    def test_garbage_header(self, tmp_path):
        path = tmp_path / 'junk.wav'
        path.write_bytes(b'definitely not a riff file')
        with pytest.raises(AudioFormatError):
            read_wav(path)


class TestSynth:
    def test_voices_are_deterministic(self):
        a = synth_voice(1, 0, 0, 0.1, 8000)
        b = synth_voice(1, 0, 0, 0.1, 8000)
        assert a == b

    def test_voices_differ(self):
        assert synth_voice(1, 0, 0, 0.1, 8000) != synth_voice(1, 0, 1, 0.1, 8000)

    def test_corpus_roles(self, corpus):
        assert set(corpus) == {'train', 'train-test', 'enroll', 'test', 'imposter'}
        assert corpus['train'].speakers == ['spk00', 'spk01', 'spk02']
        assert corpus['imposter'].speakers == ['imp00', 'imp01']
        assert len(corpus['train']) == 3 * (TINY_SPEC.voices_per_speaker - TINY_SPEC.test_count)
        assert len(corpus['test']) == 3 * TINY_SPEC.test_count
        check_role_partition(corpus)

    def test_train_and_test_voices_disjoint(self, corpus):
        train_refs = {ref for _, _, ref in corpus['train'].items()}
        test_refs = {ref for _, _, ref in corpus['test'].items()}
        assert not train_refs & test_refs

    def test_voices_land_on_pcm_grid(self, train_voices):
        _, _, w = train_voices[0]
        assert quantize_pcm16(w) == w
        assert len(w) == int(TINY_SPEC.duration_s * TINY_SPEC.sample_rate)

    def test_single_speaker_rejected(self):
        with pytest.raises(ValueError):
            synth_corpus(SyntheticSpeakerSpec(n_speakers=1, voices_per_speaker=3))

    def test_single_voice_speakers(self):
        spec = SyntheticSpeakerSpec(n_speakers=2, voices_per_speaker=1, duration_s=0.1, sample_rate=8000,
                                    n_imposters=1)
        assert spec.test_count == 0 and spec.enroll_count == 1
        corpus = synth_corpus(spec)
        assert 'test' not in corpus and 'train-test' not in corpus
        assert len(corpus['train']) == 2 and len(corpus['enroll']) == 2
        assert len(corpus['imposter']) == 1

    def test_split_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpeakerSpec(voices_per_speaker=3, n_test_per_speaker=3)


class TestManifest:
    def test_save_and_load(self, corpus, tmp_path):
        path = tmp_path / 'enroll.json'
        corpus['enroll'].save(path)
        loaded = DatasetManifest.load(path)
        assert loaded.entries == corpus['enroll'].entries
        assert loaded.role == 'enroll'

    def test_relative_paths_resolve_against_manifest(self, tone, tmp_path):
        (tmp_path / 'wav').mkdir()
        write_wav(tone, tmp_path / 'wav' / 'a.wav')
        DatasetManifest(role='test', entries={'spk': ['wav/a.wav']}).save(tmp_path / 'test.json')
        voices = DatasetManifest.load(tmp_path / 'test.json').load_voices()
        assert voices[0][0] == 'spk'
        assert voices[0][2] == quantize_pcm16(tone)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigError):
            DatasetManifest.load(tmp_path / 'none.json')

    def test_invalid_manifest(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('{"role": "nonsense", "entries": {}}')
        with pytest.raises(ConfigError):
            DatasetManifest.load(path)

    def test_imposter_overlap_rejected(self):
        enroll = DatasetManifest(role='enroll', entries={'a': ['x.wav']})
        imposter = DatasetManifest(role='imposter', entries={'a': ['y.wav']})
        with pytest.raises(ConfigError):
            check_role_partition({'enroll': enroll, 'imposter': imposter})


def test_quantize_just_above_grid_point():
    w = quantize_pcm16(Waveform([0.30000001], 16000))
    # 0.30000001 * 32768 = 9830.40...
    assert w.samples[0] == 9830 / 32768.0
