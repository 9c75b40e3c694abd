from itertools import combinations

import numpy as np
import pytest
import torch
from pydantic import TypeAdapter, ValidationError

from advsr.audio.waveform import Waveform, quantize_pcm16
from advsr.exceptions import CodecError, TransformError
from advsr.features.config import FeatureConfig
from advsr.features.ops import mfcc
from advsr.transforms.base import Transform, identity
from advsr.transforms.codec import external_codec
from advsr.transforms.featcompress import _segment_costs, fc, kmeans, make_fc, n_clusters, warped_kmeans
from advsr.transforms.fir import bandpass_taps, lowpass_taps, make_bpf, numtaps_for
from advsr.transforms.gap import identity_gap
from advsr.transforms.specs import TransformSpec, build_transforms
from advsr.transforms.waveform import as_, at, ds, make_at, make_qt, ms, qt
from advsr.transforms import bpf, lpf


def _power(samples: np.ndarray) -> float:
    return float(np.mean(samples ** 2))


def _tone(freq: float, n: int = 4000, rate: int = 8000, amp: float = 0.5) -> Waveform:
    t = np.arange(n) / rate
    return Waveform(amp * np.sin(2 * np.pi * freq * t), rate)


class TestQuantize:
    def test_output_on_q_grid(self, tone):
        out = qt(tone, q=256)
        codes = np.round(out.samples * 32768.0)
        assert np.all(np.mod(codes, 256) == 0)

    def test_q1_keeps_pcm_voices(self, tone):
        stored = quantize_pcm16(tone)
        assert qt(stored, q=1) == stored

    def test_rejects_non_positive_q(self):
        with pytest.raises(TransformError):
            make_qt(0)

    def test_flags(self):
        t = make_qt(512)
        assert not t.differentiable and not t.randomized


class TestNoise:
    def test_snr_close_to_requested(self, tone):
        out = at(tone, snr_db=10.0, rng=1)
        noise = out.samples - tone.samples
        measured = 10 * np.log10(_power(tone.samples) / _power(noise))
        assert abs(measured - 10.0) < 0.5

    def test_seeded_draws_repeat(self, tone):
        assert at(tone, 16.0, rng=4) == at(tone, 16.0, rng=4)
        assert at(tone, 16.0, rng=4) != at(tone, 16.0, rng=5)

    def test_generator_driven(self, tone):
        a = at(tone, 16.0, rng=torch.Generator().manual_seed(9))
        b = at(tone, 16.0, rng=torch.Generator().manual_seed(9))
        assert a == b

    def test_all_zero_input_rejected(self):
        with pytest.raises(TransformError):
            at(Waveform(np.zeros(100), 8000), 16.0)

    def test_flags(self):
        t = make_at()
        assert t.differentiable and t.randomized


class TestSmoothing:
    def test_mean_k1_is_identity(self, tone):
        assert np.allclose(as_(tone, 1).samples, tone.samples)

    def test_constant_signal_unchanged(self):
        w = Waveform(np.full(64, 0.25), 8000)
        assert np.allclose(as_(w, 9).samples, w.samples)
        assert np.allclose(ms(w, 9).samples, w.samples)

    def test_median_removes_spike(self):
        samples = np.zeros(64)
        samples[30] = 0.9
        assert np.allclose(ms(Waveform(samples, 8000), 3).samples, 0.0)

    def test_even_kernel_rejected(self, tone):
        with pytest.raises(TransformError):
            as_(tone, 4)
        with pytest.raises(TransformError):
            ms(tone, 2)


class TestDownsample:
    def test_tau_one_is_identity(self, tone):
        assert np.allclose(ds(tone, 1.0).samples, tone.samples)

    def test_keeps_length_and_low_frequencies(self, tone):
        out = ds(tone, 0.5)
        assert len(out) == len(tone)
        middle = slice(500, 3500)
        assert _power(out.samples[middle]) > 0.8 * _power(tone.samples[middle])

    def test_bad_ratio(self, tone):
        with pytest.raises(TransformError):
            ds(tone, 0.0)


class TestFilters:
    def test_numtaps_is_odd(self):
        assert numtaps_for(500, 8000) % 2 == 1

    def test_lowpass_passes_and_stops(self):
        middle = slice(500, 3500)
        low, high = _tone(440.0), _tone(3500.0)
        assert _power(lpf(low, 1000.0, 1500.0).samples[middle]) > 0.9 * _power(low.samples[middle])
        assert _power(lpf(high, 1000.0, 1500.0).samples[middle]) < 0.01 * _power(high.samples[middle])

    def test_bandpass_stops_both_sides(self):
        middle = slice(500, 3500)
        for freq in (60.0, 3800.0):
            w = _tone(freq)
            out = bpf(w, f_pl=500.0, f_pu=2500.0, f_sl=250.0, f_su=3000.0)
            assert _power(out.samples[middle]) < 0.05 * _power(w.samples[middle])
        w = _tone(1000.0)
        out = bpf(w, f_pl=500.0, f_pu=2500.0, f_sl=250.0, f_su=3000.0)
        assert _power(out.samples[middle]) > 0.9 * _power(w.samples[middle])

    def test_edges_validated_against_nyquist(self, tone):
        with pytest.raises(TransformError):
            lowpass_taps(4000.0, 4500.0, 8000)
        with pytest.raises(TransformError):
            bandpass_taps(150.0, 300.0, 3000.0, 4000.0, 8000)
        # default band-pass stop edge lies above the 4 kHz Nyquist limit
        with pytest.raises(TransformError):
            make_bpf()(tone)

    def test_edge_order(self):
        with pytest.raises(TransformError):
            make_bpf(300.0, 150.0, 4000.0, 6000.0)


class TestFeatCompress:
    @pytest.fixture
    def feats(self, tone):
        return mfcc(tone, FeatureConfig())

    def test_cluster_count(self):
        assert n_clusters(48, 0.2) == 10
        assert n_clusters(3, 0.01) == 1
        with pytest.raises(TransformError):
            n_clusters(10, 0.0)

    def test_kmeans_keeps_shape(self, feats):
        out = fc(feats, 'kmeans', 0.2, rng=0)
        assert out.values.shape == feats.values.shape
        assert out.stage == feats.stage
        assert torch.unique(out.values, dim=0).shape[0] <= 10

    def test_kmeans_seeded(self, feats):
        assert torch.equal(fc(feats, 'kmeans', 0.2, rng=3).values, fc(feats, 'kmeans', 0.2, rng=3).values)

    def test_kmeans_sse_never_increases(self, feats):
        _, trace = kmeans(feats.values, 6, torch.Generator().manual_seed(0))
        assert all(b <= a * (1 + 1e-9) for a, b in zip(trace, trace[1:]))

    def test_warped_clusters_are_contiguous(self, feats):
        labels, trace = warped_kmeans(feats.values, 7)
        assert torch.all(labels[1:] >= labels[:-1])
        assert torch.unique(labels).tolist() == list(range(7))
        assert all(b <= a for a, b in zip(trace, trace[1:]))

    def test_full_ratio_is_identity(self, feats):
        assert torch.equal(fc(feats, 'warped-kmeans', 1.0).values, feats.values)

    def test_gradient_flows_through_means(self, feats):
        values = feats.values.clone().requires_grad_(True)
        t = make_fc('origin', 'kmeans', 0.3, rng_seed=0)
        t.apply_tensor(values, 8000).sum().backward()
        assert torch.allclose(values.grad, torch.ones_like(values))

    def test_unknown_method(self):
        with pytest.raises(TransformError):
            make_fc(method='spectral')

    def test_feature_transform_rejects_waveform(self, tone):
        with pytest.raises(TransformError):
            make_fc()(tone)


class TestCodec:
    def test_copy_round_trip(self, tone):
        assert external_codec(tone, 'cp {in} {out}') == quantize_pcm16(tone)

    def test_failing_command(self, tone):
        with pytest.raises(CodecError) as info:
            external_codec(tone, 'false {in} {out}')
        assert info.value.returncode == 1

    def test_missing_command(self, tone):
        with pytest.raises(CodecError):
            external_codec(tone, 'no-such-codec-binary {in} {out}')

    def test_placeholders_required(self, tone):
        with pytest.raises(CodecError):
            external_codec(tone, 'cp {in} /tmp/x.wav')


class TestGap:
    def test_identity_has_zero_gap(self, tone):
        assert identity_gap(identity(), [tone, tone]) == 0.0

    def test_quantization_gap_positive(self, tone):
        assert identity_gap(make_qt(512), [tone]) > 0.0

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            identity_gap(identity(), [])

    def test_feature_transform_rejected(self, tone):
        with pytest.raises(TransformError):
            identity_gap(make_fc(), [tone])


class TestSpecs:
    adapter = TypeAdapter(TransformSpec)

    def test_builds_from_mappings(self):
        specs = [self.adapter.validate_python(d) for d in (
            {'kind': 'qt', 'q': 256}, {'kind': 'ms'}, {'kind': 'fc', 'stage': 'delta', 'method': 'warped-kmeans'})]
        ts = build_transforms(specs)
        assert [t.name for t in ts] == ['qt', 'ms', 'fc']
        assert ts[0].params == {'q': 256}
        assert ts[1].params == {'k': 7}
        assert ts[2].stage == 'delta' and ts[2].level == 'feature'

    def test_even_kernel_rejected(self):
        with pytest.raises(ValidationError):
            self.adapter.validate_python({'kind': 'as', 'k': 4})

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            self.adapter.validate_python({'kind': 'reverb'})

    def test_extra_keys_rejected(self):
        with pytest.raises(ValidationError):
            self.adapter.validate_python({'kind': 'qt', 'q': 4, 'gain': 2})


def test_transform_shape_change_rejected(tone):
    t = Transform('trim', {}, lambda x, sr, g: x[..., :10], differentiable=True, randomized=False)
    with pytest.raises(TransformError):
        t.apply_tensor(tone.to_tensor(), 8000)


def test_label_lists_params():
    assert make_qt(256).label == 'qt(q=256)'
    assert make_fc('delta', 'kmeans', 0.1).label == 'fc@delta(method=kmeans,cl_r=0.1)'


def test_median_hand_example():
    out = ms(Waveform([0.1, 0.9, 0.2], 8000), 3)
    assert np.allclose(out.samples, [0.1, 0.2, 0.2])


def test_downsampling_keeps_low_tone_and_removes_high_tone():
    middle = slice(1000, 7000)
    low = _tone(100.0, n=8000, rate=16000)
    err = ds(low, 0.45).samples[middle] - low.samples[middle]
    assert np.linalg.norm(err) < 0.05 * np.linalg.norm(low.samples[middle])
    high = _tone(7000.0, n=8000, rate=16000)
    assert _power(ds(high, 0.45).samples[middle]) < 0.1 * _power(high.samples[middle])


def test_lowpass_default_attenuates_6khz_by_20db():
    middle = slice(1000, 7000)
    w = _tone(6000.0, n=8000, rate=16000)
    assert _power(lpf(w).samples[middle]) <= 0.01 * _power(w.samples[middle])


def test_warped_kmeans_hand_example():
    points = torch.tensor([[0.0], [0.0], [0.0], [10.0], [10.0], [10.0]], dtype=torch.float64)
    labels, _ = warped_kmeans(points, 2)
    assert labels.tolist() == [0, 0, 0, 1, 1, 1]
    out = make_fc('origin', 'warped-kmeans', 2 / 6).apply_tensor(points, 0)
    assert out.flatten().tolist() == [0.0, 0.0, 0.0, 10.0, 10.0, 10.0]


def _brute_force_sse(values: np.ndarray, k: int) -> float:
    n = len(values)
    best = np.inf
    for cuts in combinations(range(1, n), k - 1):
        bounds = (0, *cuts, n)
        sse = sum(((values[a:b] - values[a:b].mean()) ** 2).sum() for a, b in zip(bounds[:-1], bounds[1:]))
        best = min(best, sse)
    return best


def test_warped_kmeans_matches_exhaustive_search():
    rng = np.random.default_rng(0)
    for _ in range(25):
        n = int(rng.integers(3, 9))
        k = int(rng.integers(2, min(3, n - 1) + 1))
        values = rng.normal(size=n)
        labels, _ = warped_kmeans(torch.as_tensor(values[:, None]), k)
        found = sum(((values[labels.numpy() == j] - values[labels.numpy() == j].mean()) ** 2).sum()
                    for j in range(k))
        assert found == pytest.approx(_brute_force_sse(values, k), abs=1e-9)


def test_quantization_gap_grows_with_q(test_voices):
    corpus = [w for _, _, w in test_voices]
    assert identity_gap(make_qt(128), corpus) <= identity_gap(make_qt(1024), corpus)


def test_default_quantization_is_closer_to_identity_than_noise(test_voices):
    corpus = [w for _, _, w in test_voices]
    assert identity_gap(make_qt(512), corpus) < identity_gap(make_at(16.0), corpus)


def test_segment_costs_match_direct_sse():
    points = np.random.default_rng(4).normal(size=(12, 3)) + 100.0
    costs = _segment_costs(points)
    for i in range(13):
        for j in range(13):
            if j <= i:
                assert costs[i, j] == np.inf
            else:
                segment = points[i:j]
                expected = ((segment - segment.mean(axis=0)) ** 2).sum()
                assert costs[i, j] == pytest.approx(expected, rel=1e-9, abs=1e-9)
