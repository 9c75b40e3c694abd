import math
from types import SimpleNamespace

import numpy as np
import pytest
from pydantic import ValidationError

from advsr.audio.waveform import Waveform
from advsr.metrics import EvalReport, accuracy, asr, distortion, r1, summarize_distortion


def _result(success, targeted=False):
    return SimpleNamespace(success=success, targeted=targeted)


class TestDistortion:
    def test_norms(self):
        report = distortion([0.5, 0.5, 0.0, 0.0], [0.5, 0.2, 0.4, 0.0])
        assert report.l0 == 2
        assert report.l1 == pytest.approx(0.7)
        assert report.l2 == pytest.approx(0.5)
        assert report.linf == pytest.approx(0.4)
        assert report.snr_db == pytest.approx(10 * math.log10(0.5 / 0.25))

    def test_zero_perturbation(self):
        w = Waveform([0.1, -0.2], 8000)
        report = distortion(w, w)
        assert report.l2 == 0.0 and report.snr_db == math.inf

    def test_silent_reference(self):
        assert distortion([0.0, 0.0], [0.1, 0.0]).snr_db == -math.inf

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            distortion([0.0, 0.0], [0.0])

    def test_summary_skips_infinite_snr(self):
        reports = [distortion([0.5, 0.5], [0.5, 0.5]), distortion([0.5, 0.5], [0.4, 0.5])]
        summary = summarize_distortion(reports)
        assert summary['l2_mean'] == pytest.approx(0.05)
        assert summary['snr_mean'] == pytest.approx(reports[1].snr_db)

    def test_empty_summary(self):
        assert all(math.isnan(v) for v in summarize_distortion([]).values())


class TestRates:
    def test_asr(self):
        assert asr([_result(True), _result(False), _result(True), _result(True)]) == 0.75

    def test_asr_mode_checked(self):
        with pytest.raises(ValueError):
            asr([_result(True, targeted=True)], mode='untargeted')
        with pytest.raises(ValueError):
            asr([_result(True)], mode='sideways')

    def test_asr_empty(self):
        with pytest.raises(ValueError):
            asr([])

    def test_accuracy(self):
        assert accuracy(np.array([True, False, True, True])) == 0.75
        with pytest.raises(ValueError):
            accuracy([])

    def test_r1(self):
        assert r1(0.9, 0.3) == pytest.approx(0.45)
        assert r1(0.0, 0.0) == 0.0
        assert r1(1.0, 1.0) == 1.0
        with pytest.raises(ValueError):
            r1(1.2, 0.5)


class TestEvalReport:
    def test_build_averages_attacks(self):
        report = EvalReport.build(0.8, {'FGSM': 0.6, 'PGD-10': 0.2}, {'FGSM': 0.25, 'PGD-10': 0.75})
        assert report.a_a_mean == pytest.approx(0.4)
        assert report.r1 == pytest.approx(r1(0.8, 0.4))

    def test_no_attacks(self):
        assert EvalReport.build(0.8, {}, {}).r1 == 0.0

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            EvalReport(a_b=0.5, a_a={'FGSM': 1.5}, asr={})


def test_snr_reference_cases():
    signal = np.array([0.5, -0.5, 0.25])
    assert distortion(signal, 2 * signal).snr_db == pytest.approx(0.0, abs=1e-12)
    assert distortion(signal, 1.1 * signal).snr_db == pytest.approx(20.0, abs=1e-9)


def test_r1_of_weak_defense():
    assert r1(0.998, 0.0488) == pytest.approx(0.093, abs=0.002)
