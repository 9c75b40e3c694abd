import pytest
import torch
from pydantic import ValidationError

from advsr.adaptive.providers import GradProvider
from advsr.attacks import BATCH_FUNCTIONS, run_attack
from advsr.attacks.base import draw_targets, succeeded
from advsr.attacks.config import AttackConfig
from advsr.attacks.cw2 import cw2, cw2_batch
from advsr.attacks.fakebob import fakebob, fakebob_batch
from advsr.attacks.gradient import cw_inf_batch, fgsm, fgsm_batch, pgd_batch
from advsr.attacks.pso import pso_minimize, siren_batch
from advsr.audio.waveform import quantize_pcm16
from advsr.exceptions import AttackError
from advsr.model.system import REJECT, SpeakerSystem, enroll

EPS = 0.002


class ZeroGrad(GradProvider):
    """True losses with an all-zero gradient"""

    def __init__(self, system):
        self._system = system

    @property
    def system(self):
        return self._system

    def evaluate(self, x, labels, loss_spec, targeted=False, generator=None):
        return self._system.loss(x, labels, loss_spec, targeted, generator).detach(), torch.zeros_like(x)


def _gen(seed=0):
    return torch.Generator().manual_seed(seed)


def _linf(result, w):
    return float(abs(result.adv.samples - w.samples).max())


def _predicted(model, w):
    with torch.no_grad():
        return int(SpeakerSystem(model).scores(w.to_tensor()[None]).argmax())


class TestConfig:
    def test_step_size_defaults_to_fifth_of_budget(self):
        assert AttackConfig(kind='pgd', epsilon=0.01).step_size == pytest.approx(0.002)

    def test_alpha_above_budget(self):
        with pytest.raises(ValidationError):
            AttackConfig(kind='pgd', epsilon=0.001, alpha=0.01)

    def test_odd_nes_samples(self):
        with pytest.raises(ValidationError):
            AttackConfig(kind='fakebob', m=7)

    def test_target_needs_targeted(self):
        with pytest.raises(ValidationError):
            AttackConfig(kind='fgsm', target_label=1)

    def test_labels(self):
        assert AttackConfig(kind='pgd', steps=10).label == 'PGD-10'
        assert AttackConfig(kind='cw_inf', steps=10, kappa=0.5).label == 'CWinf-10-k0.5'
        assert AttackConfig(kind='fgsm', targeted=True).label == 'FGSM-targeted'

    def test_default_losses(self):
        assert AttackConfig(kind='fgsm').loss_spec.kind == 'ce'
        assert AttackConfig(kind='cw2').loss_spec.kind == 'cw'
        assert AttackConfig(kind='fakebob').confidence == 0.5


def test_targets_avoid_ground_truth():
    labels = torch.tensor([0, 1, 2] * 20)
    targets = draw_targets(labels, 3, _gen())
    assert not torch.any(targets == labels)
    assert targets.max() < 3


class TestGradient:
    def test_fgsm_within_budget(self, model, victims):
        ws, labels = victims
        results = fgsm_batch(model, ws, labels, AttackConfig(kind='fgsm', epsilon=EPS), _gen())
        assert len(results) == len(ws)
        for r, w in zip(results, ws):
            assert _linf(r, w) <= EPS + 1e-12
            assert r.iterations == 1 and r.queries == 0

    def test_fgsm_zero_gradient_keeps_voice(self, model, victims):
        w, y = victims[0][0], victims[1][0]
        result = fgsm(ZeroGrad(SpeakerSystem(model)), w, y, AttackConfig(kind='fgsm'))
        assert result.adv == w
        assert result.distortion.l2 == 0.0

    def test_success_judged_after_storage(self, model, victims):
        ws, labels = victims
        for r, y in zip(fgsm_batch(model, ws, labels, AttackConfig(kind='fgsm', epsilon=0.01), _gen()), labels):
            assert r.success == (_predicted(model, quantize_pcm16(r.adv)) != y)

    def test_pgd_budget_and_trace(self, model, victims):
        ws, labels = victims
        cfg = AttackConfig(kind='pgd', epsilon=EPS, steps=4)
        results = pgd_batch(model, ws, labels, cfg, _gen())
        for r, w in zip(results, ws):
            assert _linf(r, w) <= EPS + 1e-12
            assert abs(r.adv.samples).max() <= 1.0
            assert len(r.loss_trace) == 4

    def test_pgd_repeats_with_seed(self, model, victims):
        ws, labels = victims
        cfg = AttackConfig(kind='pgd', epsilon=EPS, steps=3)
        a = pgd_batch(model, ws, labels, cfg, _gen(7))
        b = pgd_batch(model, ws, labels, cfg, _gen(7))
        assert all(ra.adv == rb.adv for ra, rb in zip(a, b))

    def test_pgd_raises_ce_loss(self, model, victims):
        ws, labels = victims
        cfg = AttackConfig(kind='pgd', epsilon=0.01, steps=5, random_init=False)
        results = pgd_batch(model, ws, labels, cfg, _gen())
        mean_first = sum(r.loss_trace[0] for r in results) / len(results)
        mean_final = sum(r.adv_loss for r in results) / len(results)
        assert mean_final > mean_first

    def test_cw_inf_uses_margin_loss(self, model, victims):
        ws, labels = victims
        cfg = AttackConfig(kind='cw_inf', epsilon=EPS, steps=2, kappa=0.5)
        results = cw_inf_batch(model, ws[:2], labels[:2], cfg, _gen())
        # clamped margin never drops below -kappa
        assert all(v >= -0.5 for r in results for v in r.loss_trace)

    def test_targeted_results_carry_targets(self, model, victims):
        ws, labels = victims
        results = fgsm_batch(model, ws, labels, AttackConfig(kind='fgsm', targeted=True), _gen())
        for r in results:
            assert r.targeted and r.target is not None and r.target != r.label

    def test_unequal_lengths(self, model, victims):
        w = victims[0][0]
        with pytest.raises(AttackError):
            fgsm_batch(model, [w, w.fit_length(len(w) - 1)], [0, 0], AttackConfig(kind='fgsm'))

    def test_wrong_config_kind(self, model, victims):
        with pytest.raises(AttackError):
            fgsm(model, victims[0][0], victims[1][0], AttackConfig(kind='pgd'))


class TestCW2:
    def test_already_successful_voice_is_untouched(self, model, victims):
        w = victims[0][0]
        cfg = AttackConfig(kind='cw2', targeted=True, target_label=_predicted(model, w),
                           binary_search_steps=2, max_iters=4)
        result = cw2(model, w, victims[1][0], cfg)
        assert result.adv == w
        assert result.distortion.l2 == 0.0

    def test_iteration_accounting(self, model, victims):
        ws, labels = victims
        cfg = AttackConfig(kind='cw2', binary_search_steps=3, max_iters=10, lr=1e-3)
        results = cw2_batch(model, ws[:2], labels[:2], cfg, _gen())
        # floor(10 / 3) iterations per constant
        assert all(r.iterations == 9 and len(r.loss_trace) == 9 for r in results)
        assert all(abs(r.adv.samples).max() <= 1.0 for r in results)


class TestFakebob:
    def test_query_accounting(self, model, victims):
        ws, labels = victims
        cfg = AttackConfig(kind='fakebob', m=4, kappa=100.0, iter_limit=3, epsilon=EPS)
        for r, w in zip(fakebob_batch(model, ws[:2], labels[:2], cfg, _gen()), ws):
            assert r.iterations == 3
            assert r.queries == (4 + 1) * r.iterations
            assert _linf(r, w) <= EPS + 1e-12

    def test_query_budget_stops_before_overrun(self, model, victims):
        cfg = AttackConfig(kind='fakebob', m=4, kappa=100.0, iter_limit=50, max_queries=12)
        r = fakebob(model, victims[0][0], victims[1][0], cfg, _gen())
        assert r.iterations == 2
        assert r.queries == 10

    def test_successful_start_costs_nothing(self, model, victims):
        w = victims[0][0]
        cfg = AttackConfig(kind='fakebob', targeted=True, target_label=_predicted(model, w), kappa=0.0, m=4)
        r = fakebob(model, w, victims[1][0], cfg, _gen())
        assert r.iterations == 0 and r.queries == 0
        assert r.adv == w

    def test_longer_runs_never_lose_successes(self, model, victims):
        ws, labels = victims

        def run(iter_limit):
            cfg = AttackConfig(kind='fakebob', epsilon=0.05, m=10, kappa=0.0, iter_limit=iter_limit)
            return [fakebob(model, w, y, cfg, _gen(i)) for i, (w, y) in enumerate(zip(ws[:4], labels[:4]))]

        short, long = run(1), run(8)
        # equal seeds replay the same NES draws, so the long run extends the short one
        assert all(b.iterations >= a.iterations for a, b in zip(short, long))
        assert sum(r.success for r in long) >= sum(r.success for r in short)


class TestPSO:
    def test_sphere(self):
        lo = torch.full((3,), -5.0, dtype=torch.float64)
        result = pso_minimize(lambda p: (p ** 2).sum(dim=-1), lo, -lo, swarm_size=30, iters=200,
                              inertia_start=0.7298, inertia_end=0.7298, c1=1.49618, c2=1.49618,
                              generator=_gen(0))
        assert result.best_value < 1e-3
        assert result.iterations == 200
        assert result.evaluations == 30 * 201

    def test_history_never_increases(self):
        lo = torch.full((4,), -1.0, dtype=torch.float64)
        result = pso_minimize(lambda p: ((p - 0.3) ** 2).sum(dim=-1), lo, -lo, swarm_size=10, iters=30,
                              generator=_gen(2))
        assert len(result.history) == result.iterations + 1
        assert all(b <= a for a, b in zip(result.history, result.history[1:]))

    def test_degenerate_box(self):
        point = torch.tensor([0.25, -0.5], dtype=torch.float64)
        result = pso_minimize(lambda p: p.sum(dim=-1), point, point, swarm_size=5, iters=10)
        assert torch.equal(result.best, point)
        assert result.best_value == pytest.approx(-0.25)

    def test_evaluation_budget(self):
        lo = torch.zeros(2, dtype=torch.float64)
        result = pso_minimize(lambda p: p.sum(dim=-1), lo, lo + 1, swarm_size=5, iters=100, max_evaluations=23)
        assert result.evaluations == 20
        assert result.iterations == 3

    def test_stop_condition(self):
        lo = torch.zeros(2, dtype=torch.float64)
        result = pso_minimize(lambda p: p.sum(dim=-1), lo, lo + 1, swarm_size=5, iters=100, stop=lambda v: True)
        assert result.iterations == 0 and result.history == [result.best_value]

    def test_inverted_box(self):
        with pytest.raises(AttackError):
            pso_minimize(lambda p: p.sum(dim=-1), torch.ones(2), torch.zeros(2))

    def test_siren_stays_in_budget(self, model, victims):
        ws, labels = victims
        cfg = AttackConfig(kind='siren', epsilon=EPS, swarm_size=6, pso_iters=4)
        for r, w in zip(siren_batch(model, ws[:2], labels[:2], cfg, _gen()), ws):
            assert _linf(r, w) <= EPS + 1e-12
            assert r.queries == 6 * (r.iterations + 1)
            assert r.iterations <= 4


def test_run_attack_dispatches_every_kind(model, victims):
    assert set(BATCH_FUNCTIONS) == {'fgsm', 'pgd', 'cw_inf', 'cw2', 'fakebob', 'siren'}
    ws, labels = victims
    results = run_attack(model, ws[:2], labels[:2], AttackConfig(kind='pgd', steps=2), _gen())
    assert len(results) == 2


class TestThresholdSuccess:
    @pytest.fixture(scope='class')
    def strict(self, model, corpus):
        return SpeakerSystem(model, db=enroll(model, corpus['enroll']).with_threshold(1.5), task='OSI')

    def test_rejection_counts_as_untargeted_success(self, strict, victims):
        ws, labels = victims
        results = fgsm_batch(strict, ws, labels, AttackConfig(kind='fgsm'), _gen())
        assert all(r.success for r in results)

    def test_rejected_target_is_no_success(self, strict, victims):
        ws, labels = victims
        results = fgsm_batch(strict, ws, labels, AttackConfig(kind='fgsm', targeted=True), _gen())
        assert not any(r.success for r in results)

    def test_success_follows_decisions(self, strict, victims):
        w, y = victims[0][0], victims[1][0]
        with torch.no_grad():
            scores = strict.scores(w.to_tensor()[None])
        assert strict.decisions(scores).tolist() == [REJECT]
        assert succeeded(scores, torch.tensor([y]), torch.tensor([y]), False, system=strict).item()
