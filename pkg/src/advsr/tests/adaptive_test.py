import pytest
import torch

from advsr.adaptive.nes import NES, QueryCounter, nes_grad
from advsr.adaptive.providers import BPDA, EOT, Exact, bpda_all, bpda_transform
from advsr.adaptive.stack import WrapperSpec, build_provider, default_stack
from advsr.exceptions import AttackError, ConfigError
from advsr.model.losses import LossSpec
from advsr.model.system import SpeakerSystem
from advsr.transforms.waveform import make_at, make_ms, make_qt, qt_tensor

CE = LossSpec()


@pytest.fixture(scope='module')
def batch(victims):
    ws, labels = victims
    return torch.stack([w.to_tensor() for w in ws[:2]]), torch.tensor(labels[:2])


class TestNES:
    a = torch.tensor([1.0, -2.0, 0.5], dtype=torch.float64)

    def test_linear_gradient(self):
        counter = QueryCounter(lambda p: p @ self.a)
        grad = nes_grad(counter, torch.zeros(3, dtype=torch.float64), m=2000, sigma=1e-2, rng=0)
        assert counter.queries == 2000
        assert torch.allclose(grad, self.a, atol=0.35)

    def test_quadratic_gradient(self):
        w = torch.tensor([0.5, -1.0, 2.0], dtype=torch.float64)
        grad = nes_grad(lambda p: (p ** 2).sum(dim=-1), w, m=4000, sigma=1e-3, rng=1)
        assert torch.allclose(grad, 2 * w, atol=0.35)

    def test_batched_and_pointwise_agree(self):
        w = torch.tensor([0.1, 0.2, 0.3], dtype=torch.float64)
        batched = nes_grad(lambda p: p @ self.a, w, m=10, rng=3)
        pointwise = nes_grad(lambda p: p @ self.a, w, m=10, rng=3, batched=False)
        assert torch.allclose(batched, pointwise)

    def test_odd_sample_count(self):
        with pytest.raises(AttackError):
            nes_grad(lambda p: p.sum(dim=-1), torch.zeros(2), m=5)

    def test_provider_counts_queries(self, model, batch):
        x, y = batch
        provider = NES(SpeakerSystem(model), m=10, sigma=1e-3)
        loss, grad = provider.evaluate(x, y, CE, generator=torch.Generator().manual_seed(0))
        assert provider.queries == 2 * (10 + 1)
        assert grad.shape == x.shape
        exact_loss, _ = Exact(SpeakerSystem(model)).evaluate(x, y, CE)
        assert torch.allclose(loss, exact_loss)


class TestBPDA:
    def test_exact_refuses_non_differentiable(self, model, batch):
        with pytest.raises(AttackError):
            Exact(SpeakerSystem(model, [make_qt(512)])).evaluate(*batch, CE)

    def test_identity_surrogate_gradient(self, model, batch):
        x, y = batch
        defended = SpeakerSystem(model, [make_qt(512)])
        loss, grad = bpda_all(Exact(defended)).evaluate(x, y, CE)
        plain_loss, plain_grad = Exact(SpeakerSystem(model)).evaluate(qt_tensor(x, 512), y, CE)
        assert torch.allclose(loss, plain_loss)
        assert torch.allclose(grad, plain_grad)

    def test_forward_value_is_exact(self, model, batch):
        x, y = batch
        defended = SpeakerSystem(model, [make_qt(512)])
        provider = bpda_all(Exact(defended))
        with torch.no_grad():
            assert torch.allclose(provider.system.scores(x), defended.scores(x))

    def test_wraps_only_what_is_needed(self, model):
        system = SpeakerSystem(model, [make_ms(5), make_qt(512)])
        provider = bpda_all(Exact(system))
        assert isinstance(provider, BPDA)
        assert provider.transform.name == 'qt'
        assert provider.descriptor == 'bpda(qt) -> exact'

    def test_fine_quantization_gradient_tracks_clean_gradient(self, model, batch):
        x, y = batch
        _, surrogate = bpda_all(Exact(SpeakerSystem(model, [make_qt(2)]))).evaluate(x, y, CE)
        _, clean = Exact(SpeakerSystem(model)).evaluate(x, y, CE)
        cos = torch.nn.functional.cosine_similarity(surrogate, clean, dim=1)
        assert (cos > 0.9).all()

    def test_wrapped_randomized_transform_keeps_its_seed(self, batch):
        x = batch[0]
        noise = make_at(20.0, rng_seed=3)
        wrapped = bpda_transform(noise)
        first = wrapped.fn(x, 8000, None)
        torch.manual_seed(123)
        second = wrapped.fn(x, 8000, None)
        assert torch.equal(first, second)
        assert torch.equal(first, noise.apply_tensor(x, 8000))

    def test_foreign_transform(self, model):
        with pytest.raises(AttackError):
            BPDA(Exact(SpeakerSystem(model)), make_qt(512))


class TestEOT:
    def test_deterministic_system_short_circuits(self, model, batch):
        inner = Exact(SpeakerSystem(model, [make_ms(5)]))
        x, y = batch
        direct = inner.evaluate(x, y, CE)
        averaged = EOT(inner, r=5).evaluate(x, y, CE)
        assert torch.allclose(direct[0], averaged[0])
        assert torch.allclose(direct[1], averaged[1])

    def test_average_over_draws_is_seeded(self, model, batch):
        x, y = batch
        provider = EOT(Exact(SpeakerSystem(model, [make_at(20.0)])), r=4)
        first = provider.evaluate(x, y, CE, generator=torch.Generator().manual_seed(1))
        second = provider.evaluate(x, y, CE, generator=torch.Generator().manual_seed(1))
        assert torch.equal(first[1], second[1])
        assert torch.isfinite(first[1]).all()

    def test_variance_shrinks_with_draws(self, model, batch):
        x, y = batch
        system = SpeakerSystem(model, [make_at(20.0)])

        def spread(r):
            provider = EOT(Exact(system), r=r)
            grads = torch.stack([provider.evaluate(x, y, CE, generator=torch.Generator().manual_seed(s))[1]
                                 for s in range(16)])
            return float(grads.var(dim=0).mean())

        # 1/r scaling predicts a ratio of 16
        assert spread(1) / spread(16) >= 8

    def test_needs_a_draw(self, model):
        with pytest.raises(AttackError):
            EOT(Exact(SpeakerSystem(model)), r=0)


class TestStack:
    def test_default_stack(self, model):
        system = SpeakerSystem(model, [make_qt(512), make_at(16.0)])
        kinds = [s.kind for s in default_stack(system, eot_draws=7)]
        assert kinds == ['eot', 'bpda', 'exact']
        provider = build_provider(system, default_stack(system, eot_draws=7))
        assert provider.descriptor == 'eot(r=7) -> bpda(qt) -> exact'

    def test_undefended_stack_is_exact(self, model):
        assert [s.kind for s in default_stack(SpeakerSystem(model))] == ['exact']

    @pytest.mark.parametrize('kinds', [[], ['eot'], ['exact', 'eot'], ['nes', 'exact']])
    def test_invalid_stacks(self, model, kinds):
        with pytest.raises(ConfigError):
            build_provider(SpeakerSystem(model), [WrapperSpec(kind=k) for k in kinds])

    def test_nes_base(self, model):
        provider = build_provider(SpeakerSystem(model), [WrapperSpec(kind='nes', m=4)])
        assert isinstance(provider, NES) and provider.m == 4


def test_constant_oracle_gives_zero_estimate():
    grad = nes_grad(lambda p: torch.full((p.shape[0],), 3.0, dtype=torch.float64),
                    torch.ones(5, dtype=torch.float64), m=20, rng=0)
    assert torch.count_nonzero(grad) == 0


def test_quadratic_estimate_points_the_right_way():
    generator = torch.Generator().manual_seed(11)
    cosines = []
    for _ in range(20):
        x0 = torch.randn(20, generator=generator, dtype=torch.float64)
        grad = nes_grad(lambda p: (p ** 2).sum(dim=-1), x0, m=1000, sigma=1e-3, rng=generator)
        cosines.append(float(torch.nn.functional.cosine_similarity(grad, 2 * x0, dim=0)))
    assert sum(cosines) / len(cosines) > 0.95
