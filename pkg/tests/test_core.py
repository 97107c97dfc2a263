import numpy as np
import pytest

from sgthermo.core import (
    DivergenceError,
    SamplerState,
    make_minibatch_schedule,
    stochastic_neg_log_posterior_grad,
)
from sgthermo.models import GaussianModel, LogisticRegressionModel
from sgthermo.rng import RngStream


def take(iterator, k):
    return [next(iterator) for _ in range(k)]


class TestSamplerState:
    def test_create_validates_lengths(self):
        with pytest.raises(ValueError):
            SamplerState.create([0.0, 1.0], [0.0], [0.0])

    def test_create_rejects_non_finite(self):
        with pytest.raises(DivergenceError):
            SamplerState.create([np.nan], [0.0], [0.0])

    def test_roundtrip(self):
        s = SamplerState.create([1.0, 2.0], [0.0, 0.0], [0.5, 0.5])
        assert s.dim == 2
        assert s.is_finite()
        c = s.copy()
        c.theta[0] = 9.0
        assert s.theta[0] == 1.0


class TestMinibatchSchedule:
    def test_full_batch_epochs_are_permutations(self):
        sched = make_minibatch_schedule(4, 4, "shuffled-epochs", RngStream(1))
        for batch in take(sched.batches(), 10):
            assert sorted(batch.tolist()) == [0, 1, 2, 3]

    def test_a9a_sized_epoch_batch_count_and_tail(self):
        # ceil(32561/10) = 3257 batches; 32561 mod 10 = 1 leftover row
        sched = make_minibatch_schedule(32561, 10, "shuffled-epochs", RngStream(2))
        assert sched.batches_per_epoch == 3257
        epoch = take(sched.batches(), 3257)
        sizes = [len(b) for b in epoch]
        assert sizes[:-1] == [10] * 3256
        assert sizes[-1] == 1
        seen = np.concatenate(epoch)
        assert len(seen) == 32561
        assert np.array_equal(np.sort(seen), np.arange(32561))

    def test_with_replacement_frequencies(self):
        sched = make_minibatch_schedule(5, 5, "with-replacement", RngStream(3))
        draws = np.concatenate(take(sched.batches(), 100_000))
        freqs = np.bincount(draws, minlength=5) / len(draws)
        assert np.all(np.abs(freqs - 0.2) < 0.01)

    def test_invalid_batch_sizes_rejected(self):
        with pytest.raises(ValueError):
            make_minibatch_schedule(10, 0, "shuffled-epochs", RngStream(0))
        with pytest.raises(ValueError):
            make_minibatch_schedule(10, 11, "shuffled-epochs", RngStream(0))
        with pytest.raises(ValueError):
            make_minibatch_schedule(10, 2, "bogus-mode", RngStream(0))

    def test_same_seed_same_batches(self):
        a = take(make_minibatch_schedule(100, 7, "shuffled-epochs", RngStream(9)).batches(), 30)
        b = take(make_minibatch_schedule(100, 7, "shuffled-epochs", RngStream(9)).batches(), 30)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


def _toy_logreg(n=50, p=3, seed=0):
    gen = RngStream(seed).generator()
    X = gen.standard_normal((n, p))
    w_true = gen.standard_normal(p)
    y = (X @ w_true + 0.3 * gen.standard_normal(n) > 0).astype(float)
    return LogisticRegressionModel(X, y, prior_variance=10.0)


class TestStochasticGrad:
    def test_full_batch_equals_full_grad_bitwise(self):
        model = _toy_logreg()
        theta = RngStream(4).generator().standard_normal(model.dim)
        full = model.full_grad(theta)
        est = stochastic_neg_log_posterior_grad(model, theta, np.arange(model.data_size))
        assert np.array_equal(full, est)

    def test_single_datum_hand_value(self):
        # x = (1, 0), y = 1, theta = 0: sigma(0) = 1/2, residual -(y - sigma) x = (-1/2, 0),
        # bias gradient -1/2, prior term vanishes at theta = 0.
        model = LogisticRegressionModel(np.array([[1.0, 0.0]]), np.array([1.0]), prior_variance=10.0)
        grad = stochastic_neg_log_posterior_grad(model, np.zeros(3), np.array([0]))
        assert np.allclose(grad[:2], [-0.5, 0.0], atol=1e-12)
        assert np.allclose(grad, [-0.5, 0.0, -0.5], atol=1e-12)

    def test_minibatch_mean_is_unbiased(self):
        model = _toy_logreg()
        theta = 0.5 * RngStream(5).generator().standard_normal(model.dim)
        full = model.full_grad(theta)
        sched = make_minibatch_schedule(model.data_size, 5, "with-replacement", RngStream(6))
        grads = np.array([model.stochastic_grad(theta, b, None) for b in take(sched.batches(), 10_000)])
        se = grads.std(axis=0, ddof=1) / np.sqrt(len(grads))
        assert np.all(np.abs(grads.mean(axis=0) - full) <= 3.0 * se + 1e-12)

    def test_gradient_length_and_index_checks(self):
        model = _toy_logreg()
        with pytest.raises(ValueError):
            stochastic_neg_log_posterior_grad(model, np.zeros(model.dim + 1), None)
        with pytest.raises(ValueError):
            stochastic_neg_log_posterior_grad(model, np.zeros(model.dim), np.array([model.data_size]))

    def test_non_finite_gradient_raises_divergence_with_theta(self):
        model = GaussianModel(2)
        bad = np.array([np.nan, 0.0])
        with pytest.raises(DivergenceError) as exc_info:
            stochastic_neg_log_posterior_grad(model, bad, None)
        assert np.isnan(exc_info.value.theta[0])
