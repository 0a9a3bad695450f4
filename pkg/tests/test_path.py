"""Exact path oracles: marginals, posteriors, rates, and posterior models."""

import numpy as np
import pytest

from discflow import (
    ConstantPosterior,
    DomainError,
    ExactPosterior,
    JointTable,
    LinearSchedule,
    MixturePath,
    SourceSpec,
    StateSpace,
    UnreachableStateError,
    blockwise_ar1,
    conditional_path_prob,
    conditional_rate,
    exact_marginal,
    exact_posterior,
    joint_marginal,
    oracle_rate,
    perturbed_posterior,
    posterior_rows_batch,
    posterior_table,
)
from discflow.path import generator_matrix


def random_table(dims, vocab, seed, low=0.05):
    rng = np.random.default_rng(seed)
    probs = rng.uniform(low, 1.0, size=vocab**dims)
    probs /= probs.sum()
    return JointTable(StateSpace(dims, vocab), probs)


@pytest.fixture(scope="module")
def uniform_path_2x3():
    return MixturePath(LinearSchedule(), SourceSpec.uniform(), random_table(2, 3, 42))


@pytest.fixture(scope="module")
def masked_path_ar1():
    return MixturePath(LinearSchedule(), SourceSpec.masked(), blockwise_ar1(3, 8))


class TestConditionalPath:
    def test_time_zero_is_source(self, uniform_path_2x3):
        assert conditional_path_prob(uniform_path_2x3, 0.0, 0, 1, 2) == pytest.approx(1 / 3)

    def test_time_one_is_indicator(self, uniform_path_2x3):
        assert conditional_path_prob(uniform_path_2x3, 1.0, 0, 2, 2) == 1.0
        assert conditional_path_prob(uniform_path_2x3, 1.0, 0, 1, 2) == 0.0

    def test_masked_mass_on_mask(self, masked_path_ar1):
        # (1 - kappa_t) * 1 at the mask token, any clean token
        assert conditional_path_prob(masked_path_ar1, 0.4, 1, 8, 3) == pytest.approx(0.6)

    def test_invalid_tokens(self, uniform_path_2x3):
        with pytest.raises(DomainError):
            conditional_path_prob(uniform_path_2x3, 0.5, 0, 5, 1)
        with pytest.raises(DomainError):
            conditional_path_prob(uniform_path_2x3, 0.5, 3, 1, 1)


class TestConditionalRate:
    def test_diagonal_nonpositive(self, uniform_path_2x3):
        for x1 in range(3):
            val = conditional_rate(uniform_path_2x3, 0.3, 0, 1, 1, x1)
            assert val <= 0.0

    def test_off_target_zero(self, uniform_path_2x3):
        # z differs from both x and x1
        assert conditional_rate(uniform_path_2x3, 0.3, 0, 0, 1, 2) == 0.0

    def test_linear_midpoint_value(self, uniform_path_2x3):
        assert conditional_rate(uniform_path_2x3, 0.5, 0, 0, 2, 2) == pytest.approx(2.0)

    def test_horizon_rejected(self, uniform_path_2x3):
        with pytest.raises(DomainError):
            conditional_rate(uniform_path_2x3, 1.0, 0, 0, 1, 1)


class TestExactMarginal:
    def test_time_zero_uniform_source(self, uniform_path_2x3):
        m = exact_marginal(uniform_path_2x3, 0.0)
        assert np.allclose(m, 1.0 / 9.0, atol=1e-15)

    def test_time_zero_masked_point_mass(self, masked_path_ar1):
        m = exact_marginal(masked_path_ar1, 0.0)
        assert m[8, 8, 8] == pytest.approx(1.0, abs=1e-15)
        assert m.sum() == pytest.approx(1.0, abs=1e-12)

    def test_time_one_is_data(self, uniform_path_2x3):
        m = exact_marginal(uniform_path_2x3, 1.0)
        assert np.max(np.abs(m - uniform_path_2x3.data.tensor)) <= 1e-15

    def test_brute_force_double_sum(self):
        # D=2, |S|=2: sum over all four clean states by hand
        path = MixturePath(LinearSchedule(), SourceSpec.uniform(), random_table(2, 2, 5))
        t = 0.5
        expected = np.zeros((2, 2))
        for x0 in range(2):
            for x1 in range(2):
                acc = 0.0
                for a in range(2):
                    for b in range(2):
                        pa = 0.5 * (1 - t) + t * (x0 == a)
                        pb = 0.5 * (1 - t) + t * (x1 == b)
                        acc += pa * pb * path.data.tensor[a, b]
                expected[x0, x1] = acc
        got = exact_marginal(path, t)
        assert np.max(np.abs(got - expected)) <= 1e-15

    def test_marginal_subset_consistency(self, masked_path_ar1):
        full = exact_marginal(masked_path_ar1, 0.6)
        sub = exact_marginal(masked_path_ar1, 0.6, (0, 2))
        assert np.max(np.abs(full.sum(axis=1) - sub)) <= 1e-12

    def test_blockwise_marginal_matches_dense(self):
        data6 = blockwise_ar1(6, 8)
        path6 = MixturePath(LinearSchedule(), SourceSpec.uniform(), data6)
        path6d = MixturePath(LinearSchedule(), SourceSpec.uniform(), data6.to_dense())
        a = exact_marginal(path6, 0.4, (0, 1, 3))
        b = exact_marginal(path6d, 0.4, (0, 1, 3))
        assert np.max(np.abs(a - b)) <= 1e-12


class TestExactPosterior:
    def test_masked_unmasked_rows_time_independent_bitwise(self, masked_path_ar1):
        x = np.array([2, 8, 5])
        early = exact_posterior(masked_path_ar1, 0.2, x)
        late = exact_posterior(masked_path_ar1, 0.7, x)
        for d in (0, 2):
            assert np.array_equal(early.probs[d], late.probs[d])
            assert early.probs[d, x[d]] == 1.0

    def test_uniform_time_zero_row_is_data_marginal(self, uniform_path_2x3):
        post = exact_posterior(uniform_path_2x3, 0.0, np.array([0, 1]))
        for d in range(2):
            expect = joint_marginal(uniform_path_2x3.data, [d])
            assert np.max(np.abs(post.probs[d, :3] - expect)) <= 1e-12

    def test_brute_force_bayes(self, uniform_path_2x3):
        t, x = 0.5, np.array([1, 2])
        G = np.zeros((2, 3))
        for a in range(3):
            for b in range(3):
                wa = (1 - t) / 3 + t * (x[0] == a)
                wb = (1 - t) / 3 + t * (x[1] == b)
                w = wa * wb * uniform_path_2x3.data.tensor[a, b]
                G[0, a] += w
                G[1, b] += w
        G /= G.sum(axis=1, keepdims=True)
        post = exact_posterior(uniform_path_2x3, t, x)
        assert np.max(np.abs(post.probs[:, :3] - G)) <= 1e-12

    def test_rows_normalized_and_no_mask_mass(self, masked_path_ar1):
        post = exact_posterior(masked_path_ar1, 0.3, np.array([8, 4, 8]))
        assert np.max(np.abs(post.probs.sum(axis=1) - 1.0)) <= 1e-10
        assert np.all(post.probs[:, 8] == 0.0)
        assert np.all(post.probs >= 0.0)

    def test_unreachable_state_raises(self, masked_path_ar1):
        # an unmasked coordinate is impossible at t = 0 under a masked source
        with pytest.raises(UnreachableStateError):
            exact_posterior(masked_path_ar1, 0.0, np.array([1, 8, 8]))

    def test_bayes_consistency_against_data_marginal(self, uniform_path_2x3):
        # sum_x p_t(x) posterior_d(z | x) recovers the data marginal of z
        for t in (0.2, 0.8):
            p_t = exact_marginal(uniform_path_2x3, t).ravel()
            table = posterior_table(uniform_path_2x3, t)
            for d in range(2):
                lhs = p_t @ table[:, d, :3]
                rhs = joint_marginal(uniform_path_2x3.data, [d])
                assert np.max(np.abs(lhs - rhs)) <= 1e-10

    def test_batch_matches_single(self, masked_path_ar1):
        states = np.array([[8, 8, 8], [2, 8, 5], [1, 1, 8]])
        rows = posterior_rows_batch(masked_path_ar1, 0.45, states)
        for i, s in enumerate(states):
            single = exact_posterior(masked_path_ar1, 0.45, s)
            assert np.max(np.abs(rows[i] - single.probs)) <= 1e-12

    def test_blockwise_posterior_matches_dense(self):
        data6 = blockwise_ar1(6, 8)
        path6 = MixturePath(LinearSchedule(), SourceSpec.masked(), data6)
        path6d = MixturePath(LinearSchedule(), SourceSpec.masked(), data6.to_dense())
        x = np.array([8, 3, 8, 1, 8, 8])
        a = exact_posterior(path6, 0.5, x).probs
        b = exact_posterior(path6d, 0.5, x).probs
        assert np.max(np.abs(a - b)) <= 1e-12


class TestForwardEquation:
    def test_kolmogorov_residual(self):
        path = MixturePath(LinearSchedule(), SourceSpec.uniform(), random_table(2, 3, 9))
        rng = np.random.default_rng(0)
        h = 1e-5
        for _ in range(20):
            t = rng.uniform(0.05, 0.9)
            Q = generator_matrix(path, t)
            p_t = exact_marginal(path, t).ravel()
            dp = (exact_marginal(path, t + h).ravel()
                  - exact_marginal(path, t - h).ravel()) / (2 * h)
            assert np.max(np.abs(dp - p_t @ Q)) <= 1e-4


class TestOracleRate:
    def test_rows_sum_to_zero(self, uniform_path_2x3):
        rates = oracle_rate(uniform_path_2x3, 0.4, np.array([0, 2]))
        assert np.max(np.abs(rates.sum(axis=1))) <= 1e-12

    def test_outflow_bounded(self, uniform_path_2x3):
        from discflow import rate_factor

        for t in (0.1, 0.5, 0.9):
            rf = rate_factor(uniform_path_2x3.schedule, t)
            for tokens in ([0, 0], [1, 2], [2, 1]):
                rates = oracle_rate(uniform_path_2x3, t, np.array(tokens))
                outflow = -sum(rates[d, tok] for d, tok in enumerate(tokens))
                assert outflow <= 2 * rf + 1e-12

    def test_masked_fully_unmasked_is_frozen(self, masked_path_ar1):
        rates = oracle_rate(masked_path_ar1, 0.5, np.array([1, 2, 3]))
        assert np.max(np.abs(rates)) == 0.0

    def test_linear_midpoint_factor(self, masked_path_ar1):
        x = np.array([8, 8, 8])
        post = exact_posterior(masked_path_ar1, 0.5, x)
        rates = oracle_rate(masked_path_ar1, 0.5, x)
        assert np.max(np.abs(rates[:, :8] - 2.0 * post.probs[:, :8])) <= 1e-12


class TestPosteriorModels:
    def test_nfe_counts_evaluate_calls(self, uniform_path_2x3):
        model = ExactPosterior(uniform_path_2x3)
        assert model.nfe_count == 0
        model.evaluate(0.3, np.array([0, 1]))
        model.evaluate(0.3, np.array([0, 1]))
        assert model.nfe_count == 2

    def test_exact_rows_match_table(self, masked_path_ar1):
        model = ExactPosterior(masked_path_ar1)
        states = np.array([[8, 8, 8], [0, 8, 7]])
        rows = model.rows(0.6, states)
        for i, s in enumerate(states):
            assert np.max(np.abs(rows[i] - exact_posterior(masked_path_ar1, 0.6, s).probs)) <= 1e-12

    def test_perturbed_zero_noise_identical(self, uniform_path_2x3):
        inner = ExactPosterior(uniform_path_2x3)
        model = perturbed_posterior(inner, 0.0, rng_seed=4)
        base = inner.evaluate(0.4, np.array([1, 1]))
        noisy = model.evaluate(0.4, np.array([1, 1]))
        assert np.array_equal(base.probs, noisy.probs)

    def test_perturbed_deterministic(self, uniform_path_2x3):
        model = perturbed_posterior(ExactPosterior(uniform_path_2x3), 0.5, rng_seed=4)
        a = model.evaluate(0.4, np.array([1, 2])).probs
        b = model.evaluate(0.4, np.array([1, 2])).probs
        assert np.array_equal(a, b)

    def test_perturbed_rows_valid(self, masked_path_ar1):
        model = perturbed_posterior(ExactPosterior(masked_path_ar1), 0.8, rng_seed=1)
        post = model.evaluate(0.5, np.array([8, 3, 8]))
        assert np.max(np.abs(post.probs.sum(axis=1) - 1.0)) <= 1e-10
        assert np.all(post.probs >= 0.0)
        assert np.all(post.probs[:, 8] == 0.0)

    def test_perturbed_masked_stays_time_independent(self, masked_path_ar1):
        model = perturbed_posterior(ExactPosterior(masked_path_ar1), 0.5, rng_seed=4)
        assert model.time_independent
        a = model.evaluate(0.2, np.array([8, 3, 8])).probs
        b = model.evaluate(0.7, np.array([8, 3, 8])).probs
        assert np.array_equal(a, b)

    def test_constant_posterior_stub(self):
        rows = np.array([[0.5, 0.25, 0.25]])
        stub = ConstantPosterior(rows)
        out = stub.evaluate(0.3, np.array([0]))
        assert np.array_equal(out.probs, rows)

    def test_perturbed_inherits_unreachable_error(self, masked_path_ar1):
        model = perturbed_posterior(ExactPosterior(masked_path_ar1), 0.3, rng_seed=2)
        with pytest.raises(UnreachableStateError):
            model.evaluate(0.0, np.array([1, 8, 8]))
