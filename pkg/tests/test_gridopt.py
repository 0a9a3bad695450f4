"""Rate bounds and the numerically solved constant-product grid."""

import numpy as np
import pytest

from discflow import (
    CosineSchedule,
    DomainError,
    LinearSchedule,
    RateBoundProfile,
    build_grid,
    constant_product_grid,
    make_optimal_linear_grid,
    make_uniform_grid,
    rate_bound,
)

LIN_PROFILE = RateBoundProfile(LinearSchedule())
COS_PROFILE = RateBoundProfile(CosineSchedule())


class TestRateBound:
    def test_linear_half_interval(self):
        assert rate_bound(LIN_PROFILE, 0.0, 0.5) == pytest.approx(2.0, rel=1e-15)

    def test_linear_degenerate_limit(self):
        assert rate_bound(LIN_PROFILE, 0.0, 1e-12) == pytest.approx(1.0, rel=1e-9)

    def test_invalid_interval(self):
        with pytest.raises(DomainError):
            rate_bound(LIN_PROFILE, 0.6, 0.5)

    def test_optimal_grid_product_is_constant(self):
        for K in (2, 8):
            grid = make_optimal_linear_grid(K, 0.01)
            c_star = 0.01 ** (-1.0 / K) - 1.0
            for k in range(K):
                M_k = rate_bound(LIN_PROFILE, grid.points[k], grid.points[k + 1])
                assert grid.taus[k] * M_k == pytest.approx(c_star, rel=1e-9)

    def test_cosine_bound_dominates_samples(self):
        from discflow import rate_factor

        sched = CosineSchedule()
        bound = rate_bound(COS_PROFILE, 0.2, 0.7)
        ts = np.linspace(0.2, 0.7, 50)
        assert bound >= np.max(rate_factor(sched, ts)) - 1e-12


class TestConstantProductGrid:
    def test_linear_matches_closed_form(self):
        for K, delta in [(4, 0.01), (1, 0.3), (16, 0.25)]:
            closed = make_optimal_linear_grid(K, delta)
            solved = constant_product_grid(LIN_PROFILE, K, delta)
            assert np.max(np.abs(closed.points - solved.points)) <= 1e-9

    def test_k1_single_step(self):
        grid = constant_product_grid(LIN_PROFILE, 1, 0.2)
        assert np.allclose(grid.points, [0.0, 0.8])

    def test_cosine_self_consistency(self):
        grid = constant_product_grid(COS_PROFILE, 8, 0.01)
        products = [
            grid.taus[k] * rate_bound(COS_PROFILE, grid.points[k], grid.points[k + 1])
            for k in range(8)
        ]
        products = np.array(products)
        assert np.max(np.abs(products / products[0] - 1.0)) <= 1e-6

    def test_output_is_valid_grid(self):
        grid = constant_product_grid(COS_PROFILE, 5, 0.05)
        assert grid.points[0] == 0.0
        assert grid.points[-1] == 0.95
        assert np.all(np.diff(grid.points) > 0.0)

    def test_refinement_halves_max_step_within_factor_two(self):
        for K in (2, 4, 8):
            coarse = constant_product_grid(LIN_PROFILE, K, 0.01).taus.max()
            fine = constant_product_grid(LIN_PROFILE, 2 * K, 0.01).taus.max()
            assert coarse / 2.0 <= fine <= coarse


class TestBuildGrid:
    def test_kinds(self):
        lin = LinearSchedule()
        assert np.allclose(build_grid(lin, "uniform", 2, 0.5).points,
                           make_uniform_grid(2, 0.5).points)
        assert np.allclose(build_grid(lin, "optimal", 4, 0.01).points,
                           make_optimal_linear_grid(4, 0.01).points)

    def test_cosine_optimal_falls_back_to_uniform(self):
        cos = CosineSchedule()
        got = build_grid(cos, "optimal", 4, 0.1)
        assert np.allclose(got.points, make_uniform_grid(4, 0.1).points)

    def test_unknown_kind(self):
        from discflow import ConfigError

        with pytest.raises(ConfigError):
            build_grid(LinearSchedule(), "bogus", 2, 0.1)
