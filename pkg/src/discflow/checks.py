"""Built-in invariant suite behind the ``check`` command.

Each check returns a named pass/fail result with a one-line detail, so the
CLI can emit machine-readable ``CHECK <name> PASS|FAIL <detail>`` lines.
Components are injectable (e.g. the schedule list) so a deliberately broken
implementation can serve as a negative control in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CosineSchedule,
    LinearSchedule,
    StateSpace,
    TimeGrid,
    make_optimal_linear_grid,
)
from .distributions import JointTable, SourceSpec, joint_marginal
from .gridopt import RateBoundProfile, constant_product_grid
from .path import (
    ConstantPosterior,
    MixturePath,
    exact_marginal,
    generator_matrix,
    posterior_table,
)
from .samplers import SamplerKind, SamplerSpec, step_batch

__all__ = ["CheckResult", "run_checks", "default_schedules"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name} {status} {self.detail}"


def default_schedules():
    return [LinearSchedule(), CosineSchedule()]


def check_schedule_derivative(schedules, seed: int = 0, tol: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    h = 1e-6
    worst = 0.0
    for sched in schedules:
        ts = rng.uniform(h, 1.0 - h, size=300)
        fd = (sched.kappa(ts + h) - sched.kappa(ts - h)) / (2.0 * h)
        worst = max(worst, float(np.max(np.abs(fd - sched.kappa_dot(ts)))))
    return CheckResult("schedule_derivative_fd", worst <= tol,
                       f"max |kappa_dot - fd| = {worst:.3g} (tol {tol:g})")


def check_schedule_inverse(schedules, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for sched in schedules:
        ts = rng.uniform(0.0, 0.99, size=300)
        back = sched.kappa_inv(np.asarray(sched.kappa(ts)))
        worst = max(worst, float(np.max(np.abs(back - ts))))
    return CheckResult("schedule_inverse_roundtrip", worst <= tol,
                       f"max roundtrip error = {worst:.3g} (tol {tol:g})")


def check_optimal_grid() -> CheckResult:
    worst_sum, worst_const = 0.0, 0.0
    for K in (1, 2, 4, 8, 16):
        for delta in (0.25, 0.01):
            grid = make_optimal_linear_grid(K, delta)
            taus = grid.taus
            worst_sum = max(worst_sum, abs(float(taus.sum()) - (1.0 - delta)))
            c_star = delta ** (-1.0 / K) - 1.0
            consts = taus / (1.0 - grid.points[1:])
            worst_const = max(worst_const,
                              float(np.max(np.abs(consts / c_star - 1.0))))
    ok = worst_sum <= 1e-12 and worst_const <= 1e-9
    return CheckResult("optimal_grid_identity", ok,
                       f"sum err {worst_sum:.3g}, const rel err {worst_const:.3g}")


def check_constant_product() -> CheckResult:
    worst = 0.0
    for K in (1, 4, 8):
        for delta in (0.25, 0.01):
            closed = make_optimal_linear_grid(K, delta)
            solved = constant_product_grid(RateBoundProfile(LinearSchedule()), K, delta)
            worst = max(worst, float(np.max(np.abs(closed.points - solved.points))))
    return CheckResult("constant_product_matches_closed_form", worst <= 1e-9,
                       f"max point error = {worst:.3g} (tol 1e-9)")


def _toy_path(vocab: int = 4, dims: int = 1, seed: int = 5) -> MixturePath:
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.2, 1.0, size=vocab**dims)
    probs /= probs.sum()
    table = JointTable(StateSpace(dims, vocab), probs)
    return MixturePath(LinearSchedule(), SourceSpec.uniform(), table)


def _stub_rows(width: int, token: int, off_mass: float) -> np.ndarray:
    row = np.zeros(width)
    others = [z for z in range(width) if z != token]
    row[others] = off_mass / len(others)
    row[token] = 1.0 - off_mass
    return row


def check_survival_laws(seed: int = 0, n: int = 30000) -> CheckResult:
    """Per-interval no-jump frequencies against their closed forms (4-sigma)."""
    pairs = [(0.5, 1.0), (0.3, 0.8), (0.7, 0.6), (0.2, 0.4), (0.9, 0.25)]
    sched = LinearSchedule()
    worst = -np.inf
    for i, (tau, lam) in enumerate(pairs):
        delta = 1.0 - tau
        grid = TimeGrid(np.array([0.0, 1.0 - delta]), delta)
        tau = 1.0 - delta  # the representable interval width
        path1 = _toy_path(vocab=4, dims=1)
        stub1 = ConstantPosterior(_stub_rows(4, 0, lam)[None, :])
        for kind, expected in (
            (SamplerKind.EULER, np.exp(-tau * lam)),
            (SamplerKind.TIME_CORRECTED, (1.0 - tau) ** lam),
        ):
            spec = SamplerSpec(kind=kind, grid=grid, posterior=stub1)
            states = np.zeros((n, 1), dtype=np.int64)
            new, _ = step_batch(spec, path1, states, 0, seed=(seed, i, 11))
            freq = float(np.mean(new[:, 0] == 0))
            sigma = np.sqrt(expected * (1.0 - expected) / n)
            worst = max(worst, abs(freq - expected) - 4.0 * sigma)
        # Location-corrected: the exit event is observable as the second
        # posterior query of the step.
        path2 = _toy_path(vocab=4, dims=2)
        stub2 = ConstantPosterior(np.stack([_stub_rows(4, 0, lam / 2.0)] * 2))
        spec = SamplerSpec(kind=SamplerKind.LOCATION_CORRECTED, grid=grid,
                           posterior=stub2)
        states = np.zeros((n, 2), dtype=np.int64)
        _, costs = step_batch(spec, path2, states, 0, seed=(seed, i, 12))
        freq = float(np.mean(costs == 1))
        expected = (1.0 - tau) ** lam
        sigma = np.sqrt(expected * (1.0 - expected) / n)
        worst = max(worst, abs(freq - expected) - 4.0 * sigma)
    return CheckResult("survival_laws", worst <= 0.0,
                       f"worst excess over 4-sigma band = {worst:.3g}")


def check_posterior_sanity(seed: int = 7) -> CheckResult:
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.05, 1.0, size=9)
    probs /= probs.sum()
    path = MixturePath(LinearSchedule(), SourceSpec.uniform(),
                       JointTable(StateSpace(2, 3), probs))
    worst = 0.0
    for t in (0.1, 0.5, 0.9):
        table = posterior_table(path, t)
        sums = table.sum(axis=2)
        worst = max(worst, float(np.max(np.abs(sums - 1.0))))
        p_t = exact_marginal(path, t).ravel()
        for d in range(2):
            lhs = p_t @ table[:, d, :]
            rhs = joint_marginal(path.data, [d])
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CheckResult("posterior_sanity", worst <= 1e-10,
                       f"max row/Bayes residual = {worst:.3g} (tol 1e-10)")


def check_forward_equation(seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    probs = rng.uniform(0.05, 1.0, size=9)
    probs /= probs.sum()
    path = MixturePath(LinearSchedule(), SourceSpec.uniform(),
                       JointTable(StateSpace(2, 3), probs))
    h = 1e-5
    worst = 0.0
    for _ in range(10):
        t = rng.uniform(0.05, 0.9)
        Q = generator_matrix(path, t)
        p_t = exact_marginal(path, t).ravel()
        dp = (exact_marginal(path, t + h).ravel()
              - exact_marginal(path, t - h).ravel()) / (2.0 * h)
        flux = p_t @ Q
        worst = max(worst, float(np.max(np.abs(dp - flux))))
    return CheckResult("forward_equation", worst <= 1e-4,
                       f"max residual = {worst:.3g} (tol 1e-4)")


def run_checks(schedules=None, seed: int = 0) -> list[CheckResult]:
    """Run the whole invariant suite; injectable schedules for negative tests."""
    schedules = default_schedules() if schedules is None else schedules
    return [
        check_schedule_derivative(schedules, seed=seed),
        check_schedule_inverse(schedules, seed=seed),
        check_optimal_grid(),
        check_constant_product(),
        check_survival_laws(seed=seed),
        check_posterior_sanity(),
        check_forward_equation(),
    ]
