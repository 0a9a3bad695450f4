"""Rate-bound profiles and the constant-product time grid.

The discretization-error bound of every parallel sampler is minimized by
grids on which ``tau_k * M_k`` is constant, where ``M_k`` is the supremum
of ``kappa_dot / (1 - kappa)`` over the k-th interval.  For the linear
schedule that grid has the closed form in :func:`core.make_optimal_linear_grid`;
for other schedules this module finds it numerically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigError,
    DomainError,
    LinearSchedule,
    TimeGrid,
    TimeSchedule,
    make_optimal_linear_grid,
    make_uniform_grid,
    rate_factor,
)

__all__ = ["RateBoundProfile", "rate_bound", "constant_product_grid", "build_grid"]

_INTERIOR_SAMPLES = 8
_BISECT_ITERS = 200
_LANDING_TOL = 1e-12


@dataclass(frozen=True)
class RateBoundProfile:
    """Supremum of the rate factor over subintervals of [0, 1 - delta]."""

    schedule: TimeSchedule

    def bound(self, t_a: float, t_b: float) -> float:
        return rate_bound(self, t_a, t_b)


def rate_bound(profile: RateBoundProfile, t_a: float, t_b: float) -> float:
    """sup over [t_a, t_b] of kappa_dot / (1 - kappa).

    Closed form for the linear schedule (the factor is 1 / (1 - t), which
    is increasing); otherwise the max over both endpoints plus eight
    interior samples.
    """
    if not (0.0 <= t_a <= t_b):
        raise DomainError(f"need 0 <= t_a <= t_b, got [{t_a}, {t_b}]")
    schedule = profile.schedule
    if isinstance(schedule, LinearSchedule):
        return float(rate_factor(schedule, t_b))
    ts = np.linspace(t_a, t_b, _INTERIOR_SAMPLES + 2)
    return float(np.max(rate_factor(schedule, ts)))


def _solve_tau(profile: RateBoundProfile, t_right: float, c: float) -> float:
    """Width tau with tau * bound(t_right - tau, t_right) = c, if within [0, t_right].

    Returns ``t_right + 1`` (sentinel past the interval) when even consuming
    all remaining time cannot reach the product c, which means the step
    overshoots past t = 0.
    """
    g_full = t_right * rate_bound(profile, 0.0, t_right) - c
    if g_full < 0.0:
        return t_right + 1.0
    lo, hi = 0.0, t_right
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        g = mid * rate_bound(profile, t_right - mid, t_right) - c
        if g < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _landing_point(profile: RateBoundProfile, K: int, delta: float, c: float) -> float:
    """Where stepping right-to-left with tau_k = c / M_k lands after K steps.

    Negative surrogate values (linear extrapolation) keep the function
    continuous and monotone when c is too large.
    """
    t = 1.0 - delta
    for _ in range(K):
        tau = _solve_tau(profile, t, c)
        if tau > t:
            return t - c / rate_bound(profile, 0.0, max(t, 1e-12))
        t -= tau
    return t


def constant_product_grid(profile: RateBoundProfile, K: int, delta: float) -> TimeGrid:
    """Grid with tau_k * M_k constant, found by bisection on the constant.

    For the linear schedule the result coincides with the closed-form
    optimal grid to within the landing tolerance.
    """
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    lo = 1e-12
    hi = 10.0 * (1.0 - delta) * rate_bound(profile, 0.0, 1.0 - delta)
    if _landing_point(profile, K, delta, lo) < -_LANDING_TOL:
        raise RuntimeError("bisection bracket invalid: lower bound already overshoots")
    c = hi
    for _ in range(_BISECT_ITERS):
        c = 0.5 * (lo + hi)
        land = _landing_point(profile, K, delta, c)
        if abs(land) <= _LANDING_TOL:
            break
        if land > 0.0:
            lo = c
        else:
            hi = c
    else:
        land = _landing_point(profile, K, delta, c)
        if abs(land) > 1e-9:
            raise RuntimeError(
                f"constant-product bisection did not converge (landing {land:.3g})"
            )
    # Rebuild the grid left-to-right from the solved constant.
    points = [1.0 - delta]
    t = 1.0 - delta
    for _ in range(K - 1):
        t -= _solve_tau(profile, t, c)
        points.append(t)
    points.append(0.0)
    pts = np.array(points[::-1])
    pts[-1] = 1.0 - delta
    return TimeGrid(pts, delta)


def build_grid(schedule: TimeSchedule, kind: str, K: int, delta: float) -> TimeGrid:
    """Grid factory by kind: ``uniform``, ``optimal``, or ``constant_product``.

    ``optimal`` is the closed form for the linear schedule; for any other
    schedule it falls back to the uniform grid (the closed form is
    schedule-specific and no analogue is attempted).
    """
    kind = kind.lower()
    if kind == "uniform":
        return make_uniform_grid(K, delta)
    if kind == "optimal":
        if isinstance(schedule, LinearSchedule):
            return make_optimal_linear_grid(K, delta)
        return make_uniform_grid(K, delta)
    if kind == "constant_product":
        return constant_product_grid(RateBoundProfile(schedule), K, delta)
    raise ConfigError(f"unknown grid kind {kind!r}")
