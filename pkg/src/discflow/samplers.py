"""The sampler family: exact, leaping, and corrected interval schemes.

Eight samplers share one vectorized engine that advances a batch of
trajectories interval by interval:

* ``uniformization`` — exact simulation by thinning a dominating Poisson
  process; the accuracy anchor, at the price of many model queries.
* ``tau_leaping`` — freeze time and state at the interval start, draw
  independent Poisson jump counts per (coordinate, target), clamp
  out-of-vocabulary results back to the previous token.
* ``euler`` — tau-leaping truncated to at most one jump per coordinate.
* ``time_corrected`` — keep the schedule factor time-varying inside the
  interval (power-law survival) while freezing the posterior.
* ``location_corrected`` — additionally re-query the posterior at the
  first jump time and run the corrected parallel update from there;
  at most two queries per interval.
* ``*_general`` — the same three ideas driven by an arbitrary conditional
  rate, with an m-point staircase replacing closed-form survival and a
  j-th-arrival / time-threshold variant of the location correction.

Randomness is drawn from counter-based substreams keyed by
``(master seed, interval, purpose)`` with one array slot per
(trajectory, coordinate), so results are bit-reproducible regardless of
thread scheduling and so algorithm pairs that are supposed to coincide
(e.g. the m=1 staircase and the plain general Euler scheme) consume
identical variates.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    ConfigError,
    DomainError,
    State,
    TimeGrid,
    TimeSchedule,
    rate_factor,
)
from .gridopt import RateBoundProfile, rate_bound
from .path import MixturePath, PosteriorModel

__all__ = [
    "SamplerKind",
    "SamplerSpec",
    "ConditionalRate",
    "MixtureConditionalRate",
    "Trajectory",
    "BatchResult",
    "sample_exit_time",
    "run_batch",
    "run_trajectory",
    "step_batch",
    "uniformization_run",
    "tau_leaping_step",
    "euler_step",
    "time_corrected_step",
    "location_corrected_step",
    "euler_general_step",
    "time_corrected_general_step",
    "location_corrected_general_step",
]


class SamplerKind(Enum):
    UNIFORMIZATION = "uniformization"
    TAU_LEAPING = "tau_leaping"
    EULER = "euler"
    TIME_CORRECTED = "time_corrected"
    LOCATION_CORRECTED = "location_corrected"
    EULER_GENERAL = "euler_general"
    TIME_CORRECTED_GENERAL = "time_corrected_general"
    LOCATION_CORRECTED_GENERAL = "location_corrected_general"


_GENERAL_KINDS = {
    SamplerKind.EULER_GENERAL,
    SamplerKind.TIME_CORRECTED_GENERAL,
    SamplerKind.LOCATION_CORRECTED_GENERAL,
}


class _P:
    """Draw purposes; part of the substream key, so never renumber."""

    INIT = 0
    SURV = 1          # per-coordinate no-jump decision (also tau total count)
    TARGET = 2        # per-coordinate first jump target
    TARGET_EXTRA = 3  # tau-leaping targets beyond the first (tagged by round)
    EXIT = 4          # whole-state exit time
    PICK = 5          # which (coordinate, token) moves first
    SURV2 = 6         # second-stage survival
    TARGET2 = 7       # second-stage target
    X1 = 8            # clean-token draw (general samplers)
    CELL = 9          # staircase cell / general stay decision
    X1_2 = 10         # second-stage clean-token draw
    CELL2 = 11        # second-stage staircase cell
    TARGET2G = 12     # second-stage target (general)
    NPOIS = 13        # uniformization event count
    ETIME = 14        # uniformization event times
    THIN = 15         # uniformization thinning (tagged by event round)


def _seed_entropy(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        seed = (int(seed),)
    entropy = tuple(int(s) for s in seed)
    if any(s < 0 for s in entropy):
        raise ConfigError(f"seeds must be nonnegative integers, got {seed!r}")
    return entropy


def _substream(seed, *tags) -> np.random.Generator:
    """Independent generator keyed by (seed, *tags); counter-based (Philox)."""
    ss = np.random.SeedSequence(_seed_entropy(seed) + tuple(int(t) for t in tags))
    return np.random.Generator(np.random.Philox(ss))


def _take_current(rows: np.ndarray, states: np.ndarray) -> np.ndarray:
    return np.take_along_axis(rows, states[..., None], axis=-1)[..., 0]


def _zero_current(rows: np.ndarray, states: np.ndarray) -> np.ndarray:
    out = rows.copy()
    np.put_along_axis(out, states[..., None], 0.0, axis=-1)
    return out


def _categorical(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index draws from unnormalized nonnegative rows given uniforms in [0,1)."""
    cum = np.cumsum(weights, axis=-1)
    tot = cum[..., -1:]
    cum = cum / np.where(tot > 0.0, tot, 1.0)
    idx = (u[..., None] >= cum).sum(axis=-1)
    return np.minimum(idx, weights.shape[-1] - 1).astype(np.int64)


def _poisson_icdf(mu: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Poisson counts via inverse CDF: smallest N with u < CDF(N).

    Shares its uniform with the one-jump-or-not decision of the truncated
    scheme, which couples the two samplers under a shared seed.
    """
    mu = np.asarray(mu, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    p = np.exp(-mu)
    cum = p.copy()
    counts = np.zeros(mu.shape, dtype=np.int64)
    active = u >= cum
    i = 0
    while np.any(active):
        i += 1
        if i > 400:
            raise RuntimeError("Poisson inverse-CDF failed to terminate")
        p = p * mu / i
        cum = cum + p
        counts[active & (u < cum)] = i
        active &= u >= cum
        if np.any(active) and not np.any(p[active] > 0.0):
            counts[active] = i  # saturated tail; probability ~ ulp
            break
    return counts


def sample_exit_time(lam: float, t_start: float, schedule: TimeSchedule, rng) -> float:
    """First-arrival time with survival ((1-kappa_t)/(1-kappa_{t_start}))^lam.

    Draws e ~ Exp(lam) and maps it through the schedule inverse; lam = 0
    never fires and returns +inf.
    """
    if lam < 0.0:
        raise DomainError(f"aggregate rate must be >= 0, got {lam}")
    if not (0.0 <= t_start <= 1.0):
        raise DomainError(f"t_start {t_start} outside [0, 1]")
    if lam == 0.0:
        return math.inf
    e = rng.exponential(1.0 / lam)
    arg = 1.0 - schedule.one_minus_kappa(t_start) * math.exp(-e)
    if arg >= 1.0:
        return math.inf
    return float(schedule.kappa_inv(arg))


class ConditionalRate(ABC):
    """Per-coordinate rate conditioned on a clean token.

    Off-diagonal values must be nonnegative and finite on [0, 1 - delta];
    the implied diagonal makes each row sum to zero.
    """

    @abstractmethod
    def rate(self, t: float, d: int, x_token: int, z_token: int, x1_token: int) -> float:
        ...

    def off_row(self, t: float, d: int, x_token: int, x1_token: int,
                width: int) -> np.ndarray:
        """Off-diagonal row over the working vocabulary (current entry 0)."""
        row = np.array([
            0.0 if z == x_token else self.rate(t, d, x_token, z, x1_token)
            for z in range(width)
        ])
        return row


class MixtureConditionalRate(ConditionalRate):
    """The mixture-path conditional rate: rf(t) * (δ_{x1}(z) - δ_x(z)).

    Carries vectorized hooks (``lam_cells`` / ``target_rows``) the engines
    use to avoid per-element Python calls.
    """

    def __init__(self, schedule: TimeSchedule):
        self.schedule = schedule

    def rate(self, t: float, d: int, x_token: int, z_token: int, x1_token: int) -> float:
        rf = rate_factor(self.schedule, t)
        return rf * (float(z_token == x1_token) - float(z_token == x_token))

    def lam_cells(self, times: np.ndarray, states: np.ndarray,
                  x1: np.ndarray) -> np.ndarray:
        """Total off-diagonal rate per cell: (B, D, m).

        ``times`` is (m,) shared or (B, m) per-trajectory.
        """
        rf = np.asarray(rate_factor(self.schedule, times), dtype=np.float64)
        if rf.ndim == 1:
            rf = np.broadcast_to(rf, (states.shape[0], rf.size))
        neq = (x1 != states).astype(np.float64)
        return neq[:, :, None] * rf[:, None, :]

    def target_rows(self, states: np.ndarray, x1: np.ndarray,
                    width: int) -> np.ndarray:
        """Unnormalized target weights (B, D, width): all mass on x1 if x1 != x."""
        B, D = states.shape
        rows = np.zeros((B, D, width))
        b, d = np.nonzero(x1 != states)
        rows[b, d, x1[b, d]] = 1.0
        return rows


def _cond_lam_cells(cond: ConditionalRate, times, states, x1, width) -> np.ndarray:
    if hasattr(cond, "lam_cells"):
        return cond.lam_cells(np.asarray(times, dtype=np.float64), states, x1)
    times = np.asarray(times, dtype=np.float64)
    B, D = states.shape
    if times.ndim == 1:
        times = np.broadcast_to(times, (B, times.size))
    m = times.shape[1]
    out = np.empty((B, D, m))
    for b in range(B):
        for d in range(D):
            for i in range(m):
                out[b, d, i] = cond.off_row(
                    float(times[b, i]), d, int(states[b, d]), int(x1[b, d]), width
                ).sum()
    return out


def _cond_target_rows(cond: ConditionalRate, times, states, x1, width) -> np.ndarray:
    """Target weights at per-(trajectory, coordinate) jump times (B, D, width)."""
    if hasattr(cond, "target_rows"):
        return cond.target_rows(states, x1, width)
    times = np.asarray(times, dtype=np.float64)
    B, D = states.shape
    out = np.zeros((B, D, width))
    for b in range(B):
        for d in range(D):
            out[b, d] = cond.off_row(
                float(times[b, d]), d, int(states[b, d]), int(x1[b, d]), width
            )
    return out


@dataclass
class SamplerSpec:
    """Which sampler to run and on what grid, plus its few-step knobs."""

    kind: SamplerKind
    grid: TimeGrid
    posterior: PosteriorModel
    cond_rate: ConditionalRate | None = None
    m: int = 32
    j: int | None = None
    t_theta: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, SamplerKind):
            self.kind = SamplerKind(self.kind)
        if self.kind in _GENERAL_KINDS and self.cond_rate is None:
            raise ConfigError(f"{self.kind.value} requires a conditional rate")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.j is not None and self.j < 1:
            raise ConfigError(f"j must be >= 1, got {self.j}")
        if not (0.0 <= self.t_theta < 1.0 - self.grid.delta + 1e-15):
            raise ConfigError(
                f"t_theta {self.t_theta} must lie in [0, 1 - delta)"
            )

    def resolved_j(self, dims: int) -> int:
        j = self.j if self.j is not None else math.ceil(dims / self.grid.K)
        return int(min(max(j, 1), dims))


@dataclass(frozen=True)
class Trajectory:
    """Outcome of one seeded run."""

    final_state: State
    nfe: int
    jumps: int
    seed: object


@dataclass
class BatchResult:
    """Outcome of a vectorized run of n trajectories."""

    final: np.ndarray        # (n, dims)
    nfe: np.ndarray          # (n,) posterior evaluations charged per trajectory
    jumps: np.ndarray        # (n,) coordinate changes
    max_step_nfe: int        # max evaluations charged in any single step


class _PosteriorSession:
    """Batched posterior queries with per-trajectory evaluation accounting.

    A query costs one evaluation per trajectory unless the model is
    time-independent and the trajectory's state is unchanged since its last
    query (the cached rows are reused), or the state is fully unmasked under
    a masked source (the posterior is the identity, no model needed).
    """

    def __init__(self, model: PosteriorModel, path: MixturePath, n: int):
        self.model = model
        self.path = path
        self.n = n
        space = path.space
        self.width = space.width
        self.vocab = space.vocab
        self.nfe = np.zeros(n, dtype=np.int64)
        self.cache_rows = model.time_independent
        self.identity_rows = model.mask_identity and space.masked
        if self.cache_rows:
            self._last = np.full((n, space.dims), -1, dtype=np.int64)
            self._rows = np.zeros((n, space.dims, space.width))

    def query(self, t, states: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
        if idx is None:
            idx = np.arange(self.n)
        B = states.shape[0]
        if not self.cache_rows:
            self.nfe[idx] += 1
            return np.asarray(self.model.rows(t, states), dtype=np.float64)

        rows = np.empty((B, states.shape[1], self.width))
        identity = np.zeros(B, dtype=bool)
        if self.identity_rows:
            identity = np.all(states < self.vocab, axis=1)
            if np.any(identity):
                one_hot = np.zeros((int(identity.sum()), states.shape[1], self.width))
                np.put_along_axis(one_hot, states[identity][..., None], 1.0, axis=-1)
                rows[identity] = one_hot
        cached = ~identity & np.all(states == self._last[idx], axis=1)
        if np.any(cached):
            rows[cached] = self._rows[idx[cached]]
        fresh = ~identity & ~cached
        if np.any(fresh):
            t_arr = np.asarray(t, dtype=np.float64)
            t_sub = t_arr if t_arr.ndim == 0 else t_arr[fresh]
            rows[fresh] = self.model.rows(t_sub, states[fresh])
            self.nfe[idx[fresh]] += 1
        self._last[idx] = states
        self._rows[idx] = rows
        return rows


class _Engine:
    """Advances a batch of trajectories over the grid of one sampler spec."""

    def __init__(self, spec: SamplerSpec, path: MixturePath, n: int, seed):
        self.spec = spec
        self.path = path
        self.n = n
        self.seed = seed
        self.schedule = path.schedule
        self.space = path.space
        self.width = path.space.width
        # The tau-leaping clamp keeps tokens inside the data vocabulary; the
        # mask symbol counts as outside, so overshoot onto it reverts too.
        self.vocab = path.space.vocab
        self.session = _PosteriorSession(spec.posterior, path, n)
        self.jumps = np.zeros(n, dtype=np.int64)
        self.max_step_nfe = 0

    def _sub(self, k: int, purpose: int, *extra) -> np.random.Generator:
        return _substream(self.seed, k, purpose, *extra)

    def draw_initial(self) -> np.ndarray:
        return self.path.source.sample(self.space, self._sub(0, _P.INIT), self.n)

    def run(self, states: np.ndarray) -> np.ndarray:
        for k in range(self.spec.grid.K):
            states = self.step(k, states)
        return states

    def step(self, k: int, states: np.ndarray) -> np.ndarray:
        before = self.session.nfe.copy()
        t0 = float(self.spec.grid.points[k])
        t1 = float(self.spec.grid.points[k + 1])
        new = self._dispatch(k, t0, t1, states)
        self.jumps += np.sum(new != states, axis=1)
        step_cost = self.session.nfe - before
        if step_cost.size:
            self.max_step_nfe = max(self.max_step_nfe, int(step_cost.max()))
        return new

    def _dispatch(self, k, t0, t1, states):
        kind = self.spec.kind
        if kind is SamplerKind.EULER:
            return self._step_euler(k, t0, t1, states)
        if kind is SamplerKind.TAU_LEAPING:
            return self._step_tau(k, t0, t1, states)
        if kind is SamplerKind.TIME_CORRECTED:
            return self._step_tc(k, t0, t1, states)
        if kind is SamplerKind.LOCATION_CORRECTED:
            return self._step_lc(k, t0, t1, states)
        if kind is SamplerKind.UNIFORMIZATION:
            return self._step_uniformization(k, t0, t1, states)
        if kind is SamplerKind.EULER_GENERAL:
            return self._step_euler_general(k, t0, t1, states)
        if kind is SamplerKind.TIME_CORRECTED_GENERAL:
            return self._step_tc_general(k, t0, t1, states)
        if kind is SamplerKind.LOCATION_CORRECTED_GENERAL:
            return self._step_lc_general(k, t0, t1, states)
        raise ConfigError(f"unknown sampler kind {kind!r}")

    # -- posterior-driven closed-form samplers --------------------------------

    def _step_euler(self, k, t0, t1, states):
        rows = self.session.query(t0, states)
        mass = 1.0 - _take_current(rows, states)
        mu = (t1 - t0) * rate_factor(self.schedule, t0) * mass
        u = self._sub(k, _P.SURV).random((self.n, states.shape[1]))
        jump = u >= np.exp(-mu)
        u_t = self._sub(k, _P.TARGET).random((self.n, states.shape[1]))
        z = _categorical(_zero_current(rows, states), u_t)
        return np.where(jump, z, states)

    def _step_tau(self, k, t0, t1, states):
        rows = self.session.query(t0, states)
        mass = 1.0 - _take_current(rows, states)
        mu = (t1 - t0) * rate_factor(self.schedule, t0) * mass
        u = self._sub(k, _P.SURV).random((self.n, states.shape[1]))
        # Total count then i.i.d. categorical targets == independent Poisson
        # counts per target (thinning); shares the no-jump event with Euler.
        counts = _poisson_icdf(mu, u)
        targets = _zero_current(rows, states)
        delta = np.zeros_like(states)
        r = 0
        active = counts > 0
        while np.any(active):
            tags = (k, _P.TARGET) if r == 0 else (k, _P.TARGET_EXTRA, r)
            u_t = _substream(self.seed, *tags).random((self.n, states.shape[1]))
            z = _categorical(targets, u_t)
            delta += np.where(active, z - states, 0)
            r += 1
            active = counts > r
        z_int = states + delta
        ok = (z_int >= 0) & (z_int < self.vocab)
        return np.where(ok, z_int, states)

    def _step_tc(self, k, t0, t1, states):
        rows = self.session.query(t0, states)
        mass = 1.0 - _take_current(rows, states)
        ratio = self.schedule.one_minus_kappa(t1) / self.schedule.one_minus_kappa(t0)
        stay = ratio**mass
        u = self._sub(k, _P.SURV).random((self.n, states.shape[1]))
        jump = u >= stay
        u_t = self._sub(k, _P.TARGET).random((self.n, states.shape[1]))
        z = _categorical(_zero_current(rows, states), u_t)
        return np.where(jump, z, states)

    def _step_lc(self, k, t0, t1, states):
        D = states.shape[1]
        rows = self.session.query(t0, states)
        mass = 1.0 - _take_current(rows, states)
        lam_tot = mass.sum(axis=1)
        u_exit = self._sub(k, _P.EXIT).random(self.n)
        with np.errstate(divide="ignore", invalid="ignore"):
            e = -np.log1p(-u_exit) / lam_tot
        arg = 1.0 - self.schedule.one_minus_kappa(t0) * np.exp(-e)
        jump = arg < self.schedule.kappa(t1)
        out = states.copy()
        idx = np.nonzero(jump)[0]
        if idx.size == 0:
            return out
        T = np.asarray(self.schedule.kappa_inv(arg[idx]), dtype=np.float64)
        flat = _zero_current(rows, states).reshape(self.n, -1)
        u_pick = self._sub(k, _P.PICK).random(self.n)
        pick = _categorical(flat, u_pick)
        d_pick, z_pick = np.divmod(pick, self.width)
        mid = states.copy()
        mid[idx, d_pick[idx]] = z_pick[idx]
        rows2 = self.session.query(T, mid[idx], idx=idx)
        mass2 = 1.0 - _take_current(rows2, mid[idx])
        ratio2 = (self.schedule.one_minus_kappa(t1) /
                  self.schedule.one_minus_kappa(T))[:, None]
        stay2 = ratio2**mass2
        u_s2 = self._sub(k, _P.SURV2).random((self.n, D))[idx]
        jump2 = u_s2 >= stay2
        u_t2 = self._sub(k, _P.TARGET2).random((self.n, D))[idx]
        z2 = _categorical(_zero_current(rows2, mid[idx]), u_t2)
        out[idx] = np.where(jump2, z2, mid[idx])
        return out

    # -- exact simulation ------------------------------------------------------

    def _step_uniformization(self, k, t0, t1, states):
        D = states.shape[1]
        tau = t1 - t0
        lam_k = D * rate_bound(RateBoundProfile(self.schedule), t0, t1)
        counts = self._sub(k, _P.NPOIS).poisson(tau * lam_k, self.n)
        R = int(counts.max()) if counts.size else 0
        if R == 0:
            return states
        u_times = self._sub(k, _P.ETIME).random((self.n, R))
        u_times[np.arange(R)[None, :] >= counts[:, None]] = np.inf
        u_times.sort(axis=1)
        states = states.copy()
        for r in range(R):
            act = np.nonzero(counts > r)[0]
            s = t0 + tau * u_times[act, r]
            rows = self.session.query(s, states[act], idx=act)
            rf = np.asarray(rate_factor(self.schedule, s), dtype=np.float64)
            rates = rf[:, None, None] * _zero_current(rows, states[act])
            outflow = rates.sum(axis=(1, 2))
            if np.any(outflow > lam_k * (1.0 + 1e-9)):
                raise AssertionError(
                    "uniformization bound violated: outflow exceeds lambda_k"
                )
            u = self._sub(k, _P.THIN, r).random(self.n)[act]
            cum = np.cumsum(rates.reshape(len(act), -1), axis=-1) / lam_k
            choice = (u[:, None] >= cum).sum(axis=-1)
            moved = choice < D * self.width
            if np.any(moved):
                dd, zz = np.divmod(choice[moved], self.width)
                states[act[moved], dd] = zz
        return states

    # -- general-conditional-rate samplers -------------------------------------

    def _step_euler_general(self, k, t0, t1, states):
        D = states.shape[1]
        tau = t1 - t0
        rows = self.session.query(t0, states)
        u_x1 = self._sub(k, _P.X1).random((self.n, D))
        x1 = _categorical(rows, u_x1)
        lam = _cond_lam_cells(self.spec.cond_rate, np.array([t0]), states, x1,
                              self.width)[..., 0]
        stay = np.exp(-tau * lam)
        u_c = self._sub(k, _P.CELL).random((self.n, D))
        jump = u_c >= stay
        t_jump = np.full((self.n, D), t0)
        trows = _cond_target_rows(self.spec.cond_rate, t_jump, states, x1, self.width)
        u_t = self._sub(k, _P.TARGET).random((self.n, D))
        z = _categorical(trows, u_t)
        return np.where(jump, z, states)

    def _step_tc_general(self, k, t0, t1, states):
        D = states.shape[1]
        tau = t1 - t0
        m = self.spec.m
        rows = self.session.query(t0, states)
        u_x1 = self._sub(k, _P.X1).random((self.n, D))
        x1 = _categorical(rows, u_x1)
        times = t0 + np.arange(m) * (tau / m)
        lam_cells = _cond_lam_cells(self.spec.cond_rate, times, states, x1, self.width)
        S = np.exp(-(tau / m) * np.cumsum(lam_cells, axis=-1))
        u_c = self._sub(k, _P.CELL).random((self.n, D))
        arrived = u_c >= S[..., -1]
        cell = np.minimum((S > u_c[..., None]).sum(axis=-1), m - 1)
        t_jump = times[cell]
        trows = _cond_target_rows(self.spec.cond_rate, t_jump, states, x1, self.width)
        u_t = self._sub(k, _P.TARGET).random((self.n, D))
        z = _categorical(trows, u_t)
        return np.where(arrived, z, states)

    def _step_lc_general(self, k, t0, t1, states):
        D = states.shape[1]
        tau = t1 - t0
        m = self.spec.m
        rows = self.session.query(t0, states)
        u_x1 = self._sub(k, _P.X1).random((self.n, D))
        x1 = _categorical(rows, u_x1)
        times = t0 + np.arange(m) * (tau / m)
        lam_cells = _cond_lam_cells(self.spec.cond_rate, times, states, x1, self.width)
        S = np.exp(-(tau / m) * np.cumsum(lam_cells, axis=-1))
        u_c = self._sub(k, _P.CELL).random((self.n, D))
        arrived = u_c >= S[..., -1]
        cell = np.minimum((S > u_c[..., None]).sum(axis=-1), m - 1)
        T_d = np.where(arrived, times[cell], t1)
        u_t = self._sub(k, _P.TARGET).random((self.n, D))
        trows = _cond_target_rows(self.spec.cond_rate, T_d, states, x1, self.width)
        z = _categorical(trows, u_t)

        j_eff = self.spec.resolved_j(D)
        Tj = np.sort(T_d, axis=1)[:, j_eff - 1]
        single = (Tj >= t1) | (t0 <= self.spec.t_theta)
        commit = arrived & (single[:, None] | (T_d <= Tj[:, None]))
        mid = np.where(commit, z, states)

        idx = np.nonzero(~single)[0]
        if idx.size == 0:
            return mid
        rows2 = self.session.query(Tj[idx], mid[idx], idx=idx)
        u_x1b = self._sub(k, _P.X1_2).random((self.n, D))[idx]
        x1b = _categorical(rows2, u_x1b)
        tau2 = t1 - Tj[idx]
        times2 = Tj[idx][:, None] + np.arange(m)[None, :] * (tau2[:, None] / m)
        lam2 = _cond_lam_cells(self.spec.cond_rate, times2, mid[idx], x1b, self.width)
        S2 = np.exp(-(tau2[:, None, None] / m) * np.cumsum(lam2, axis=-1))
        u_c2 = self._sub(k, _P.CELL2).random((self.n, D))[idx]
        arr2 = u_c2 >= S2[..., -1]
        cell2 = np.minimum((S2 > u_c2[..., None]).sum(axis=-1), m - 1)
        t_jump2 = times2[np.arange(idx.size)[:, None], cell2]
        trows2 = _cond_target_rows(self.spec.cond_rate, t_jump2, mid[idx], x1b,
                                   self.width)
        u_t2 = self._sub(k, _P.TARGET2G).random((self.n, D))[idx]
        z2 = _categorical(trows2, u_t2)
        out = mid.copy()
        out[idx] = np.where(arr2, z2, mid[idx])
        return out


def _resolve_x0(path: MixturePath, n: int, x0) -> np.ndarray | None:
    if x0 is None:
        return None
    arr = x0.array if isinstance(x0, State) else np.asarray(x0, dtype=np.int64)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n, arr.size)).copy()
    path.space.validate_tokens(arr)
    return arr.astype(np.int64)


def run_batch(spec: SamplerSpec, path: MixturePath, n: int, seed,
              x0=None) -> BatchResult:
    """Run ``n`` independent trajectories of one sampler, vectorized.

    Deterministic given ``seed`` (an int or tuple of nonnegative ints);
    ``x0`` optionally fixes the initial state instead of drawing from the
    source.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    eng = _Engine(spec, path, n, seed)
    states = _resolve_x0(path, n, x0)
    if states is None:
        states = eng.draw_initial()
    final = eng.run(np.asarray(states, dtype=np.int64))
    return BatchResult(final=final, nfe=eng.session.nfe, jumps=eng.jumps,
                       max_step_nfe=eng.max_step_nfe)


def run_trajectory(spec: SamplerSpec, path: MixturePath, rng_seed) -> Trajectory:
    """Single-trajectory convenience wrapper around :func:`run_batch`."""
    res = run_batch(spec, path, 1, rng_seed)
    return Trajectory(final_state=State.of(res.final[0]), nfe=int(res.nfe[0]),
                      jumps=int(res.jumps[0]), seed=rng_seed)


def step_batch(spec: SamplerSpec, path: MixturePath, states: np.ndarray,
               k: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """One interval update for a batch of states; returns (new states, costs).

    ``k`` is the 0-based interval index into ``spec.grid``; the update uses
    the substreams keyed (seed, k, purpose), so stepping manually through
    k = 0..K-1 reproduces :func:`run_batch` exactly.
    """
    states = np.asarray(states, dtype=np.int64)
    if states.ndim == 1:
        states = states[None, :]
    if not (0 <= k < spec.grid.K):
        raise ConfigError(f"interval index {k} outside range(0, {spec.grid.K})")
    eng = _Engine(spec, path, states.shape[0], seed)
    new = eng.step(k, states.copy())
    return new, eng.session.nfe


def _single_step(kind: SamplerKind, spec: SamplerSpec, path: MixturePath,
                 x_prev, k: int, seed) -> State:
    if spec.kind is not kind:
        raise ConfigError(f"spec kind is {spec.kind.value}, expected {kind.value}")
    arr = x_prev.array if isinstance(x_prev, State) else np.asarray(x_prev)
    new, _ = step_batch(spec, path, arr[None, :], k, seed)
    return State.of(new[0])


def tau_leaping_step(spec, path, x_prev, k, seed) -> State:
    return _single_step(SamplerKind.TAU_LEAPING, spec, path, x_prev, k, seed)


def euler_step(spec, path, x_prev, k, seed) -> State:
    return _single_step(SamplerKind.EULER, spec, path, x_prev, k, seed)


def time_corrected_step(spec, path, x_prev, k, seed) -> State:
    return _single_step(SamplerKind.TIME_CORRECTED, spec, path, x_prev, k, seed)


def location_corrected_step(spec, path, x_prev, k, seed) -> State:
    return _single_step(SamplerKind.LOCATION_CORRECTED, spec, path, x_prev, k, seed)


def euler_general_step(spec, path, x_prev, k, seed) -> State:
    return _single_step(SamplerKind.EULER_GENERAL, spec, path, x_prev, k, seed)


def time_corrected_general_step(spec, path, x_prev, k, seed) -> State:
    return _single_step(SamplerKind.TIME_CORRECTED_GENERAL, spec, path, x_prev, k, seed)


def location_corrected_general_step(spec, path, x_prev, k, seed) -> State:
    return _single_step(SamplerKind.LOCATION_CORRECTED_GENERAL, spec, path, x_prev,
                        k, seed)


def uniformization_run(spec: SamplerSpec, path: MixturePath, x0, seed) -> Trajectory:
    """Exact CTMC simulation from ``x0`` over the whole grid."""
    if spec.kind is not SamplerKind.UNIFORMIZATION:
        raise ConfigError(f"spec kind is {spec.kind.value}, expected uniformization")
    res = run_batch(spec, path, 1, seed, x0=x0)
    return Trajectory(final_state=State.of(res.final[0]), nfe=int(res.nfe[0]),
                      jumps=int(res.jumps[0]), seed=seed)
