"""Benchmarking: total-variation metrics, one-step oracles, and sweeps.

Sampler output is always judged against an exactly computed reference:
either the time-(1 - delta) marginal of the path (for full runs) or a
closed-form / enumerated / quadrature one-step kernel (for single-interval
distributional tests).  Sweeps produce one record per (sampler, K, seed)
cell and serialize to a fixed CSV schema.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson as poisson_dist

from .core import CapacityError, ConfigError, State, encode_tokens, rate_factor
from .gridopt import build_grid
from .path import MixturePath, PosteriorModel, exact_marginal, exact_posterior
from .samplers import (
    MixtureConditionalRate,
    SamplerKind,
    SamplerSpec,
    run_batch,
)

__all__ = [
    "SweepRecord",
    "CSV_HEADER",
    "empirical_tv",
    "empirical_pmf",
    "one_step_kernel_oracle",
    "SamplerSetting",
    "sweep",
    "write_csv",
]

CSV_HEADER = "sampler,K,seed,n_samples,tv,nfe_mean,wall_seconds"

_KERNEL_BUDGET = 10_000


@dataclass(frozen=True)
class SweepRecord:
    """One benchmark cell: a sampler at one step count and seed."""

    sampler: str
    K: int
    seed: int
    n_samples: int
    tv: float
    nfe_mean: float
    wall_seconds: float

    def csv_row(self) -> str:
        return (f"{self.sampler},{self.K},{self.seed},{self.n_samples},"
                f"{float(self.tv)!r},{float(self.nfe_mean)!r},"
                f"{float(self.wall_seconds)!r}")


def _as_array(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        return samples
    return np.stack([s.array if isinstance(s, State) else np.asarray(s)
                     for s in samples])


def empirical_pmf(samples, coords, width: int) -> np.ndarray:
    """Histogram pmf of the samples restricted to ``coords``, flat layout."""
    arr = _as_array(samples)
    sub = arr[:, list(coords)]
    if sub.size and (sub.min() < 0 or sub.max() >= width):
        raise ConfigError("sample tokens outside the reference vocabulary")
    idx = encode_tokens(sub, width)
    return np.bincount(idx, minlength=width ** len(coords)) / arr.shape[0]


def empirical_tv(samples, reference: np.ndarray, coords) -> float:
    """Total variation between the sample histogram on ``coords`` and a pmf.

    ``reference`` is a tensor over the sub-cube, shape ``(width,)*len(coords)``.
    """
    coords = tuple(int(c) for c in coords)
    if not coords:
        raise ConfigError("coordinate subset must be nonempty")
    ref = np.asarray(reference, dtype=np.float64)
    if ref.ndim != len(coords):
        raise ConfigError(
            f"reference has {ref.ndim} axes but {len(coords)} coords requested"
        )
    width = ref.shape[0]
    if any(s != width for s in ref.shape):
        raise ConfigError("reference tensor must be a hypercube")
    hist = empirical_pmf(samples, coords, width)
    return float(0.5 * np.abs(hist - ref.ravel()).sum())


# -- one-step kernels ---------------------------------------------------------


def _coordinate_rows(path: MixturePath, t0: float, x: np.ndarray) -> np.ndarray:
    return exact_posterior(path, t0, x).probs


def _product_kernel(rows: list[np.ndarray]) -> np.ndarray:
    out = rows[0]
    for r in rows[1:]:
        out = np.multiply.outer(out, r)
    return out


def _one_hot(width: int, token: int) -> np.ndarray:
    v = np.zeros(width)
    v[token] = 1.0
    return v


def _euler_rows(path, post, x, t0, t1) -> list[np.ndarray]:
    width = path.space.width
    rf0 = rate_factor(path.schedule, t0)
    rows = []
    for d, tok in enumerate(x):
        off = post[d].copy()
        off[tok] = 0.0
        mass = off.sum()
        if mass <= 0.0:
            rows.append(_one_hot(width, tok))
            continue
        stay = np.exp(-(t1 - t0) * rf0 * mass)
        row = (1.0 - stay) * off / mass
        row[tok] += stay
        rows.append(row)
    return rows


def _tc_rows(path, post, x, t0, t1) -> list[np.ndarray]:
    width = path.space.width
    ratio = path.schedule.one_minus_kappa(t1) / path.schedule.one_minus_kappa(t0)
    rows = []
    for d, tok in enumerate(x):
        off = post[d].copy()
        off[tok] = 0.0
        mass = off.sum()
        if mass <= 0.0:
            rows.append(_one_hot(width, tok))
            continue
        stay = ratio**mass
        row = (1.0 - stay) * off / mass
        row[tok] += stay
        rows.append(row)
    return rows


def _tau_rows(path, post, x, t0, t1, max_total: int) -> tuple[list[np.ndarray], float]:
    """Per-coordinate leaping outcome pmfs by enumerating Poisson counts.

    Count vectors with total > ``max_total`` contribute to the reported
    tail instead of any outcome.
    """
    width = path.space.width
    vocab = path.space.vocab
    rf0 = rate_factor(path.schedule, t0)
    tau = t1 - t0
    rows = []
    for d, tok in enumerate(x):
        rates = rf0 * post[d]
        targets = [z for z in range(width) if z != tok and rates[z] > 0.0]
        pmf = {z: poisson_dist.pmf(np.arange(max_total + 1), tau * rates[z])
               for z in targets}
        row = np.zeros(width)

        def recurse(i: int, budget: int, prob: float, shift: int) -> None:
            if i == len(targets):
                land = tok + shift
                final = land if 0 <= land < vocab else tok
                row[final] += prob
                return
            z = targets[i]
            for cnt in range(budget + 1):
                recurse(i + 1, budget - cnt, prob * pmf[z][cnt],
                        shift + cnt * (z - tok))

        recurse(0, max_total, 1.0, 0)
        rows.append(row)
    tensor_mass = float(np.prod([r.sum() for r in rows]))
    return rows, 1.0 - tensor_mass


def _lc_kernel(path, x, t0, t1, n_quad: int) -> tuple[np.ndarray, float]:
    """Exit-time quadrature against the closed-form second-stage kernel."""
    width = path.space.width
    D = path.space.dims
    post0 = _coordinate_rows(path, t0, x)
    off0 = post0.copy()
    for d, tok in enumerate(x):
        off0[d, tok] = 0.0
    lam = off0.sum()
    identity = _product_kernel([_one_hot(width, tok) for tok in x])
    if lam <= 0.0:
        return identity, 0.0
    om0 = path.schedule.one_minus_kappa(t0)
    surv_end = (path.schedule.one_minus_kappa(t1) / om0) ** lam
    tensor = surv_end * identity
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    s_nodes = 0.5 * (t1 - t0) * nodes + 0.5 * (t0 + t1)
    s_weights = 0.5 * (t1 - t0) * weights
    for s, w in zip(s_nodes, s_weights):
        ratio = path.schedule.one_minus_kappa(s) / om0
        dens = lam * ratio**lam * rate_factor(path.schedule, s)
        for d in range(D):
            for z in range(width):
                p_pick = off0[d, z]
                if p_pick <= 0.0:
                    continue
                mid = x.copy()
                mid[d] = z
                post_mid = _coordinate_rows(path, float(s), mid)
                k2 = _product_kernel(_tc_rows(path, post_mid, mid, float(s), t1))
                tensor = tensor + w * dens * (p_pick / lam) * k2
    return tensor, float(1.0 - tensor.sum())


def one_step_kernel_oracle(kind, path: MixturePath, x_prev, grid, k: int,
                           max_total: int = 6, n_quad: int = 200):
    """Exact one-interval transition pmf from ``x_prev`` for one sampler kind.

    Returns ``(tensor, info)`` where ``tensor`` has shape
    ``(width,) * dims`` and ``info`` reports the enumeration tail
    (tau-leaping) or the quadrature residual (location-corrected).
    Supported kinds: euler, time_corrected, location_corrected, tau_leaping.
    """
    space = path.space
    if space.width**space.dims > _KERNEL_BUDGET:
        raise CapacityError("one-step kernel oracle beyond the desk-scale budget")
    kind = SamplerKind(kind) if not isinstance(kind, SamplerKind) else kind
    x = x_prev.array if isinstance(x_prev, State) else np.asarray(x_prev, dtype=np.int64)
    t0 = float(grid.points[k])
    t1 = float(grid.points[k + 1])
    if kind is SamplerKind.EULER:
        post = _coordinate_rows(path, t0, x)
        return _product_kernel(_euler_rows(path, post, x, t0, t1)), {}
    if kind is SamplerKind.TIME_CORRECTED:
        post = _coordinate_rows(path, t0, x)
        return _product_kernel(_tc_rows(path, post, x, t0, t1)), {}
    if kind is SamplerKind.TAU_LEAPING:
        post = _coordinate_rows(path, t0, x)
        rows, tail = _tau_rows(path, post, x, t0, t1, max_total)
        return _product_kernel(rows), {"tail": tail}
    if kind is SamplerKind.LOCATION_CORRECTED:
        tensor, residual = _lc_kernel(path, x, t0, t1, n_quad)
        return tensor, {"residual": residual}
    raise ConfigError(f"no one-step oracle for sampler kind {kind!r}")


# -- sweeps --------------------------------------------------------------------


@dataclass(frozen=True)
class SamplerSetting:
    """A named sampler entry of a sweep with its few-step knobs."""

    name: str
    kind: SamplerKind
    m: int = 32
    j: int | None = None
    t_theta: float = 0.0

    @classmethod
    def of(cls, name: str, **knobs) -> "SamplerSetting":
        return cls(name=name, kind=SamplerKind(name), **knobs)


def _cell_spec(setting: SamplerSetting, grid, posterior: PosteriorModel,
               path: MixturePath) -> SamplerSpec:
    cond = None
    if setting.kind in (SamplerKind.EULER_GENERAL,
                        SamplerKind.TIME_CORRECTED_GENERAL,
                        SamplerKind.LOCATION_CORRECTED_GENERAL):
        cond = MixtureConditionalRate(path.schedule)
    return SamplerSpec(kind=setting.kind, grid=grid, posterior=posterior,
                       cond_rate=cond, m=setting.m, j=setting.j,
                       t_theta=setting.t_theta)


def sweep(path: MixturePath, posterior: PosteriorModel,
          settings: list[SamplerSetting], K_list: list[int], seeds: list[int],
          n_samples: int, tv_coords=(0, 1, 2), grid_kind: str = "optimal",
          delta: float = 0.01, threads: int = 1,
          timing: bool = True) -> list[SweepRecord]:
    """Run every (sampler, K, seed) cell and return records in that order.

    TV is measured on ``tv_coords`` against the exact time-(1 - delta)
    marginal.  Wall time covers the sampling loop only; with ``timing``
    off the column is written as 0.0 so reruns are byte-identical.
    """
    if not K_list:
        raise ConfigError("K_list must be nonempty")
    if not seeds:
        raise ConfigError("seeds must be nonempty")
    if n_samples < 1:
        raise ConfigError(f"n_samples must be >= 1, got {n_samples}")
    tv_coords = tuple(int(c) for c in tv_coords)
    reference = exact_marginal(path, 1.0 - delta, tv_coords)
    grids = {K: build_grid(path.schedule, grid_kind, K, delta) for K in K_list}

    cells = []
    for s_idx, setting in enumerate(settings):
        for K in K_list:
            for seed in seeds:
                cells.append((s_idx, setting, K, seed))

    def run_cell(cell) -> SweepRecord:
        s_idx, setting, K, seed = cell
        spec = _cell_spec(setting, grids[K], posterior, path)
        start = time.perf_counter()
        res = run_batch(spec, path, n_samples, seed=(seed, s_idx, K))
        wall = time.perf_counter() - start
        tv = empirical_tv(res.final, reference, tv_coords)
        return SweepRecord(
            sampler=setting.name, K=K, seed=seed, n_samples=n_samples,
            tv=tv, nfe_mean=float(res.nfe.mean()),
            wall_seconds=wall if timing else 0.0,
        )

    if threads <= 1:
        return [run_cell(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run_cell, cells))


def write_csv(records: list[SweepRecord], path) -> None:
    """Serialize records: fixed header, LF endings, full-precision floats."""
    with open(path, "w", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")
