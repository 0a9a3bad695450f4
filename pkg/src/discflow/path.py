"""Mixture probability path, exact marginal/posterior oracles, and rates.

The path interpolates a factorized source law into the data law through
``p^d(x|x1) = (1 - kappa_t) p0^d(x) + kappa_t [x == x1]`` per coordinate.
Because the data table is explicit, the time-t marginal, the per-coordinate
clean-token posterior, and the resulting unconditional rate can all be
computed exactly; samplers in this package are benchmarked against these
quantities rather than against another approximate simulator.

Posterior conventions: rows live on the working vocabulary (data tokens
plus the mask slot when present) and always place zero mass on the mask
token; each row sums to one.
"""

from __future__ import annotations

import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import (
    CapacityError,
    ConfigError,
    DomainError,
    State,
    StateSpace,
    TimeSchedule,
    decode_index,
    encode_tokens,
    rate_factor,
)
from .distributions import BlockIndependentTable, JointTable, SourceKind, SourceSpec

__all__ = [
    "UnreachableStateError",
    "MixturePath",
    "PosteriorEval",
    "PosteriorModel",
    "ExactPosterior",
    "PerturbedPosterior",
    "perturbed_posterior",
    "ConstantPosterior",
    "conditional_path_prob",
    "conditional_rate",
    "exact_marginal",
    "exact_posterior",
    "posterior_rows_batch",
    "posterior_table",
    "oracle_rate",
    "generator_matrix",
]

# Largest intermediate tensor (elements) a chunked posterior batch may build.
_CHUNK_ELEMS = 4_000_000
# Largest (n_states * dims * width) footprint for a cached full-state table.
_TABLE_BUDGET = 2_000_000


class UnreachableStateError(ValueError):
    """Posterior requested at a state with zero probability under the path."""


class MixturePath:
    """Bundle of (state space, schedule, source, data) defining the path.

    The working space is derived from the data space: a masked source
    extends the vocabulary by the mask symbol.
    """

    def __init__(self, schedule: TimeSchedule, source: SourceSpec,
                 data: JointTable | BlockIndependentTable):
        data_space = data.space
        masked = source.kind is SourceKind.MASKED
        self.space = StateSpace(data_space.dims, data_space.vocab, masked=masked)
        self.schedule = schedule
        self.source = source
        self.data = data
        self.src_matrix = source.pmf_matrix(self.space)  # (dims, width)
        self.src_matrix.setflags(write=False)
        self._table_cache: dict[object, np.ndarray] = {}
        self._table_lock = threading.Lock()

    @property
    def time_independent_posterior(self) -> bool:
        """True when the posterior does not depend on t (masked source)."""
        return self.source.kind is SourceKind.MASKED

    def _blocks(self):
        """Iterate (coord_start, block JointTable) pairs covering all dims."""
        if isinstance(self.data, BlockIndependentTable):
            return list(zip(self.data.block_starts, self.data.blocks))
        return [(0, self.data)]


def conditional_path_prob(path: MixturePath, t: float, d: int,
                          x_token: int, x1_token: int) -> float:
    """``p^d_{t|1}(x_token | x1_token)`` on the working vocabulary."""
    space = path.space
    if not (0 <= d < space.dims):
        raise DomainError(f"dimension {d} outside range(0, {space.dims})")
    if not (0 <= x_token < space.width):
        raise DomainError(f"x token {x_token} outside the working vocabulary")
    if not (0 <= x1_token < space.vocab):
        raise DomainError(f"x1 token {x1_token} outside the data vocabulary")
    k = path.schedule.kappa(t)
    return float((1.0 - k) * path.src_matrix[d, x_token] + k * (x_token == x1_token))


def conditional_rate(path: MixturePath, t: float, d: int,
                     x_token: int, z_token: int, x1_token: int) -> float:
    """Rate of the conditional process: ``rf(t) * (δ_{x1}(z) - δ_x(z))``."""
    space = path.space
    if not (0 <= d < space.dims):
        raise DomainError(f"dimension {d} outside range(0, {space.dims})")
    for name, tok in (("x", x_token), ("z", z_token)):
        if not (0 <= tok < space.width):
            raise DomainError(f"{name} token {tok} outside the working vocabulary")
    if not (0 <= x1_token < space.vocab):
        raise DomainError(f"x1 token {x1_token} outside the data vocabulary")
    rf = rate_factor(path.schedule, t)
    return rf * (float(z_token == x1_token) - float(z_token == x_token))


def _path_matrix(path: MixturePath, t: float, d: int) -> np.ndarray:
    """(width, vocab) matrix A[x, x1] = p^d_{t|1}(x | x1)."""
    space = path.space
    k = path.schedule.kappa(t)
    A = (1.0 - k) * np.repeat(path.src_matrix[d][:, None], space.vocab, axis=1)
    A += k * np.eye(space.width, space.vocab)
    return A


def exact_marginal(path: MixturePath, t: float, coords=None) -> np.ndarray:
    """Exact time-t marginal pmf on ``coords`` (all dims by default).

    Returns a tensor of shape ``(width,) * len(coords)``.  Works blockwise
    for block-factorized data, so only the requested sub-cube is ever
    materialized.
    """
    space = path.space
    if coords is None:
        coords = tuple(range(space.dims))
    coords = tuple(int(c) for c in coords)
    if space.width ** len(coords) > _CHUNK_ELEMS:
        raise CapacityError(f"marginal over {len(coords)} coords exceeds the dense budget")
    pieces = []
    for start, block in path._blocks():
        local = [c - start for c in coords if start <= c < start + block.dims]
        if not local:
            continue
        T = block.marginal(local)
        for axis, c in enumerate(local):
            A = _path_matrix(path, t, start + c)
            T = np.moveaxis(np.tensordot(A, T, axes=(1, axis)), 0, axis)
        pieces.append(T)
    out = pieces[0]
    for p in pieces[1:]:
        out = np.multiply.outer(out, p)
    return out


@dataclass(frozen=True)
class PosteriorEval:
    """Per-coordinate clean-token posterior rows at one (t, state) query."""

    t: float
    tokens: tuple[int, ...]
    probs: np.ndarray  # (dims, width), rows sum to 1, zero mass on mask

    def __post_init__(self) -> None:
        self.probs.setflags(write=False)

    def row_mass_off(self, d: int) -> float:
        """Posterior mass away from the current token of coordinate d."""
        return float(1.0 - self.probs[d, self.tokens[d]])


def _observation_weights(path: MixturePath, kappas: np.ndarray,
                         states: np.ndarray) -> np.ndarray:
    """(B, dims, vocab) weights w[b,e,x1] = p^e_{t_b|1}(state[b,e] | x1)."""
    B, D = states.shape
    vocab = path.space.vocab
    base = path.src_matrix[np.arange(D)[None, :], states]  # (B, D) value p0^e(x^e)
    w = np.repeat(((1.0 - kappas)[:, None] * base)[:, :, None], vocab, axis=2)
    data_mask = states < vocab
    b_idx, d_idx = np.nonzero(data_mask)
    w[b_idx, d_idx, states[b_idx, d_idx]] += kappas[b_idx]
    return w


def posterior_rows_batch(path: MixturePath, t, states: np.ndarray,
                         dedupe: bool = True, strict: bool = True) -> np.ndarray:
    """Vectorized posterior rows for a batch of (t, state) queries.

    ``t`` may be a scalar (shared time) or an array of per-row times.
    Returns shape ``(B, dims, width)``.  Zero-mass states raise
    :class:`UnreachableStateError` unless ``strict`` is false, in which
    case their rows come back all-zero.
    """
    states = np.asarray(states, dtype=np.int64)
    if states.ndim == 1:
        states = states[None, :]
    path.space.validate_tokens(states)
    B, D = states.shape
    t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), (B,))
    scalar_t = np.asarray(t).ndim == 0

    if scalar_t and dedupe and B > 64:
        enc = encode_tokens(states, path.space.width)
        uniq, inverse = np.unique(enc, return_inverse=True)
        if uniq.size < B:
            ustates = decode_index(uniq, path.space.width, D)
            urows = posterior_rows_batch(path, t, ustates, dedupe=False, strict=strict)
            return urows[inverse]

    kappas = path.schedule.kappa(t_arr)
    w = _observation_weights(path, kappas, states)  # (B, D, vocab)
    scale = w.max(axis=2)  # (B, D)
    bad = scale.min(axis=1) <= 0.0
    if np.any(bad):
        if strict:
            raise UnreachableStateError("state has zero probability at the queried time")
        scale = np.where(scale > 0.0, scale, 1.0)
    w = w / scale[:, :, None]

    vocab = path.space.vocab
    rows = np.zeros((B, D, path.space.width))
    for start, block in path._blocks():
        bd = block.dims
        tensor = block.tensor
        chunk = max(1, _CHUNK_ELEMS // tensor.size)
        for lo in range(0, B, chunk):
            hi = min(B, lo + chunk)
            M = np.broadcast_to(tensor, (hi - lo,) + tensor.shape).copy()
            for e in range(bd):
                shape = [hi - lo] + [1] * bd
                shape[e + 1] = vocab
                M *= w[lo:hi, start + e].reshape(shape)
            for e in range(bd):
                axes = tuple(a + 1 for a in range(bd) if a != e)
                G = M.sum(axis=axes)  # (chunk, vocab)
                total = G.sum(axis=1)
                if np.any(total <= 0.0):
                    if strict:
                        raise UnreachableStateError(
                            "state has zero probability at the queried time"
                        )
                    total = np.where(total > 0.0, total, 1.0)
                rows[lo:hi, start + e, :vocab] = G / total[:, None]
    if not strict and np.any(bad):
        rows[bad] = 0.0
    return rows


def exact_posterior(path: MixturePath, t: float, state) -> PosteriorEval:
    """Exact posterior rows at a single (t, state), computed in log space."""
    tokens = state.array if isinstance(state, State) else np.asarray(state, dtype=np.int64)
    path.space.validate_tokens(tokens)
    if not (0.0 <= t < 1.0):
        raise DomainError(f"posterior time {t} must lie in [0, 1)")
    D = path.space.dims
    vocab = path.space.vocab
    kappas = np.full(1, path.schedule.kappa(t))
    w = _observation_weights(path, kappas, tokens[None, :])[0]  # (D, vocab)
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    rows = np.zeros((D, path.space.width))
    for start, block in path._blocks():
        bd = block.dims
        with np.errstate(divide="ignore"):
            L = np.log(block.tensor)
        for e in range(bd):
            shape = [1] * bd
            shape[e] = vocab
            L = L + logw[start + e].reshape(shape)
        for e in range(bd):
            axes = tuple(a for a in range(bd) if a != e)
            logrow = logsumexp(L, axis=axes) if axes else L
            norm = logsumexp(logrow)
            if norm == -np.inf:
                raise UnreachableStateError(
                    "state has zero probability at the queried time"
                )
            rows[start + e, :vocab] = np.exp(logrow - norm)
    return PosteriorEval(t=float(t), tokens=tuple(int(x) for x in tokens), probs=rows)


def posterior_table(path: MixturePath, t: float) -> np.ndarray:
    """Posterior rows for every working state at time ``t``, cached.

    Shape ``(n_states, dims, width)`` indexed by the mixed-radix encoding
    over the working vocabulary.  Unreachable states get zero rows.
    For a time-independent posterior the cache holds a single entry.
    """
    space = path.space
    if space.n_states * space.dims * space.width > _TABLE_BUDGET:
        raise CapacityError("full-state posterior table exceeds the budget")
    key = "ti" if path.time_independent_posterior else float(t)
    cached = path._table_cache.get(key)
    if cached is not None:
        return cached
    # Time-independent posteriors are tabulated at an interior time; every
    # state is reachable there, while e.g. t = 0 would zero out all rows of
    # partially unmasked states.
    eval_t = 0.5 if key == "ti" else t
    states = decode_index(np.arange(space.n_states), space.width, space.dims)
    table = posterior_rows_batch(path, eval_t, states, dedupe=False, strict=False)
    table.setflags(write=False)
    with path._table_lock:
        if len(path._table_cache) > 512:
            path._table_cache.clear()
        path._table_cache[key] = table
    return path._table_cache[key]


def _reachable_mask(path: MixturePath, t: float, states: np.ndarray) -> np.ndarray:
    """Which states have positive probability at time t (vectorized)."""
    kappas = np.broadcast_to(np.float64(path.schedule.kappa(t)), (states.shape[0],))
    w = _observation_weights(path, kappas, states)
    return w.max(axis=2).min(axis=1) > 0.0


def oracle_rate(path: MixturePath, t: float, state) -> np.ndarray:
    """Unconditional per-coordinate rate table at (t, state).

    Entry ``(d, z)`` for ``z != x^d`` is ``rf(t) * posterior(z | state)``;
    the current-token entry makes each row sum to zero.  Shape
    ``(dims, width)``.
    """
    post = exact_posterior(path, t, state)
    rf = rate_factor(path.schedule, t)
    rates = rf * post.probs.copy()
    for d, tok in enumerate(post.tokens):
        off = rates[d].sum() - rates[d, tok]
        rates[d, tok] = -off
    return rates


def generator_matrix(path: MixturePath, t: float) -> np.ndarray:
    """Dense rate matrix over all working states (desk-scale test helper)."""
    space = path.space
    n = space.n_states
    if n * n > _CHUNK_ELEMS:
        raise CapacityError("dense generator exceeds the budget")
    states = decode_index(np.arange(n), space.width, space.dims)
    Q = np.zeros((n, n))
    powers = space.width ** np.arange(space.dims - 1, -1, -1, dtype=np.int64)
    reachable = _reachable_mask(path, t, states)
    for i in range(n):
        if not reachable[i]:
            continue
        rates = oracle_rate(path, t, states[i])
        for d in range(space.dims):
            cur = states[i, d]
            for z in range(space.width):
                if z == cur:
                    continue
                j = i + (z - cur) * powers[d]
                Q[i, j] += rates[d, z]
        Q[i, i] = -(Q[i].sum() - Q[i, i])
    return Q


class PosteriorModel(ABC):
    """Anything a sampler can query for posterior rows.

    ``evaluate`` is the accounted entry point: the call counter goes up by
    exactly one per call (thread-safe).  ``rows`` is the batched entry point
    used by the vectorized engines; it does not touch the counter — per-
    trajectory function-evaluation costs are tracked by the sampling engine
    itself.
    """

    #: rows do not depend on t (enables per-trajectory caching in samplers)
    time_independent: bool = False
    #: unmasked coordinates are guaranteed point masses at their own token
    mask_identity: bool = False

    def __init__(self) -> None:
        self._nfe = 0
        self._nfe_lock = threading.Lock()

    @property
    def nfe_count(self) -> int:
        return self._nfe

    def evaluate(self, t: float, state) -> PosteriorEval:
        with self._nfe_lock:
            self._nfe += 1
        return self._evaluate(t, state)

    @abstractmethod
    def _evaluate(self, t: float, state) -> PosteriorEval: ...

    def rows(self, t, states: np.ndarray) -> np.ndarray:
        """Batched rows, shape (B, dims, width); ``t`` scalar or (B,)."""
        states = np.asarray(states, dtype=np.int64)
        t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), (states.shape[0],))
        return np.stack(
            [self._evaluate(float(tb), s).probs for tb, s in zip(t_arr, states)]
        )


class ExactPosterior(PosteriorModel):
    """The exact oracle posterior of a mixture path.

    Results are memoized per query key; with a masked source the key drops
    the time coordinate because the posterior is time-independent.
    """

    def __init__(self, path: MixturePath):
        super().__init__()
        self.path = path
        self.time_independent = path.time_independent_posterior
        self.mask_identity = path.space.masked
        self._cache: dict[object, PosteriorEval] = {}

    def _key(self, t: float, tokens: tuple[int, ...]):
        return tokens if self.time_independent else (float(t), tokens)

    def _evaluate(self, t: float, state) -> PosteriorEval:
        tokens = tuple(int(x) for x in np.asarray(
            state.array if isinstance(state, State) else state).ravel())
        key = self._key(t, tokens)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = exact_posterior(self.path, t, np.array(tokens))
        if len(self._cache) < 65536:
            self._cache[key] = out
        return out

    def rows(self, t, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        if np.asarray(t).ndim == 0:
            space = self.path.space
            if space.n_states * space.dims * space.width <= _TABLE_BUDGET:
                table = posterior_table(self.path, float(t))
                return table[encode_tokens(states, space.width)]
        return posterior_rows_batch(self.path, t, states)


class PerturbedPosterior(PosteriorModel):
    """Gaussian log-space perturbation of another model.

    Emulates a trained model's estimation error: i.i.d. noise of scale
    ``noise_scale`` on the log-probabilities, renormalized per row.  Fully
    deterministic given (t, state, seed); entries that are exactly zero
    stay zero.  When the inner model is time-independent the noise key
    drops t, so time-independence is preserved.
    """

    def __init__(self, inner: PosteriorModel, noise_scale: float, seed: int = 0):
        if noise_scale < 0.0:
            raise ConfigError(f"noise scale must be >= 0, got {noise_scale}")
        super().__init__()
        self.inner = inner
        self.noise_scale = float(noise_scale)
        self.seed = int(seed)
        self.time_independent = inner.time_independent
        self.mask_identity = inner.mask_identity

    def _perturb(self, t: float, tokens: np.ndarray, probs: np.ndarray) -> np.ndarray:
        if self.noise_scale == 0.0:
            return probs
        if self.time_independent:
            entropy = (self.seed, *map(int, tokens))
        else:
            t_bits = int(np.float64(t).view(np.uint64))
            entropy = (self.seed, t_bits, *map(int, tokens))
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
        noise = rng.normal(0.0, self.noise_scale, size=probs.shape)
        out = np.zeros_like(probs)
        pos = probs > 0.0
        with np.errstate(divide="ignore"):
            logits = np.where(pos, np.log(probs, where=pos) + noise, -np.inf)
        for d in range(probs.shape[0]):
            row = logits[d]
            out[d] = np.exp(row - logsumexp(row))
        return out

    def _evaluate(self, t: float, state) -> PosteriorEval:
        base = self.inner._evaluate(t, state)
        tokens = np.array(base.tokens)
        return PosteriorEval(t=base.t, tokens=base.tokens,
                             probs=self._perturb(t, tokens, np.array(base.probs)))

    def rows(self, t, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        base = self.inner.rows(t, states)
        if self.noise_scale == 0.0:
            return base
        t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), (states.shape[0],))
        return np.stack(
            [self._perturb(float(tb), s, np.array(r))
             for tb, s, r in zip(t_arr, states, base)]
        )


def perturbed_posterior(inner: PosteriorModel, noise_scale: float,
                        rng_seed: int = 0) -> PosteriorModel:
    """Wrap ``inner`` with deterministic log-space Gaussian noise."""
    return PerturbedPosterior(inner, noise_scale, rng_seed)


class ConstantPosterior(PosteriorModel):
    """Fixed rows regardless of (t, state); a calibration stub for tests."""

    time_independent = True
    mask_identity = False

    def __init__(self, rows: np.ndarray):
        super().__init__()
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or np.any(rows < 0.0):
            raise ConfigError("rows must be a nonnegative (dims, width) array")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > 1e-9):
            raise ConfigError("each stub row must sum to 1")
        rows.setflags(write=False)
        self.fixed = rows

    def _evaluate(self, t: float, state) -> PosteriorEval:
        tokens = tuple(int(x) for x in np.asarray(
            state.array if isinstance(state, State) else state).ravel())
        return PosteriorEval(t=float(t), tokens=tokens, probs=self.fixed)

    def rows(self, t, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.int64)
        return np.broadcast_to(self.fixed, (states.shape[0],) + self.fixed.shape)
