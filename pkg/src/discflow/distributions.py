"""Data distributions and source distributions.

The data side is an explicit joint table over the data vocabulary (desk
scale, so marginals and posteriors downstream can be exact).  A blockwise
autoregressive family is provided as the standard benchmark: blocks of
three coordinates where each coordinate prefers a +/-2 window around its
predecessor with probability 0.9 and is uniform otherwise.  Blocks are
i.i.d., which lets large-``dims`` tables stay factorized instead of being
materialized.

The source side (the t=0 law) is factorized across coordinates: uniform,
a point mass at the all-mask state, or a custom per-coordinate table.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CapacityError, ConfigError, DomainError, StateSpace, decode_index, encode_tokens

__all__ = [
    "DENSE_BUDGET",
    "JointTable",
    "BlockIndependentTable",
    "blockwise_ar1",
    "ar1_transition_matrix",
    "joint_marginal",
    "sample_joint",
    "SourceKind",
    "SourceSpec",
    "source_pmf",
    "save_table",
    "load_table",
]

# Largest dense table any exact oracle will materialize.
DENSE_BUDGET = 10_000_000


def _validate_probs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64).ravel()
    if np.any(probs < 0.0):
        raise ConfigError("joint table entries must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ConfigError(f"joint table mass {probs.sum()!r} is not 1 within 1e-12")
    return probs


def _check_coords(coords, dims: int) -> tuple[int, ...]:
    coords = tuple(int(c) for c in coords)
    if not coords:
        raise ConfigError("coordinate subset must be nonempty")
    if any(c < 0 or c >= dims for c in coords):
        raise ConfigError(f"coordinates {coords} outside range(0, {dims})")
    if any(b <= a for a, b in zip(coords, coords[1:])):
        raise ConfigError("coordinates must be strictly increasing")
    return coords


class JointTable:
    """Dense joint pmf over the data vocabulary of ``space``.

    ``probs`` is indexed by the mixed-radix encoding of the token vector,
    most-significant dimension first (the mask symbol is never part of a
    data table).
    """

    def __init__(self, space: StateSpace, probs: np.ndarray):
        if space.vocab**space.dims > DENSE_BUDGET:
            raise CapacityError(
                f"dense table with {space.vocab}^{space.dims} entries exceeds the budget"
            )
        probs = _validate_probs(probs)
        if probs.size != space.vocab**space.dims:
            raise ConfigError(
                f"table has {probs.size} entries, expected {space.vocab}**{space.dims}"
            )
        probs.setflags(write=False)
        self.space = space
        self.probs = probs

    @property
    def dims(self) -> int:
        return self.space.dims

    @property
    def vocab(self) -> int:
        return self.space.vocab

    @property
    def tensor(self) -> np.ndarray:
        return self.probs.reshape((self.vocab,) * self.dims)

    def marginal(self, coords) -> np.ndarray:
        coords = _check_coords(coords, self.dims)
        drop = tuple(d for d in range(self.dims) if d not in coords)
        return self.tensor.sum(axis=drop) if drop else self.tensor.copy()

    def sample(self, rng, n: int) -> np.ndarray:
        if n < 1:
            raise ConfigError(f"sample count must be >= 1, got {n}")
        rng = np.random.default_rng(rng)
        idx = rng.choice(self.probs.size, size=n, p=self.probs)
        return decode_index(idx, self.vocab, self.dims)


class BlockIndependentTable:
    """Joint law factorizing over consecutive i.i.d.-independent blocks.

    Exact marginals and posteriors for block-structured data never need
    the full ``vocab**dims`` table; they work block by block.
    """

    def __init__(self, space: StateSpace, blocks: list[JointTable]):
        if sum(b.dims for b in blocks) != space.dims:
            raise ConfigError("block dims must partition the space dims")
        if any(b.vocab != space.vocab for b in blocks):
            raise ConfigError("all blocks must share the space vocabulary")
        self.space = space
        self.blocks = tuple(blocks)
        starts = np.cumsum([0] + [b.dims for b in blocks])
        self.block_starts = tuple(int(s) for s in starts[:-1])

    @property
    def dims(self) -> int:
        return self.space.dims

    @property
    def vocab(self) -> int:
        return self.space.vocab

    def block_of(self, coord: int) -> int:
        for i, start in enumerate(self.block_starts):
            if start <= coord < start + self.blocks[i].dims:
                return i
        raise DomainError(f"coordinate {coord} outside the space")

    def marginal(self, coords) -> np.ndarray:
        coords = _check_coords(coords, self.dims)
        pieces = []
        for i, block in enumerate(self.blocks):
            start = self.block_starts[i]
            local = [c - start for c in coords if start <= c < start + block.dims]
            if local:
                pieces.append(block.marginal(local))
        out = pieces[0]
        for p in pieces[1:]:
            out = np.multiply.outer(out, p)
        return out

    def sample(self, rng, n: int) -> np.ndarray:
        if n < 1:
            raise ConfigError(f"sample count must be >= 1, got {n}")
        rng = np.random.default_rng(rng)
        cols = [b.sample(rng, n) for b in self.blocks]
        return np.concatenate(cols, axis=1)

    def to_dense(self) -> JointTable:
        if self.vocab**self.dims > DENSE_BUDGET:
            raise CapacityError("dense form of this block table exceeds the budget")
        flat = self.blocks[0].probs
        for b in self.blocks[1:]:
            flat = np.kron(flat, b.probs)
        return JointTable(self.space, flat)


def ar1_transition_matrix(vocab: int) -> np.ndarray:
    """Row-stochastic ``T[prev, next]`` of the within-block autoregression.

    On the paper-style 1-based labels, a predecessor in ``[3, vocab - 2]``
    (inclusive) draws from ``0.9 * U(prev + {-2..2}) + 0.1 * U(S)``; any other
    predecessor draws uniformly.  Internally both axes are 0-based, so the
    guard becomes ``prev0 in [2, vocab - 3]``.
    """
    if vocab < 5:
        raise ConfigError(f"vocab must be >= 5 for the +/-2 window, got {vocab}")
    T = np.full((vocab, vocab), 1.0 / vocab)
    for prev in range(2, vocab - 2):
        row = np.full(vocab, 0.1 / vocab)
        row[prev - 2 : prev + 3] += 0.9 / 5.0
        T[prev] = row
    return T


def blockwise_ar1(dims: int, vocab: int):
    """Benchmark data law: i.i.d. blocks of three AR-coupled coordinates.

    Returns a dense :class:`JointTable` for ``dims == 3`` and a
    :class:`BlockIndependentTable` otherwise.
    """
    if dims % 3 != 0 or dims < 3:
        raise ConfigError(f"dims must be a positive multiple of 3, got {dims}")
    T = ar1_transition_matrix(vocab)
    first = np.full(vocab, 1.0 / vocab)
    block = np.einsum("a,ab,bc->abc", first, T, T)
    block_space = StateSpace(3, vocab)
    block_table = JointTable(block_space, block.ravel())
    if dims == 3:
        return block_table
    space = StateSpace(dims, vocab)
    return BlockIndependentTable(space, [block_table] * (dims // 3))


def joint_marginal(table, coords) -> np.ndarray:
    """Exact marginal pmf of ``table`` on a strictly increasing coord subset."""
    return table.marginal(coords)


def sample_joint(table, rng, n: int) -> np.ndarray:
    """``n`` i.i.d. draws as an ``(n, dims)`` int array; seeded and reproducible."""
    return table.sample(rng, n)


class SourceKind(enum.Enum):
    UNIFORM = "uniform"
    MASKED = "masked"
    FACTORIZED = "factorized"


@dataclass(frozen=True)
class SourceSpec:
    """The t=0 law, factorized per coordinate."""

    kind: SourceKind
    tables: np.ndarray | None = None  # (dims, vocab), FACTORIZED only

    def __post_init__(self) -> None:
        if self.kind is SourceKind.FACTORIZED:
            if self.tables is None:
                raise ConfigError("factorized source needs per-dimension tables")
            t = np.asarray(self.tables, dtype=np.float64)
            if t.ndim != 2 or np.any(t < 0.0):
                raise ConfigError("source tables must be a nonnegative (dims, vocab) array")
            if np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
                raise ConfigError("each source table row must sum to 1")
            t.setflags(write=False)
            object.__setattr__(self, "tables", t)
        elif self.tables is not None:
            raise ConfigError(f"{self.kind.value} source takes no tables")

    @classmethod
    def uniform(cls) -> "SourceSpec":
        return cls(SourceKind.UNIFORM)

    @classmethod
    def masked(cls) -> "SourceSpec":
        return cls(SourceKind.MASKED)

    @classmethod
    def factorized(cls, tables) -> "SourceSpec":
        return cls(SourceKind.FACTORIZED, np.asarray(tables, dtype=np.float64))

    def pmf_matrix(self, space: StateSpace) -> np.ndarray:
        """Rows ``p0^d`` over the working vocabulary, shape (dims, width)."""
        out = np.zeros((space.dims, space.width))
        if self.kind is SourceKind.UNIFORM:
            out[:, : space.vocab] = 1.0 / space.vocab
        elif self.kind is SourceKind.MASKED:
            if not space.masked:
                raise ConfigError("masked source requires a masked state space")
            out[:, space.mask_token] = 1.0
        else:
            if self.tables.shape != (space.dims, space.vocab):
                raise ConfigError(
                    f"source tables shape {self.tables.shape} does not match "
                    f"({space.dims}, {space.vocab})"
                )
            out[:, : space.vocab] = self.tables
        return out

    def sample(self, space: StateSpace, rng, n: int) -> np.ndarray:
        rng = np.random.default_rng(rng)
        if self.kind is SourceKind.UNIFORM:
            return rng.integers(0, space.vocab, size=(n, space.dims))
        if self.kind is SourceKind.MASKED:
            return np.full((n, space.dims), space.mask_token, dtype=np.int64)
        out = np.empty((n, space.dims), dtype=np.int64)
        for d in range(space.dims):
            out[:, d] = rng.choice(space.vocab, size=n, p=self.tables[d])
        return out


def source_pmf(src: SourceSpec, space: StateSpace, d: int, token: int) -> float:
    """Probability ``p0^d(token)`` on the working vocabulary."""
    if not (0 <= d < space.dims):
        raise DomainError(f"dimension {d} outside range(0, {space.dims})")
    if not (0 <= token < space.width):
        raise DomainError(f"token {token} outside the working vocabulary")
    return float(src.pmf_matrix(space)[d, token])


def save_table(table: JointTable, path: str | Path) -> None:
    """Text export: header ``dims vocab`` then ``state_index probability`` lines."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{table.dims} {table.vocab}\n")
        for i, p in enumerate(table.probs):
            fh.write(f"{i} {float(p)!r}\n")


def load_table(path: str | Path) -> JointTable:
    """Inverse of :func:`save_table`; missing indices default to zero mass."""
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read table file {path!r}: {exc}") from None
    with fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ConfigError(f"{path}: first line must be 'dims vocab'")
        dims, vocab = int(header[0]), int(header[1])
        probs = np.zeros(vocab**dims)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 'state_index probability'")
            idx = int(parts[0])
            if not (0 <= idx < probs.size):
                raise ConfigError(f"{path}:{lineno}: state index {idx} out of range")
            probs[idx] = float(parts[1])
    return JointTable(StateSpace(dims, vocab), probs)
