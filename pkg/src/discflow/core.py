"""State spaces, interpolation schedules, and time grids.

Everything in this module is immutable after construction and cheap to
share; the rest of the package builds on these primitives.  Process time
lives in [0, 1].  Sampling always stops at ``1 - delta`` because the
per-coordinate transition rate ``kappa_dot / (1 - kappa)`` diverges as
``t -> 1``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigError",
    "DomainError",
    "CapacityError",
    "RATE_HORIZON_FLOOR",
    "StateSpace",
    "State",
    "TimeSchedule",
    "LinearSchedule",
    "CosineSchedule",
    "get_schedule",
    "schedule_kappa",
    "schedule_kappa_dot",
    "schedule_kappa_inv",
    "rate_factor",
    "TimeGrid",
    "make_uniform_grid",
    "make_optimal_linear_grid",
    "encode_tokens",
    "decode_index",
]


class ConfigError(ValueError):
    """Invalid construction parameter or run configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class CapacityError(RuntimeError):
    """Exact (dense) computation requested beyond the desk-scale budget."""


# Smallest admissible value of 1 - kappa(t); divisions past this point are
# rejected rather than silently producing huge rates.
RATE_HORIZON_FLOOR = 1e-6


@dataclass(frozen=True)
class StateSpace:
    """Finite product space with ``dims`` coordinates over ``vocab`` tokens.

    Tokens are 0-based.  When ``masked`` is true the working vocabulary is
    extended by one mask symbol whose index is ``vocab`` (kept outside the
    data vocabulary so data tables stay contiguous).
    """

    dims: int
    vocab: int
    masked: bool = False

    def __post_init__(self) -> None:
        if self.dims < 1:
            raise ConfigError(f"dims must be >= 1, got {self.dims}")
        if self.vocab < 2:
            raise ConfigError(f"vocab must be >= 2, got {self.vocab}")

    @property
    def mask_token(self) -> int | None:
        return self.vocab if self.masked else None

    @property
    def width(self) -> int:
        """Size of the working vocabulary (``vocab`` plus the mask slot)."""
        return self.vocab + 1 if self.masked else self.vocab

    @property
    def n_states(self) -> int:
        return self.width**self.dims

    def validate_tokens(self, tokens: np.ndarray) -> None:
        arr = np.asarray(tokens)
        if arr.shape[-1] != self.dims:
            raise DomainError(
                f"token vector has length {arr.shape[-1]}, expected {self.dims}"
            )
        if arr.size and (arr.min() < 0 or arr.max() >= self.width):
            raise DomainError(
                f"token out of range [0, {self.width}) for this space"
            )


def encode_tokens(tokens: np.ndarray, base: int) -> np.ndarray:
    """Mixed-radix index of token vectors, most-significant dimension first."""
    arr = np.asarray(tokens, dtype=np.int64)
    dims = arr.shape[-1]
    weights = base ** np.arange(dims - 1, -1, -1, dtype=np.int64)
    return arr @ weights


def decode_index(index: np.ndarray, base: int, dims: int) -> np.ndarray:
    """Inverse of :func:`encode_tokens`; returns shape ``(..., dims)``."""
    idx = np.asarray(index, dtype=np.int64)
    out = np.empty(idx.shape + (dims,), dtype=np.int64)
    for d in range(dims - 1, -1, -1):
        out[..., d] = idx % base
        idx = idx // base
    return out


@dataclass(frozen=True)
class State:
    """A single point of the working space: ``dims`` token indices."""

    tokens: tuple[int, ...]

    @classmethod
    def of(cls, tokens) -> "State":
        return cls(tuple(int(t) for t in np.asarray(tokens).ravel()))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.tokens, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.tokens)


def _check_unit_interval(t) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"time {t!r} outside [0, 1]")
    return arr


class TimeSchedule(ABC):
    """Interpolation speed ``kappa``: non-decreasing, kappa(0)=0, kappa(1)=1.

    All methods accept scalars or numpy arrays of times.
    """

    name: str

    @abstractmethod
    def kappa(self, t): ...

    @abstractmethod
    def kappa_dot(self, t): ...

    @abstractmethod
    def kappa_inv(self, u): ...

    def one_minus_kappa(self, t):
        """1 - kappa(t), in a cancellation-free form where available."""
        return 1.0 - self.kappa(t)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"{type(self).__name__}()"


class LinearSchedule(TimeSchedule):
    name = "linear"

    def kappa(self, t):
        return _check_unit_interval(t)

    def kappa_dot(self, t):
        arr = _check_unit_interval(t)
        return np.ones_like(arr) if arr.ndim else 1.0

    def kappa_inv(self, u):
        arr = np.asarray(u, dtype=np.float64)
        if np.any(arr < 0.0) or np.any(arr >= 1.0):
            raise DomainError(f"kappa_inv argument {u!r} outside [0, 1)")
        return arr if arr.ndim else float(arr)


class CosineSchedule(TimeSchedule):
    """kappa(t) = sin^2(pi t / 2), the cosine interpolation schedule."""

    name = "cosine"

    def kappa(self, t):
        arr = _check_unit_interval(t)
        out = np.sin(0.5 * np.pi * arr) ** 2
        return out if arr.ndim else float(out)

    def kappa_dot(self, t):
        arr = _check_unit_interval(t)
        out = 0.5 * np.pi * np.sin(np.pi * arr)
        return out if arr.ndim else float(out)

    def kappa_inv(self, u):
        arr = np.asarray(u, dtype=np.float64)
        if np.any(arr < 0.0) or np.any(arr >= 1.0):
            raise DomainError(f"kappa_inv argument {u!r} outside [0, 1)")
        out = (2.0 / np.pi) * np.arcsin(np.sqrt(arr))
        return out if arr.ndim else float(out)

    def one_minus_kappa(self, t):
        arr = _check_unit_interval(t)
        out = np.cos(0.5 * np.pi * arr) ** 2
        return out if arr.ndim else float(out)


_SCHEDULES = {"linear": LinearSchedule, "cosine": CosineSchedule}


def get_schedule(name: str) -> TimeSchedule:
    try:
        return _SCHEDULES[name.lower()]()
    except KeyError:
        raise ConfigError(f"unknown schedule {name!r}; choose from {sorted(_SCHEDULES)}") from None


def schedule_kappa(schedule: TimeSchedule, t):
    return schedule.kappa(t)


def schedule_kappa_dot(schedule: TimeSchedule, t):
    return schedule.kappa_dot(t)


def schedule_kappa_inv(schedule: TimeSchedule, u):
    return schedule.kappa_inv(u)


def rate_factor(schedule: TimeSchedule, t):
    """The per-coordinate rate scale kappa_dot(t) / (1 - kappa(t)).

    Raises :class:`DomainError` once ``1 - kappa(t)`` drops below the
    engine floor; callers are expected to stay on ``[0, 1 - delta]``.
    """
    om = np.asarray(schedule.one_minus_kappa(t), dtype=np.float64)
    if np.any(om < RATE_HORIZON_FLOOR):
        raise DomainError(
            f"1 - kappa(t) = {float(np.min(om)):.3g} below floor {RATE_HORIZON_FLOOR}; "
            "evaluation past the early-stopping horizon is rejected"
        )
    out = np.asarray(schedule.kappa_dot(t), dtype=np.float64) / om
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing discretization ``0 = t_0 < ... < t_K = 1 - delta``."""

    points: np.ndarray
    delta: float

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if pts.ndim != 1 or pts.size < 2:
            raise ConfigError("grid needs at least two points (K >= 1)")
        if pts[0] != 0.0 or pts[-1] != 1.0 - self.delta:
            raise ConfigError("grid must start at 0 and end at 1 - delta exactly")
        if np.any(np.diff(pts) <= 0.0):
            raise ConfigError("grid points must be strictly increasing")
        pts.setflags(write=False)

    @property
    def K(self) -> int:
        return self.points.size - 1

    @property
    def taus(self) -> np.ndarray:
        return np.diff(self.points)


def make_uniform_grid(K: int, delta: float) -> TimeGrid:
    """Equispaced grid: t_k = k (1 - delta) / K."""
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    return TimeGrid(np.linspace(0.0, 1.0 - delta, K + 1), delta)


def make_optimal_linear_grid(K: int, delta: float) -> TimeGrid:
    """Grid minimizing the discretization-error bound for the linear schedule.

    Step widths are ``tau_k = delta^((k-1)/K) - delta^(k/K)``, equivalently
    ``t_k = 1 - delta^(k/K)``, which makes ``tau_k / (1 - t_k)`` the constant
    ``delta^(-1/K) - 1`` for every interval.
    """
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    k = np.arange(K + 1, dtype=np.float64)
    pts = 1.0 - delta ** (k / K)
    pts[0] = 0.0
    pts[-1] = 1.0 - delta
    return TimeGrid(pts, delta)
