"""Generalized numbers as sampled nets over a canonical epsilon grid.

A generalized number is represented by one sampled representative
``(x_eps)`` on the dyadic grid ``eps_k = 2**-k``.  All asymptotic
predicates (valuation, negligibility, strict positivity) are empirical:
they are decided by regression or per-sample tests over a tail window of
the smallest sampled epsilons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DEFAULT_K",
    "DEFAULT_TAIL_WINDOW",
    "DEFAULT_M_INV",
    "DEFAULT_M_MAX",
    "NUMERIC_FLOOR",
    "EpsilonGrid",
    "GeneralizedNumber",
    "AsymptoticFit",
    "NetClass",
    "ConstructionError",
    "FitError",
    "ClassificationError",
    "GridMismatchError",
    "make_power",
    "make_indicator",
    "constant_net",
    "valuation",
    "sharp_norm",
    "classify",
    "invert",
    "is_strictly_nonzero",
    "is_strictly_positive",
    "is_negligible",
]

DEFAULT_K = 40
DEFAULT_TAIL_WINDOW = 16
DEFAULT_M_INV = 8.0
DEFAULT_M_MAX = 12.0

# Samples with absolute value below this floor are treated as exact zeros
# in log-fits; it keeps log() away from underflow while preserving the
# +inf sentinel for identically vanishing tails.
NUMERIC_FLOOR = 1e-300

# A log-fit whose max deviation exceeds this is considered branched
# (several asymptotic branches with different exponents).
_BRANCH_RESIDUAL = 0.35


class ConstructionError(ValueError):
    """A net could not be built within double precision."""


class FitError(RuntimeError):
    """Not enough usable samples for an asymptotic fit."""


class GridMismatchError(ValueError):
    """Operands live on different epsilon grids."""


class ClassificationError(ValueError):
    """A net failed the classification required by an operation.

    Carries the grid indices at which the per-sample test failed.
    """

    def __init__(self, message: str, failing_indices: Sequence[int]):
        super().__init__(message)
        self.failing_indices = tuple(int(i) for i in failing_indices)


@dataclass(frozen=True)
class EpsilonGrid:
    """Dyadic sampling grid ``eps_k = 2**-k`` for ``k = 0 .. K-1``.

    ``tail_window`` is the number of smallest-epsilon samples used by all
    asymptotic fits and per-sample tail tests.
    """

    k: int = DEFAULT_K
    tail_window: int = DEFAULT_TAIL_WINDOW

    def __post_init__(self):
        if self.k < 4:
            raise ValueError(f"grid needs at least 4 samples, got {self.k}")
        if not (4 <= self.tail_window <= self.k):
            raise ValueError(
                f"tail window must satisfy 4 <= W <= K, got W={self.tail_window}, K={self.k}"
            )

    @property
    def samples(self) -> np.ndarray:
        eps = np.ldexp(1.0, -np.arange(self.k))
        eps.setflags(write=False)
        return eps

    @property
    def log_samples(self) -> np.ndarray:
        logs = -np.arange(self.k) * math.log(2.0)
        logs.setflags(write=False)
        return logs

    @property
    def tail(self) -> np.ndarray:
        """Indices of the tail window (smallest epsilons)."""
        return np.arange(self.k - self.tail_window, self.k)


class NetClass(Enum):
    """Empirical classification of a net.

    ``STRICTLY_POSITIVE``/``STRICTLY_NEGATIVE`` imply ``STRICTLY_NONZERO``
    (invertibility); ``NEGLIGIBLE`` excludes it.  Nets that pass neither
    test (zero divisors such as subsequence indicators) are
    ``MODERATE_INDETERMINATE``.
    """

    NEGLIGIBLE = "negligible"
    STRICTLY_POSITIVE = "strictly_positive"
    STRICTLY_NEGATIVE = "strictly_negative"
    STRICTLY_NONZERO = "strictly_nonzero"
    MODERATE_INDETERMINATE = "moderate_indeterminate"


@dataclass(frozen=True)
class AsymptoticFit:
    """Least-squares exponent fit of a net over the tail window.

    ``slope`` is the empirical valuation: the slope of ``log|x|`` against
    ``log eps`` over usable (above-floor) tail samples.  ``envelope_slope``
    is the slope of the asymptotically dominant branch (upper convex
    envelope in log-log space); it differs from ``slope`` only for nets
    mixing several exponents and matches the sup-style definition of the
    valuation.  An identically vanishing tail is flagged by
    ``all_below_floor`` and reported with the +inf sentinel.
    """

    slope: float
    intercept: float
    residual: float
    all_below_floor: bool
    envelope_slope: float

    @property
    def is_zero(self) -> bool:
        return self.all_below_floor


@dataclass(frozen=True)
class GeneralizedNumber:
    """One representative of a generalized number, sampled on a grid."""

    grid: EpsilonGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.k,):
            raise ValueError(f"expected {self.grid.k} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise ConstructionError(f"non-finite sample at grid index {bad}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # -- ring operations (pointwise on shared grids) --------------------

    def _coerce(self, other) -> "GeneralizedNumber":
        if isinstance(other, GeneralizedNumber):
            if other.grid != self.grid:
                raise GridMismatchError("operands live on different epsilon grids")
            return other
        if isinstance(other, (int, float)):
            return constant_net(float(other), self.grid)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return GeneralizedNumber(self.grid, self.values + other.values)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return GeneralizedNumber(self.grid, self.values - other.values)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return GeneralizedNumber(self.grid, other.values - self.values)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return GeneralizedNumber(self.grid, self.values * other.values)

    __rmul__ = __mul__

    def __neg__(self):
        return GeneralizedNumber(self.grid, -self.values)

    def valuation(self, *, full_window: bool = False) -> AsymptoticFit:
        return valuation(self, full_window=full_window)

    def sharp_norm(self) -> float:
        return sharp_norm(self)


# -- constructors --------------------------------------------------------


def constant_net(c: float, grid: EpsilonGrid) -> GeneralizedNumber:
    return GeneralizedNumber(grid, np.full(grid.k, float(c)))


def make_power(c: float, a: float, grid: EpsilonGrid) -> GeneralizedNumber:
    """The canonical moderate net ``c * eps**a``.

    Raises ConstructionError when the power overflows double precision at
    some grid index (the message names the first offending index).
    """
    if not (math.isfinite(c) and math.isfinite(a)):
        raise ConstructionError("coefficient and exponent must be finite")
    with np.errstate(over="ignore"):
        vals = c * grid.samples**a
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise ConstructionError(
            f"c*eps**a overflows at grid index {bad} (eps=2**-{bad}, a={a})"
        )
    return GeneralizedNumber(grid, vals)


def make_indicator(selector: Callable[[int], bool], grid: EpsilonGrid) -> GeneralizedNumber:
    """Characteristic net of a subsequence of grid indices (an idempotent)."""
    vals = np.array([1.0 if selector(k) else 0.0 for k in range(grid.k)])
    return GeneralizedNumber(grid, vals)


# -- valuation and sharp norm --------------------------------------------


def _upper_envelope_slope(t: np.ndarray, y: np.ndarray) -> float:
    """Slope of the dominant branch of a log-log point cloud.

    Iteratively refits the regression line on the points lying on or
    above it; branches with larger exponents fall below the envelope as
    log(eps) -> -inf and get discarded, so the fit converges to the
    branch realizing the sup-style valuation.
    """
    slope, intercept = np.polyfit(t, y, 1)
    for _ in range(4):
        resid = y - (slope * t + intercept)
        keep = resid >= -1e-9 * (1.0 + np.abs(y))
        if keep.sum() < 2 or keep.all():
            break
        slope, intercept = np.polyfit(t[keep], y[keep], 1)
    return float(slope)


def valuation(x: GeneralizedNumber, *, full_window: bool = False) -> AsymptoticFit:
    """Empirical valuation of a net: exponent fit over the tail window.

    Samples with magnitude below the numeric floor are treated as exact
    zeros and skipped, so branched nets are fitted on their nonzero
    subsequence only.  ``full_window=True`` fits over the whole grid
    instead of the tail; difference nets whose deep tail underflows to
    exact zero are fitted this way.
    """
    idx = np.arange(x.grid.k) if full_window else x.grid.tail
    vals = x.values[idx]
    usable = np.abs(vals) >= NUMERIC_FLOOR
    if not np.any(usable):
        return AsymptoticFit(math.inf, math.nan, math.nan, True, math.inf)
    if np.count_nonzero(usable) < 3:
        raise FitError(
            f"only {int(np.count_nonzero(usable))} usable samples in the fit window"
        )
    t = x.grid.log_samples[idx][usable]
    y = np.log(np.abs(vals[usable]))
    slope, intercept = np.polyfit(t, y, 1)
    residual = float(np.max(np.abs(y - (slope * t + intercept))))
    if residual > _BRANCH_RESIDUAL:
        envelope = _upper_envelope_slope(t, y)
    else:
        envelope = float(slope)
    return AsymptoticFit(float(slope), float(intercept), residual, False, float(envelope))


def sharp_norm(x: GeneralizedNumber) -> float:
    """Sharp norm ``exp(-valuation)``; the zero net has norm 0."""
    fit = valuation(x)
    if fit.is_zero:
        return 0.0
    return math.exp(-fit.slope)


# -- classification -------------------------------------------------------


def _tail_strict_bound(x: GeneralizedNumber, m: float) -> np.ndarray:
    """Tail indices where |x| falls below eps**m (empty = test passes)."""
    tail = x.grid.tail
    thresh = x.grid.samples[tail] ** m
    return tail[np.abs(x.values[tail]) < thresh]


def is_strictly_nonzero(x: GeneralizedNumber, m_inv: float = DEFAULT_M_INV) -> bool:
    return _tail_strict_bound(x, m_inv).size == 0


def is_strictly_positive(x: GeneralizedNumber, m_inv: float = DEFAULT_M_INV) -> bool:
    tail = x.grid.tail
    return bool(np.all(x.values[tail] >= x.grid.samples[tail] ** m_inv))


def is_negligible(x: GeneralizedNumber, m_max: float = DEFAULT_M_MAX) -> bool:
    tail = x.grid.tail
    mags = np.abs(x.values[tail])
    if np.all(mags < NUMERIC_FLOOR):
        return True
    try:
        fit = valuation(x)
    except FitError:
        # sparse tail (most samples exactly zero): fall back to the
        # pointwise surrogate |x_k| <= eps_k**m_max
        return bool(np.all(mags <= x.grid.samples[tail] ** m_max))
    if fit.is_zero:
        return True
    # monotone decay over the window, with pure floating-point slack
    monotone = bool(np.all(mags[1:] <= mags[:-1] * (1.0 + 1e-9) + NUMERIC_FLOOR))
    return fit.slope >= m_max and monotone


def classify(
    x: GeneralizedNumber,
    m_max: float = DEFAULT_M_MAX,
    m_inv: float = DEFAULT_M_INV,
) -> NetClass:
    """Classify a net by tail tests.

    Requires ``m_max > m_inv > 0``.  Indeterminate is a value, not an
    error: zero divisors are neither negligible nor strictly nonzero.
    """
    if not (m_max > m_inv > 0):
        raise ValueError(f"need m_max > m_inv > 0, got m_max={m_max}, m_inv={m_inv}")
    if is_strictly_nonzero(x, m_inv):
        if is_strictly_positive(x, m_inv):
            return NetClass.STRICTLY_POSITIVE
        if is_strictly_positive(-x, m_inv):
            return NetClass.STRICTLY_NEGATIVE
        return NetClass.STRICTLY_NONZERO
    if is_negligible(x, m_max):
        return NetClass.NEGLIGIBLE
    return NetClass.MODERATE_INDETERMINATE


def invert(x: GeneralizedNumber, m: float = DEFAULT_M_INV) -> GeneralizedNumber:
    """Pointwise inverse of a strictly nonzero net.

    Head samples that are exact zeros (allowed for strictly nonzero nets,
    whose tail test only constrains small epsilon) are mapped to 0; this
    is a representative choice that does not change the class.
    """
    failing = _tail_strict_bound(x, m)
    if failing.size:
        raise ClassificationError(
            f"net is not strictly nonzero at exponent {m}", failing
        )
    vals = np.where(np.abs(x.values) < NUMERIC_FLOOR, np.inf, x.values)
    out = np.where(np.isinf(vals), 0.0, 1.0 / vals)
    return GeneralizedNumber(x.grid, out)
