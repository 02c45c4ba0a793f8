"""Sharp-topology toolkit: dressed balls, interval models, completeness.

The sharp ultrametric d(x, y) = exp(-valuation(x - y)) makes the ring of
generalized numbers a complete ultrametric space.  Dressed balls are
realized constructively through euclidean models: one closed interval
per epsilon, of half-width C_eps * eps**rho with a condition-(E) width
net C.  Nested chains of balls intersect; the witness is produced by
nesting the models per epsilon and taking midpoints of the innermost
interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .nets import (
    EpsilonGrid,
    FitError,
    GeneralizedNumber,
    GridMismatchError,
    sharp_norm,
    valuation,
)

__all__ = [
    "DressedBall",
    "ConditionENet",
    "EuclideanModel",
    "ConditionError",
    "NestingError",
    "ultrametric_distance",
    "make_condition_E",
    "euclidean_model",
    "capture_representative",
    "intersect_nested",
    "IntersectionCertificate",
]

MAX_CHAIN = 64
SLOPE_TOL = 0.05  # sharp-norm-1 tolerance for condition (E), in slope


class ConditionError(ValueError):
    """A width net cannot satisfy condition (E)."""


class NestingError(ValueError):
    """A chain of balls fails the nesting precondition at some pair."""

    def __init__(self, message: str, pair: int):
        super().__init__(message)
        self.pair = pair


@dataclass(frozen=True)
class DressedBall:
    """Closed sharp-metric ball; rho = -log(radius) is the value-group level."""

    center: GeneralizedNumber
    radius: float

    def __post_init__(self):
        if not (self.radius > 0):
            raise ValueError("radius must be positive")

    @property
    def rho(self) -> float:
        return -math.log(self.radius)

    @property
    def grid(self) -> EpsilonGrid:
        return self.center.grid


@dataclass(frozen=True)
class ConditionENet:
    """Positive width net, monotone increasing as eps decreases, sharp norm 1."""

    grid: EpsilonGrid
    samples: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.samples, dtype=float)
        if vals.shape != (self.grid.k,):
            raise ValueError("width net must have one sample per grid epsilon")
        if np.any(vals <= 0):
            raise ConditionError("width net must be positive at every epsilon")
        if np.any(np.diff(vals) < -1e-15):
            raise ConditionError("width net must increase monotonically as eps -> 0")
        fit = valuation(GeneralizedNumber(self.grid, vals))
        if fit.is_zero or abs(fit.slope) > SLOPE_TOL:
            raise ConditionError(
                f"width net has sharp-norm slope {fit.slope:.3f}, need |slope| <= {SLOPE_TOL}"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "samples", vals)


@dataclass(frozen=True)
class EuclideanModel:
    """Per-epsilon interval realization of a dressed ball."""

    grid: EpsilonGrid
    center_rep: np.ndarray
    halfwidth: np.ndarray
    rho: float

    @property
    def lower(self) -> np.ndarray:
        return self.center_rep - self.halfwidth

    @property
    def upper(self) -> np.ndarray:
        return self.center_rep + self.halfwidth

    def contains(self, values: np.ndarray) -> np.ndarray:
        return (values >= self.lower) & (values <= self.upper)


def ultrametric_distance(x: GeneralizedNumber, y: GeneralizedNumber) -> float:
    """Sharp distance exp(-valuation(x - y)); zero for negligible difference."""
    if x.grid != y.grid:
        raise GridMismatchError("operands live on different epsilon grids")
    return sharp_norm(x - y)


def _running_condition_values(raw: np.ndarray) -> np.ndarray:
    """Running max over larger epsilons, clipped below at 1, doubled."""
    return 2.0 * np.maximum(np.maximum.accumulate(raw), 1.0)


def make_condition_E(raw, grid: EpsilonGrid) -> ConditionENet:
    """Admissible width net enveloping nonnegative raw samples.

    The construction is a running max over the already-seen (larger)
    epsilons, clipped below at 1 and doubled, so the result dominates
    2*raw pointwise.  Raw data that genuinely grows like a negative
    power cannot have sharp norm 1 and is rejected.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape == ():
        raw = np.full(grid.k, float(raw))
    if raw.shape != (grid.k,):
        raise ValueError("raw samples must match the grid")
    if np.any(raw < 0) or not np.all(np.isfinite(raw)):
        raise ValueError("raw samples must be finite and nonnegative")
    return ConditionENet(grid, _running_condition_values(raw))


def euclidean_model(
    ball: DressedBall,
    width: ConditionENet,
    representative: Optional[np.ndarray] = None,
) -> EuclideanModel:
    """Interval model of a dressed ball with the given width net.

    ``representative`` overrides the stored center samples (it must be a
    valid representative, i.e. differ by a negligible net; the caller is
    trusted on this).
    """
    grid = ball.grid
    if width.grid != grid:
        raise GridMismatchError("width net lives on a different grid")
    rep = ball.center.values if representative is None else np.asarray(representative, float)
    if rep.shape != (grid.k,):
        raise ValueError("representative must have one sample per epsilon")
    hw = width.samples * grid.samples**ball.rho
    return EuclideanModel(grid, rep.copy(), hw, ball.rho)


def capture_representative(
    model: EuclideanModel, y: GeneralizedNumber
) -> Tuple[np.ndarray, np.ndarray]:
    """Adjust a representative of y to lie inside the model where it escapes.

    Escaping samples are replaced by the model center (a finite-prefix
    adjustment for any y strictly inside the ball).  Returns the adjusted
    samples and the boolean mask of adjusted slots.
    """
    inside = model.contains(y.values)
    adjusted = np.where(inside, y.values, model.center_rep)
    return adjusted, ~inside


@dataclass(frozen=True)
class IntersectionCertificate:
    """Distances of the constructed witness from every chain center."""

    radii: tuple
    distances: tuple
    tolerance: float
    models_nested: bool

    @property
    def passed(self) -> bool:
        return self.models_nested and all(
            d <= r * (1.0 + self.tolerance) for d, r in zip(self.distances, self.radii)
        )


def intersect_nested(
    balls: Sequence[DressedBall], tol: float = 1e-3
) -> Tuple[GeneralizedNumber, IntersectionCertificate, List[EuclideanModel]]:
    """Construct a common point of a nested chain of dressed balls.

    Preconditions: radii strictly decreasing and d(x_{i+1}, x_i) <= r_i
    for consecutive pairs (within the fit tolerance).  The model of each
    ball is shrunk so the half-widths halve at every level and escaping
    successor centers are re-centered slot-wise (a finite-prefix
    representative change), which makes the interval chain nested at
    every single epsilon.  The witness is the midpoint net of the
    innermost interval.
    """
    n = len(balls)
    if n == 0:
        raise ValueError("need at least one ball")
    if n > MAX_CHAIN:
        raise ValueError(f"chain too long: {n} > {MAX_CHAIN}")
    grid = balls[0].grid
    if any(b.grid != grid for b in balls):
        raise GridMismatchError("all balls must share a grid")
    radii = [b.radius for b in balls]
    for i in range(n - 1):
        if not radii[i + 1] < radii[i]:
            raise NestingError(f"radii must strictly decrease at pair {i}", i)
        d = ultrametric_distance(balls[i + 1].center, balls[i].center)
        if d > radii[i] * (1.0 + tol):
            raise NestingError(
                f"centers {i} and {i + 1} are too far apart: d={d:.4g} > r={radii[i]:.4g}", i
            )

    eps = grid.samples
    reps = [b.center.values.copy() for b in balls]
    halfwidths: List[np.ndarray] = []
    for i in range(n):
        if i > 0:
            # re-center slots where the previous level's inner half misses
            # this representative (a finite-prefix representative change)
            escaped = np.abs(reps[i] - reps[i - 1]) > halfwidths[i - 1] / 2.0
            reps[i] = np.where(escaped, reps[i - 1], reps[i])
        if i < n - 1:
            raw = np.abs(reps[i + 1] - reps[i]) / eps ** balls[i].rho
        else:
            raw = np.ones(grid.k)
        hw = _running_condition_values(raw) * eps ** balls[i].rho
        if i > 0:
            # halving rule keeps the interval chain nested at every epsilon
            hw = np.minimum(hw, halfwidths[i - 1] / 2.0)
        halfwidths.append(hw)

    # endpoint clip: exact nesting in floating point
    models: List[EuclideanModel] = []
    lo = reps[0] - halfwidths[0]
    hi = reps[0] + halfwidths[0]
    models.append(EuclideanModel(grid, reps[0], halfwidths[0], balls[0].rho))
    nested = True
    for i in range(1, n):
        lo_i = np.maximum(reps[i] - halfwidths[i], lo)
        hi_i = np.minimum(reps[i] + halfwidths[i], hi)
        if np.any(lo_i > hi_i):
            nested = False
            lo_i = np.minimum(lo_i, hi_i)
        center = 0.5 * (lo_i + hi_i)
        models.append(EuclideanModel(grid, center, 0.5 * (hi_i - lo_i), balls[i].rho))
        lo, hi = lo_i, hi_i

    witness = GeneralizedNumber(grid, models[-1].center_rep)
    distances = tuple(ultrametric_distance(witness, b.center) for b in balls)
    cert = IntersectionCertificate(
        radii=tuple(radii), distances=distances, tolerance=tol, models_nested=nested
    )
    return witness, cert, models
