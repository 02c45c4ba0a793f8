"""Causality and energy tensors over generalized Lorentz bilinear forms.

All operations are epsilon-wise tensor algebra; classification of scalar
results (timelike, strict gaps, negligibility) is delegated to the tail
tests of :mod:`genwave.nets`.  The sign convention is (-,+,...,+).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from .nets import (
    DEFAULT_M_INV,
    DEFAULT_M_MAX,
    NUMERIC_FLOOR,
    EpsilonGrid,
    GeneralizedNumber,
    NetClass,
    classify,
    is_negligible,
    is_strictly_nonzero,
    is_strictly_positive,
)
from .linalg import (
    GenMatrix,
    GenVector,
    IndexReport,
    _check_grids,
    index,
    is_free,
    symmetrize,
)

__all__ = [
    "CausalClass",
    "CsVerdict",
    "GenBilinearForm",
    "EnergyTensor",
    "DecReport",
    "NotLorentzianError",
    "CausalityError",
    "minkowski",
    "classify_causal",
    "same_time_orientation",
    "inverse_cs_gap",
    "unit_normalize",
    "lorentz_boost",
    "riemann_from_pair",
    "flip_metric",
    "energy_tensor",
    "dec_check",
]

SAMPLE_TOL = 1e-9  # absolute slack for ">= 0 per sample" checks, after scaling


class NotLorentzianError(ValueError):
    """The bilinear form is not of Lorentz signature (index 1)."""


class CausalityError(ValueError):
    """An argument fails a causal precondition (timelike, unit, oriented)."""


class CausalClass(Enum):
    TIMELIKE = "timelike"
    SPACELIKE = "spacelike"
    NULL = "null"
    INDETERMINATE = "indeterminate"


class CsVerdict(Enum):
    """Outcome of the inverse Cauchy-Schwarz gap classification."""

    STRICT = "strict"
    EQUALITY = "equality"
    WEAK = "weak"
    INDETERMINATE = "indeterminate"


class GenBilinearForm:
    """Symmetric bilinear form on R~^n with a cached index report."""

    def __init__(self, matrix: GenMatrix, m_inv: float = DEFAULT_M_INV):
        self.matrix = symmetrize(matrix)
        self.m_inv = m_inv
        self._index_report: Optional[IndexReport] = None
        self._inverse: Optional[GenMatrix] = None

    @property
    def grid(self) -> EpsilonGrid:
        return self.matrix.grid

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def index_report(self) -> IndexReport:
        if self._index_report is None:
            self._index_report = index(self.matrix, self.m_inv)
        return self._index_report

    @property
    def inverse(self) -> GenMatrix:
        if self._inverse is None:
            self._inverse = self.matrix.inv()
        return self._inverse

    def is_lorentzian(self) -> bool:
        return self.index_report.index == 1

    def require_lorentzian(self):
        if not self.is_lorentzian():
            raise NotLorentzianError(
                f"form has index {self.index_report.index} (stable={self.index_report.stable}), need 1"
            )

    def inner(self, u: GenVector, v: GenVector) -> GeneralizedNumber:
        _check_grids(self.matrix, u, v)
        vals = np.einsum("ki,kij,kj->k", u.values, self.matrix.values, v.values)
        return GeneralizedNumber(self.grid, vals)

    def lower(self, u: GenVector) -> GenVector:
        """Covariant components g_ab u^b."""
        return GenVector(self.grid, np.einsum("kij,kj->ki", self.matrix.values, u.values))

    def raise_(self, w: GenVector) -> GenVector:
        """Contravariant components g^ab w_b."""
        return GenVector(self.grid, np.einsum("kij,kj->ki", self.inverse.values, w.values))


def minkowski(n: int, grid: EpsilonGrid) -> GenBilinearForm:
    eta = np.diag([-1.0] + [1.0] * (n - 1))
    return GenBilinearForm(GenMatrix.constant(eta, grid))


def _is_negligible_vector(u: GenVector, m_max: float) -> bool:
    return all(is_negligible(u.component(i), m_max) for i in range(u.n))


def classify_causal(
    g: GenBilinearForm,
    u: GenVector,
    m_max: float = DEFAULT_M_MAX,
    m_inv: float = DEFAULT_M_INV,
) -> CausalClass:
    """Causal character of u: sign classification of g(u,u).

    Null vectors are the zero vector or free vectors with negligible
    norm; everything that fails all three tests (for instance indicator
    branches) is indeterminate.
    """
    g.require_lorentzian()
    q = g.inner(u, u)
    cls = classify(q, m_max, m_inv)
    if cls is NetClass.STRICTLY_NEGATIVE:
        return CausalClass.TIMELIKE
    if cls is NetClass.STRICTLY_POSITIVE:
        return CausalClass.SPACELIKE
    if _is_negligible_vector(u, m_max):
        return CausalClass.NULL
    if is_free(u, m_inv) and cls is NetClass.NEGLIGIBLE:
        return CausalClass.NULL
    return CausalClass.INDETERMINATE


def _require_timelike(g: GenBilinearForm, *vectors: GenVector):
    for i, u in enumerate(vectors):
        if classify_causal(g, u) is not CausalClass.TIMELIKE:
            raise CausalityError(f"argument {i} is not timelike")


def same_time_orientation(g: GenBilinearForm, u: GenVector, v: GenVector) -> bool:
    """True when the timelike vectors u, v satisfy g(u,v) < 0 strictly."""
    _require_timelike(g, u, v)
    return is_strictly_positive(-g.inner(u, v), g.m_inv)


def inverse_cs_gap(
    g: GenBilinearForm,
    u: GenVector,
    v: GenVector,
    m_max: float = DEFAULT_M_MAX,
    m_inv: float = DEFAULT_M_INV,
) -> Tuple[GeneralizedNumber, CsVerdict]:
    """Gap <u,v>^2 - <u,u><v,v> of the inverse Cauchy-Schwarz inequality.

    For timelike u, v all tail samples are nonnegative up to float slack.
    The verdict distinguishes a strictly positive gap, equality up to a
    negligible net, a weak gap (nonnegative samples with zero branches,
    the zero-divisor regime) and everything else.
    """
    _require_timelike(g, u, v)
    uv = g.inner(u, v)
    gap = uv * uv - g.inner(u, u) * g.inner(v, v)
    cls = classify(gap, m_max, m_inv)
    if cls is NetClass.STRICTLY_POSITIVE:
        verdict = CsVerdict.STRICT
    elif cls is NetClass.NEGLIGIBLE:
        verdict = CsVerdict.EQUALITY
    else:
        scale = max(1.0, float(np.max(np.abs(gap.values))))
        if np.all(gap.values >= -SAMPLE_TOL * scale):
            verdict = CsVerdict.WEAK
        else:
            verdict = CsVerdict.INDETERMINATE
    return gap, verdict


def unit_normalize(g: GenBilinearForm, u: GenVector) -> GenVector:
    """Rescale a timelike vector to g(u,u) = -1, epsilon-wise."""
    q = g.inner(u, u)
    if not is_strictly_positive(-q, g.m_inv):
        raise CausalityError("vector is not strictly timelike; cannot normalize")
    neg = -q.values
    if np.any(neg <= NUMERIC_FLOOR):
        bad = int(np.flatnonzero(neg <= NUMERIC_FLOOR)[0])
        raise CausalityError(f"g(u,u) is not negative at epsilon index {bad}")
    return u.scale(GeneralizedNumber(u.grid, 1.0 / np.sqrt(neg)))


def _check_unit(g: GenBilinearForm, u: GenVector, name: str, tol: float = 1e-9):
    q = g.inner(u, u).values
    if np.max(np.abs(q + 1.0)) > tol:
        raise CausalityError(f"{name} is not a unit timelike vector (g({name},{name}) != -1)")


def lorentz_boost(g: GenBilinearForm, xi: GenVector, eta: GenVector) -> GenMatrix:
    """Metric-preserving map L with L xi = eta for unit timelike xi, eta.

    L^mu_lam = delta - 2 eta^mu xi_lam + (xi+eta)^mu (xi+eta)_lam / (1 - <xi,eta>).
    """
    _check_unit(g, xi, "xi")
    _check_unit(g, eta, "eta")
    inner = g.inner(xi, eta)
    if not is_strictly_positive(-inner, g.m_inv):
        raise CausalityError("xi and eta must have the same time-orientation")
    denom = constant_like(1.0, inner) - inner
    if not is_strictly_nonzero(denom, g.m_inv):
        raise CausalityError("1 - <xi,eta> is not strictly nonzero")
    xi_low = g.lower(xi).values
    eta_low = g.lower(eta).values
    k, n = xi.values.shape
    delta = np.broadcast_to(np.eye(n), (k, n, n))
    term1 = -2.0 * np.einsum("ki,kj->kij", eta.values, xi_low)
    s_up = xi.values + eta.values
    s_low = xi_low + eta_low
    term2 = np.einsum("ki,kj->kij", s_up, s_low) / denom.values[:, None, None]
    return GenMatrix(g.grid, delta + term1 + term2)


def constant_like(c: float, x: GeneralizedNumber) -> GeneralizedNumber:
    return GeneralizedNumber(x.grid, np.full(x.grid.k, float(c)))


def riemann_from_pair(
    g: GenBilinearForm, u: GenVector, v: GenVector, normalize: bool = True
) -> GenBilinearForm:
    """Positive definite form h_mn = u_(m v_n) - 1/2 <u,v> g_mn.

    Inputs must be timelike with the same orientation; by default they
    are rescaled to unit vectors epsilon-wise first.
    """
    _require_timelike(g, u, v)
    if not same_time_orientation(g, u, v):
        raise CausalityError("u and v must have the same time-orientation")
    if normalize:
        u = unit_normalize(g, u)
        v = unit_normalize(g, v)
    ul = g.lower(u).values
    vl = g.lower(v).values
    sym = 0.5 * (np.einsum("ki,kj->kij", ul, vl) + np.einsum("ki,kj->kij", vl, ul))
    uv = g.inner(u, v).values
    h = sym - 0.5 * uv[:, None, None] * g.matrix.values
    return GenBilinearForm(GenMatrix(g.grid, h), g.m_inv)


def flip_metric(g: GenBilinearForm, theta: GenVector) -> Tuple[GenMatrix, GenMatrix]:
    """Riemannian flip along a unit timelike direction.

    Returns (k_lower, k_upper) with k_lower = g + 2 theta_flat theta_flat^T
    and k_upper = g^{-1} + 2 theta theta^T; they are epsilon-wise inverse
    to each other.
    """
    _check_unit(g, theta, "theta")
    tl = g.lower(theta).values
    k_lower = g.matrix.values + 2.0 * np.einsum("ki,kj->kij", tl, tl)
    k_upper = g.inverse.values + 2.0 * np.einsum("ki,kj->kij", theta.values, theta.values)
    return GenMatrix(g.grid, k_lower), GenMatrix(g.grid, k_upper)


@dataclass(frozen=True)
class EnergyTensor:
    """Rank-2 contravariant energy tensor of order k built from a tensor W.

    ``source`` keeps the covariant components of W (shape (K,) for k=0,
    (K,n) for k=1, (K,n,n) for k=2) so that consistency identities can be
    evaluated later.
    """

    order: int
    components: GenMatrix
    source: np.ndarray


def energy_tensor(
    g: GenBilinearForm,
    e_upper: Optional[GenMatrix],
    w,
    k: int,
) -> EnergyTensor:
    """Energy tensor of hierarchy order k in {0, 1, 2}.

    k=0: T = -1/2 g^{ab} W^2 for a scalar net W;
    k=1: T = (g^{ac}g^{bd} - 1/2 g^{ab}g^{cd}) W_c W_d;
    k=2: contracted once with the Riemannian e^{pq} over the extra slot.
    ``e_upper`` is only consulted for k=2.
    """
    ginv = g.inverse.values
    grid = g.grid
    if k == 0:
        if isinstance(w, GeneralizedNumber):
            w = w.values
        w = np.asarray(w, dtype=float)
        if w.shape != (grid.k,):
            raise ValueError(f"order 0 needs a scalar net, got shape {w.shape}")
        t = -0.5 * ginv * (w**2)[:, None, None]
        return EnergyTensor(0, GenMatrix(grid, t), w.copy())
    if k == 1:
        if isinstance(w, GenVector):
            w = w.values
        w = np.asarray(w, dtype=float)
        if w.shape != (grid.k, g.n):
            raise ValueError(f"order 1 needs a covector field, got shape {w.shape}")
        w_up = np.einsum("kab,kb->ka", ginv, w)
        norm2 = np.einsum("ka,ka->k", w_up, w)
        t = np.einsum("ka,kb->kab", w_up, w_up) - 0.5 * ginv * norm2[:, None, None]
        return EnergyTensor(1, GenMatrix(grid, t), w.copy())
    if k == 2:
        if isinstance(w, GenMatrix):
            w = w.values
        w = np.asarray(w, dtype=float)
        if w.shape != (grid.k, g.n, g.n):
            raise ValueError(f"order 2 needs a rank-2 tensor, got shape {w.shape}")
        if e_upper is None:
            raise ValueError("order 2 requires the Riemannian contraction metric e_upper")
        m = np.einsum("kpq,kcp,kdq->kcd", e_upper.values, w, w)
        t_full = np.einsum("kac,kbd,kcd->kab", ginv, ginv, m)
        trace = np.einsum("kcd,kcd->k", ginv, m)
        t = t_full - 0.5 * ginv * trace[:, None, None]
        return EnergyTensor(2, GenMatrix(grid, t), w.copy())
    raise ValueError(f"order must be 0, 1 or 2, got {k}")


@dataclass(frozen=True)
class DecReport:
    """Dominant-energy check of an energy tensor against a timelike pair."""

    s1: GeneralizedNumber           # T^{ab} xi_a xi_b
    s2: GeneralizedNumber           # T^{ab} xi_a eta_b
    s1_nonneg: bool
    s2_nonneg: bool
    s2_class: NetClass
    flux: GenVector                 # eta^b := T^{ab} xi_a
    flux_class: CausalClass
    flux_not_spacelike: bool
    identity_residual: Optional[float]   # |<flux,flux> - 1/4 <th,th>^2 <xi,xi>|, k=1 only
    identity_ok: Optional[bool]


def dec_check(
    t: EnergyTensor,
    g: GenBilinearForm,
    xi: GenVector,
    eta: GenVector,
    tol: float = SAMPLE_TOL,
) -> DecReport:
    """Dominant energy condition for an energy tensor.

    Contracts T with the covariant components of the timelike pair
    (xi, eta) of equal orientation; checks nonnegativity per sample, the
    causal class of the momentum flux T^{ab} xi_a, and (order 1 only) the
    squared-norm identity of the flux.
    """
    _require_timelike(g, xi, eta)
    if not same_time_orientation(g, xi, eta):
        raise CausalityError("xi and eta must have the same time-orientation")
    xl = g.lower(xi).values
    el = g.lower(eta).values
    tv = t.components.values
    s1 = GeneralizedNumber(g.grid, np.einsum("kab,ka,kb->k", tv, xl, xl))
    s2 = GeneralizedNumber(g.grid, np.einsum("kab,ka,kb->k", tv, xl, el))
    scale1 = max(1.0, float(np.max(np.abs(s1.values))))
    scale2 = max(1.0, float(np.max(np.abs(s2.values))))
    s1_ok = bool(np.all(s1.values >= -tol * scale1))
    s2_ok = bool(np.all(s2.values >= -tol * scale2))
    flux = GenVector(g.grid, np.einsum("kab,ka->kb", tv, xl))
    flux_class = classify_causal(g, flux, m_inv=g.m_inv)
    residual = None
    ok = None
    if t.order == 1:
        ginv = g.inverse.values
        th2 = np.einsum("kab,ka,kb->k", ginv, t.source, t.source)  # <theta,theta>
        xi2 = g.inner(xi, xi).values
        flux2 = g.inner(flux, flux).values
        res = flux2 - 0.25 * th2**2 * xi2
        scale = max(1.0, float(np.max(np.abs(flux2))))
        residual = float(np.max(np.abs(res)))
        ok = residual <= 1e-10 * scale
    return DecReport(
        s1=s1,
        s2=s2,
        s1_nonneg=s1_ok,
        s2_nonneg=s2_ok,
        s2_class=classify(s2),
        flux=flux,
        flux_class=flux_class,
        flux_not_spacelike=flux_class is not CausalClass.SPACELIKE,
        identity_residual=residual,
        identity_ok=ok,
    )
