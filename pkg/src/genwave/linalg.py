"""Linear algebra over the ring of generalized numbers.

Vectors and matrices are stored as stacks of real arrays, one slice per
grid epsilon.  Eigendecompositions, determinants and inverses are taken
epsilon-wise; classification of the resulting nets (index, freeness,
non-degeneracy) reuses the tail tests of :mod:`genwave.nets`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import mpmath as mp
import numpy as np

from .nets import (
    DEFAULT_M_INV,
    DEFAULT_M_MAX,
    NUMERIC_FLOOR,
    ClassificationError,
    EpsilonGrid,
    GeneralizedNumber,
    GridMismatchError,
    NetClass,
    classify,
    is_strictly_nonzero,
    is_strictly_positive,
    valuation,
)

__all__ = [
    "GenVector",
    "GenMatrix",
    "GenEigen",
    "IndexReport",
    "EigenSolveError",
    "symmetrize",
    "eigen_sym",
    "well_definedness_check",
    "perturbed_eigen_comparison",
    "is_nondegenerate",
    "index",
    "is_positive_definite_minors",
    "is_free",
    "extend_to_basis",
    "orthogonal_basis",
    "orthogonal_projection",
]


class EigenSolveError(RuntimeError):
    """Epsilon-wise eigensolver failed; the message names the slice."""


def _check_grids(*objs):
    grids = {o.grid for o in objs}
    if len(grids) > 1:
        raise GridMismatchError("operands live on different epsilon grids")


@dataclass(frozen=True)
class GenVector:
    """Element of the free module R~^n: one real n-vector per epsilon."""

    grid: EpsilonGrid
    values: np.ndarray  # shape (K, n)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] != self.grid.k:
            raise ValueError(f"expected shape (K, n), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("vector samples must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def constant(vec, grid: EpsilonGrid) -> "GenVector":
        vec = np.asarray(vec, dtype=float)
        return GenVector(grid, np.tile(vec, (grid.k, 1)))

    @staticmethod
    def from_nets(nets: Sequence[GeneralizedNumber]) -> "GenVector":
        _check_grids(*nets)
        return GenVector(nets[0].grid, np.stack([x.values for x in nets], axis=1))

    def component(self, i: int) -> GeneralizedNumber:
        return GeneralizedNumber(self.grid, self.values[:, i])

    def __add__(self, other: "GenVector") -> "GenVector":
        _check_grids(self, other)
        return GenVector(self.grid, self.values + other.values)

    def __sub__(self, other: "GenVector") -> "GenVector":
        _check_grids(self, other)
        return GenVector(self.grid, self.values - other.values)

    def __neg__(self) -> "GenVector":
        return GenVector(self.grid, -self.values)

    def scale(self, c) -> "GenVector":
        """Scalar multiple; ``c`` may be a float or a GeneralizedNumber."""
        if isinstance(c, GeneralizedNumber):
            _check_grids(self, c)
            return GenVector(self.grid, self.values * c.values[:, None])
        return GenVector(self.grid, self.values * float(c))


@dataclass(frozen=True)
class GenMatrix:
    """Element of the n x n matrix ring over R~: one matrix per epsilon."""

    grid: EpsilonGrid
    values: np.ndarray  # shape (K, n, n)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3 or vals.shape[0] != self.grid.k or vals.shape[1] != vals.shape[2]:
            raise ValueError(f"expected shape (K, n, n), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("matrix samples must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def constant(mat, grid: EpsilonGrid) -> "GenMatrix":
        mat = np.asarray(mat, dtype=float)
        return GenMatrix(grid, np.tile(mat, (grid.k, 1, 1)))

    @staticmethod
    def diagonal(nets: Sequence[GeneralizedNumber]) -> "GenMatrix":
        _check_grids(*nets)
        grid = nets[0].grid
        n = len(nets)
        vals = np.zeros((grid.k, n, n))
        for i, x in enumerate(nets):
            vals[:, i, i] = x.values
        return GenMatrix(grid, vals)

    def entry(self, i: int, j: int) -> GeneralizedNumber:
        return GeneralizedNumber(self.grid, self.values[:, i, j])

    def transpose(self) -> "GenMatrix":
        return GenMatrix(self.grid, np.swapaxes(self.values, 1, 2))

    def __add__(self, other: "GenMatrix") -> "GenMatrix":
        _check_grids(self, other)
        return GenMatrix(self.grid, self.values + other.values)

    def __sub__(self, other: "GenMatrix") -> "GenMatrix":
        _check_grids(self, other)
        return GenMatrix(self.grid, self.values - other.values)

    def __matmul__(self, other):
        if isinstance(other, GenMatrix):
            _check_grids(self, other)
            return GenMatrix(self.grid, np.einsum("kij,kjl->kil", self.values, other.values))
        if isinstance(other, GenVector):
            _check_grids(self, other)
            return GenVector(self.grid, np.einsum("kij,kj->ki", self.values, other.values))
        return NotImplemented

    def det(self) -> GeneralizedNumber:
        return GeneralizedNumber(self.grid, np.linalg.det(self.values))

    def inv(self) -> "GenMatrix":
        return GenMatrix(self.grid, np.linalg.inv(self.values))

    def frobenius(self) -> GeneralizedNumber:
        return GeneralizedNumber(
            self.grid, np.sqrt(np.sum(self.values**2, axis=(1, 2)))
        )


@dataclass(frozen=True)
class GenEigen:
    """Epsilon-wise symmetric eigendecomposition, sorted descending.

    Per epsilon ``U A U^T = diag(lams)`` with orthogonal ``U`` (rows are
    eigenvectors) up to 1e-10 relative.
    """

    eigenvalues: tuple  # n GeneralizedNumbers, descending per epsilon
    transform: GenMatrix


@dataclass(frozen=True)
class IndexReport:
    """Sign census of the eigenvalue nets of a symmetric matrix.

    ``nu_plus``/``nu_minus`` count eigenvalue nets passing the strictly
    positive/negative tail test.  ``stable`` requires the per-epsilon
    sign pattern to be constant over the tail with every eigenvalue above
    the eps**m_inv threshold; the index is only reported then.
    """

    nu_plus: Optional[int]
    nu_minus: Optional[int]
    stable: bool
    index: Optional[int]


def symmetrize(a: GenMatrix) -> GenMatrix:
    """Exactly symmetric representative ``(A + A^T)/2``."""
    return GenMatrix(a.grid, (a.values + np.swapaxes(a.values, 1, 2)) / 2.0)


def _require_symmetric(a: GenMatrix, tol: float = 1e-12):
    skew = np.max(np.abs(a.values - np.swapaxes(a.values, 1, 2)))
    scale = max(np.max(np.abs(a.values)), 1.0)
    if skew > tol * scale:
        raise ValueError("matrix must be exactly symmetric; call symmetrize() first")


def eigen_sym(a: GenMatrix) -> GenEigen:
    """Epsilon-wise symmetric eigendecomposition, eigenvalues descending."""
    _require_symmetric(a)
    try:
        w, v = np.linalg.eigh(a.values)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise EigenSolveError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(w), axis=1))[0])
        raise EigenSolveError(f"eigensolver did not converge at epsilon index {bad}")
    w = w[:, ::-1]  # descending
    u = np.swapaxes(v[:, :, ::-1], 1, 2)  # rows = eigenvectors
    # fix a deterministic orientation: make each U a rotation
    det = np.linalg.det(u)
    flip = det < 0
    u[flip, -1, :] *= -1.0
    grid = a.grid
    lams = tuple(GeneralizedNumber(grid, w[:, i]) for i in range(a.n))
    return GenEigen(lams, GenMatrix(grid, u))


# -- well-definedness under non-symmetric negligible perturbations --------


def _needed_dps(min_scale: float) -> int:
    import math

    if min_scale <= 0:
        return 50
    return min(400, max(50, int(-math.log10(min_scale)) + 40))


def perturbed_eigen_comparison(a: GenMatrix, perturbation: GenMatrix, indices=None):
    """Eigenvalues of A and of A+E matched by descending real part.

    Shifts of a negligible perturbation sit far below double-precision
    eigensolver noise, so both solves run in adaptive high precision.
    Returns (distances, bounds, diffs): per-slice matching distance
    sqrt(sum |theta_i - lam_i|^2), the sqrt(2)*||E||_F bound, and the
    matched absolute differences (shape (m, n)).
    """
    _check_grids(a, perturbation)
    _require_symmetric(a)
    if indices is None:
        indices = a.grid.tail
    indices = np.asarray(indices)
    n = a.n
    frob = np.sqrt(np.sum(perturbation.values**2, axis=(1, 2)))
    nonzero = frob[indices][frob[indices] > 0]
    dps = _needed_dps(float(nonzero.min())) if nonzero.size else 50
    distances = np.zeros(len(indices))
    bounds = np.sqrt(2.0) * frob[indices]
    diffs = np.zeros((len(indices), n))
    old_dps = mp.mp.dps
    try:
        mp.mp.dps = dps
        for row, k in enumerate(indices):
            ak = a.values[k]
            ek = perturbation.values[k]
            if frob[k] == 0.0:
                continue  # identical matrices: matching distance is exactly 0
            s = mp.matrix([[mp.mpf(ak[i, j]) for j in range(n)] for i in range(n)])
            lam = sorted(mp.eigsy(s, eigvals_only=True), reverse=True)
            m_pert = mp.matrix(
                [[mp.mpf(ak[i, j]) + mp.mpf(ek[i, j]) for j in range(n)] for i in range(n)]
            )
            theta, _ = mp.eig(m_pert)
            theta = sorted(theta, key=lambda z: -mp.re(z))
            d = [abs(theta[i] - lam[i]) for i in range(n)]
            diffs[row] = [float(x) for x in d]
            distances[row] = float(mp.sqrt(mp.fsum(x**2 for x in d)))
    finally:
        mp.mp.dps = old_dps
    return distances, bounds, diffs


def well_definedness_check(
    a: GenMatrix, perturbation: GenMatrix, m_max: float = DEFAULT_M_MAX
) -> float:
    """Max tail eigenvalue-matching distance under a negligible perturbation.

    Every perturbation entry must have empirical valuation >= m_max (or
    vanish identically); each per-slice distance is checked against the
    sqrt(2)*||E||_F bound.
    """
    for i in range(perturbation.n):
        for j in range(perturbation.n):
            fit = valuation(perturbation.entry(i, j))
            if not fit.is_zero and fit.slope < m_max:
                raise ClassificationError(
                    f"perturbation entry ({i},{j}) has valuation {fit.slope:.3f} < {m_max}",
                    [],
                )
    distances, bounds, _ = perturbed_eigen_comparison(a, perturbation)
    slack = 1e-12 * np.maximum(bounds, NUMERIC_FLOOR)
    if np.any(distances > bounds + slack):
        bad = int(np.flatnonzero(distances > bounds + slack)[0])
        raise EigenSolveError(
            f"matching distance exceeds sqrt(2)||E||_F at tail slot {bad}"
        )
    return float(np.max(distances))


# -- classification-flavoured predicates ----------------------------------


def is_nondegenerate(a: GenMatrix, m_inv: float = DEFAULT_M_INV) -> bool:
    """Invertibility of the determinant net (tail test)."""
    return is_strictly_nonzero(a.det(), m_inv)


def index(a: GenMatrix, m_inv: float = DEFAULT_M_INV) -> IndexReport:
    """Count strictly signed eigenvalue nets; the index is nu_minus.

    The index is only present when all n eigenvalue nets are strictly
    signed with a constant per-epsilon sign pattern over the tail;
    unstable patterns (sign flips along epsilon) yield an absent index.
    """
    _require_symmetric(a)
    eig = eigen_sym(a)
    nu_plus = sum(1 for lam in eig.eigenvalues if is_strictly_positive(lam, m_inv))
    nu_minus = sum(1 for lam in eig.eigenvalues if is_strictly_positive(-lam, m_inv))
    stable = (nu_plus + nu_minus) == a.n
    return IndexReport(nu_plus, nu_minus, stable, nu_minus if stable else None)


def is_positive_definite_minors(a: GenMatrix, m_inv: float = DEFAULT_M_INV) -> bool:
    """Leading-principal-minor criterion for positive definiteness."""
    _require_symmetric(a)
    for m in range(1, a.n + 1):
        minor = GeneralizedNumber(a.grid, np.linalg.det(a.values[:, :m, :m]))
        if not is_strictly_positive(minor, m_inv):
            return False
    return True


def is_free(v: GenVector, m_inv: float = DEFAULT_M_INV) -> bool:
    """Free elements: the max-modulus coefficient net is strictly nonzero."""
    maxmod = GeneralizedNumber(v.grid, np.max(np.abs(v.values), axis=1))
    return is_strictly_nonzero(maxmod, m_inv)


def extend_to_basis(v: GenVector, m_inv: float = DEFAULT_M_INV) -> GenMatrix:
    """Basis matrix with v as first column, pivoting per epsilon.

    Per epsilon the max-modulus coefficient is the pivot; the remaining
    columns are the canonical vectors of the non-pivot coordinates, so
    the determinant net equals +/- the pivot coefficient and is strictly
    nonzero.
    """
    if not is_free(v, m_inv):
        raise ClassificationError("vector is not free (max-coefficient test fails)", [])
    k, n = v.values.shape
    basis = np.zeros((k, n, n))
    basis[:, :, 0] = v.values
    pivots = np.argmax(np.abs(v.values), axis=1)
    for s in range(k):
        others = [i for i in range(n) if i != pivots[s]]
        for col, i in enumerate(others, start=1):
            basis[s, i, col] = 1.0
    return GenMatrix(v.grid, basis)


def orthogonal_basis(b: GenMatrix) -> GenMatrix:
    """Transform U of the eigendecomposition; U B U^T is diagonal per epsilon."""
    return eigen_sym(b).transform


def orthogonal_projection(
    basis: Sequence[GenVector],
    h: GenMatrix,
    v: GenVector,
    m_inv: float = DEFAULT_M_INV,
) -> GenVector:
    """Orthogonal projection of v onto the span of ``basis`` under h.

    Requires free basis vectors and a strictly non-degenerate Gram
    matrix; the residual v - P(v) is h-orthogonal to every basis vector
    up to a negligible net.
    """
    _check_grids(h, v, *basis)
    for i, b in enumerate(basis):
        if not is_free(b, m_inv):
            raise ClassificationError(f"basis vector {i} is not free", [])
    m = len(basis)
    bmat = np.stack([b.values for b in basis], axis=2)  # (K, n, m)
    gram = np.einsum("kim,kij,kjl->kml", bmat, h.values, bmat)  # (K, m, m)
    gram_det = GeneralizedNumber(h.grid, np.linalg.det(gram))
    if not is_strictly_nonzero(gram_det, m_inv):
        raise ClassificationError("Gram matrix of the basis is degenerate", [])
    rhs = np.einsum("kim,kij,kj->km", bmat, h.values, v.values)  # (K, m)
    coeff = np.linalg.solve(gram, rhs[..., None])[..., 0]  # (K, m)
    proj = np.einsum("kim,km->ki", bmat, coeff)
    return GenVector(v.grid, proj)
