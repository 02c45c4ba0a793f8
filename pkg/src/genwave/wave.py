"""Per-epsilon Cauchy solver for the wave equation on static metrics.

The metric family is sampled on a periodic spatial box (d = 1 or 2) and
on the epsilon grid: a lapse field V_eps(x) and a spatial metric
h_eps(x).  The d'Alembertian splits into -V**-2 d_t^2 plus a flux-form
spatial divergence; time stepping is explicit leapfrog, one independent
run per epsilon.  Energies of hierarchy order k <= 2, Sobolev norms,
equivalence and growth checks operate on the stored solution slices.

The periodic box replaces a boundary-footed integration region: surface
terms vanish on the torus, so the energy inequality needs no boundary
integral.  The paraboloid region only enters through the spacelike
boundary certificate of :func:`build_region`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .nets import (
    DEFAULT_M_MAX,
    NUMERIC_FLOOR,
    AsymptoticFit,
    EpsilonGrid,
    FitError,
    GeneralizedNumber,
    valuation,
)

__all__ = [
    "SpatialGrid",
    "StaticMetricFamily",
    "CauchyData",
    "ParaboloidRegion",
    "SpacelikeCertificate",
    "WaveRun",
    "SettingReport",
    "EquivalenceReport",
    "GrowthReport",
    "SupEnergyReport",
    "EnergyReport",
    "SettingError",
    "InstabilityError",
    "RegionError",
    "SliceError",
    "flat_metric",
    "bump_metric",
    "wavy_metric",
    "bump_profile",
    "sine_initial_data",
    "validate_setting",
    "christoffel",
    "dalembert_apply",
    "spatial_wave_operator",
    "solve",
    "energy_term",
    "energy",
    "initial_energy_from_data",
    "sobolev_norms",
    "verify_equivalence",
    "verify_energy_growth",
    "uniqueness_test",
    "representative_independence",
    "build_region",
    "sup_vs_energy",
    "energy_report",
]


class SettingError(ValueError):
    """Metric family violates the boundedness assumptions."""


class InstabilityError(RuntimeError):
    """A per-epsilon run blew up; the message names the epsilon index."""


class RegionError(ValueError):
    """Paraboloid ratio violated or spacelike certificate failed."""


class SliceError(ValueError):
    """Requested time is not a computed slice."""


# -- grids and fields ------------------------------------------------------


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic box [0, length)^d sampled with n points per axis."""

    d: int
    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"spatial dimension must be 1 or 2, got {self.d}")
        if self.n < 8:
            raise ValueError("need at least 8 points per axis")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def axes(self) -> tuple:
        x = np.arange(self.n) * self.dx
        return (x,) * self.d

    def meshgrid(self):
        return np.meshgrid(*self.axes, indexing="ij")

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d


def _dc(f: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """Centered first difference along a spatial axis (periodic)."""
    return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2.0 * dx)


def _d2c(f: np.ndarray, axis: int, dx: float) -> np.ndarray:
    return (np.roll(f, -1, axis) - 2.0 * f + np.roll(f, 1, axis)) / dx**2


class StaticMetricFamily:
    """Per-epsilon static metric -V^2 dt^2 + h_mn dx^m dx^n on a box.

    ``lapse`` has shape (K, *space), ``spatial`` has shape
    (K, *space, d, d) and must be symmetric positive definite at every
    point.  ``m_lower``/``m_upper`` are the declared bounds
    0 < M <= V^2 <= M0; construction enforces them.  ``deriv_consts``
    optionally declares the growth constants of k-th derivatives.
    """

    def __init__(
        self,
        grid: EpsilonGrid,
        space: SpatialGrid,
        lapse: np.ndarray,
        spatial: np.ndarray,
        m_lower: float,
        m_upper: float,
        deriv_consts: Optional[Dict[int, float]] = None,
        name: str = "custom",
    ):
        lapse = np.asarray(lapse, dtype=float)
        spatial = np.asarray(spatial, dtype=float)
        expect_l = (grid.k,) + space.shape
        expect_h = expect_l + (space.d, space.d)
        if lapse.shape != expect_l:
            raise ValueError(f"lapse shape {lapse.shape}, expected {expect_l}")
        if spatial.shape != expect_h:
            raise ValueError(f"spatial metric shape {spatial.shape}, expected {expect_h}")
        if not (np.all(np.isfinite(lapse)) and np.all(np.isfinite(spatial))):
            raise ValueError("metric fields must be finite")
        v2 = lapse**2
        if not (0 < m_lower <= m_upper):
            raise SettingError("need 0 < M <= M0")
        if np.any(v2 < m_lower * (1 - 1e-12)) or np.any(v2 > m_upper * (1 + 1e-12)):
            raise SettingError("lapse violates the declared bounds M <= V^2 <= M0")
        sym_err = np.max(np.abs(spatial - np.swapaxes(spatial, -1, -2)))
        if sym_err > 1e-12:
            raise SettingError("spatial metric must be symmetric per point")
        eigs = np.linalg.eigvalsh(spatial)
        if np.any(eigs <= 0):
            raise SettingError("spatial metric must be positive definite per point")
        self.grid = grid
        self.space = space
        self.lapse = lapse
        self.spatial = spatial
        self.m_lower = float(m_lower)
        self.m_upper = float(m_upper)
        self.deriv_consts = dict(deriv_consts or {})
        self.name = name
        self.inv_spatial = np.linalg.inv(spatial)
        self.det_spatial = np.linalg.det(spatial)
        # |g|^(1/2) = V sqrt(det h): weight of the slice measure
        self.weight = lapse * np.sqrt(self.det_spatial)
        self.c_max = float(np.sqrt(np.max(v2[..., None] * np.linalg.eigvalsh(self.inv_spatial))))

    def integrate(self, f: np.ndarray) -> np.ndarray:
        """Slice integral with the induced measure, per epsilon.

        Trapezoidal quadrature degenerates to the rectangle sum on a
        periodic box.
        """
        axes = tuple(range(1, 1 + self.space.d))
        return np.sum(f * self.weight, axis=axes) * self.space.cell_volume


@dataclass(frozen=True)
class CauchyData:
    """Initial value v(x) and initial time derivative w(x), per epsilon."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if v.shape != w.shape:
            raise ValueError("v and w must share a shape")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise ValueError("initial data must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    def __add__(self, other: "CauchyData") -> "CauchyData":
        return CauchyData(self.v + other.v, self.w + other.w)

    def scale(self, c: float) -> "CauchyData":
        return CauchyData(self.v * c, self.w * c)


@dataclass(frozen=True)
class WaveRun:
    """Stored solution slices u_eps(t_j, x) of one solve."""

    slices: np.ndarray  # (K, steps+1, *space)
    dt: float
    times: np.ndarray

    @property
    def n_slices(self) -> int:
        return self.slices.shape[1]

    def slice_index(self, tau: float) -> int:
        j = int(round(tau / self.dt))
        if j < 0 or j >= self.n_slices or abs(tau - j * self.dt) > 1e-9 * max(1.0, abs(tau)):
            raise SliceError(f"t={tau} is not a computed slice (dt={self.dt})")
        return j

    def sup_abs(self) -> np.ndarray:
        """Sup over all slices and points, per epsilon."""
        axes = tuple(range(1, self.slices.ndim))
        return np.max(np.abs(self.slices), axis=axes)


# -- canonical metric families --------------------------------------------


def bump_profile(s: np.ndarray) -> np.ndarray:
    """Smooth compactly supported profile, normalized to peak value 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    # exp(1) * exp(-1/(1-s^2)) has value 1 at s=0 and vanishes flatly at |s|=1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def flat_metric(space: SpatialGrid, grid: EpsilonGrid) -> StaticMetricFamily:
    lapse = np.ones((grid.k,) + space.shape)
    spatial = np.zeros((grid.k,) + space.shape + (space.d, space.d))
    for a in range(space.d):
        spatial[..., a, a] = 1.0
    return StaticMetricFamily(grid, space, lapse, spatial, 1.0, 1.0, name="flat")


def _radial_offsets(space: SpatialGrid, center: float) -> np.ndarray:
    mesh = space.meshgrid()
    r2 = np.zeros(space.shape)
    for x in mesh:
        off = (x - center + space.length / 2) % space.length - space.length / 2
        r2 += off**2
    return np.sqrt(r2)


def bump_metric(
    space: SpatialGrid,
    grid: EpsilonGrid,
    amplitude: float = 0.5,
    center: Optional[float] = None,
) -> StaticMetricFamily:
    """Singular-regularization demo family h_eps = (1 + a*phi(x/eps)) * I.

    The bump sharpens as epsilon shrinks: coefficients stay O(1) while
    the k-th spatial derivative grows like eps**-k.
    """
    if not (0 < amplitude < 0.9):
        raise ValueError("amplitude must lie in (0, 0.9)")
    if center is None:
        center = space.length / 2
    r = _radial_offsets(space, center)
    lapse = np.ones((grid.k,) + space.shape)
    spatial = np.zeros((grid.k,) + space.shape + (space.d, space.d))
    eps = grid.samples
    for k in range(grid.k):
        factor = 1.0 + amplitude * bump_profile(r / eps[k])
        for a in range(space.d):
            spatial[k, ..., a, a] = factor
    return StaticMetricFamily(
        grid, space, lapse, spatial, 1.0, 1.0,
        deriv_consts={1: amplitude, 2: amplitude}, name="bump",
    )


def wavy_metric(
    space: SpatialGrid,
    grid: EpsilonGrid,
    amplitude: float = 0.5,
    lapse_amp: float = 0.3,
) -> StaticMetricFamily:
    """Bump spatial part with a non-constant lapse V^2 = 1 + b sin(2 pi x1)."""
    if not (0 <= lapse_amp < 1):
        raise ValueError("lapse amplitude must lie in [0, 1)")
    base = bump_metric(space, grid, amplitude)
    x1 = space.meshgrid()[0]
    v2 = 1.0 + lapse_amp * np.sin(2 * np.pi * x1 / space.length)
    lapse = np.broadcast_to(np.sqrt(v2), (grid.k,) + space.shape).copy()
    return StaticMetricFamily(
        grid, space, lapse, base.spatial,
        m_lower=float(np.min(v2)), m_upper=float(np.max(v2)),
        deriv_consts=base.deriv_consts, name="wavy",
    )


def sine_initial_data(
    metric: StaticMetricFamily, mode: int = 1, amplitude: float = 1.0
) -> CauchyData:
    """Standing-wave data v = A sin(2 pi m x1 / L), w = 0."""
    x1 = metric.space.meshgrid()[0]
    v0 = amplitude * np.sin(2 * np.pi * mode * x1 / metric.space.length)
    v = np.broadcast_to(v0, (metric.grid.k,) + metric.space.shape).copy()
    return CauchyData(v, np.zeros_like(v))


# -- setting validation ----------------------------------------------------


@dataclass(frozen=True)
class SettingReport:
    """Empirical growth exponents of the metric family coefficients."""

    coefficient_slope: float
    derivative_slopes: Dict[int, float]
    passed: bool
    details: Dict[str, float]


def _supnorm_slope(sups: np.ndarray, grid: EpsilonGrid) -> float:
    """Tail slope of log(sup-norm) against log(eps); +inf for a zero net."""
    if np.all(sups < 1e-14):
        return math.inf
    fit = valuation(GeneralizedNumber(grid, sups))
    return math.inf if fit.is_zero else fit.slope


def validate_setting(metric: StaticMetricFamily) -> SettingReport:
    """Check the O(1) coefficient and O(eps**-k) derivative growth bounds.

    Pass thresholds: coefficient slope >= -0.1, k-th finite-difference
    derivative slope >= -k - 0.2 for k = 1, 2.  Report only; callers
    raise on failure.
    """
    grid, space = metric.grid, metric.space
    fields = [metric.lapse**2] + [
        metric.spatial[..., a, b] for a in range(space.d) for b in range(space.d)
    ] + [metric.inv_spatial[..., a, b] for a in range(space.d) for b in range(space.d)]
    axes = tuple(range(1, 1 + space.d))
    coeff_sup = np.max([np.max(np.abs(f), axis=axes) for f in fields], axis=0)
    coeff_slope = _supnorm_slope(coeff_sup, grid)

    d1 = []
    d2 = []
    for f in fields:
        for a in range(space.d):
            d1.append(np.max(np.abs(_dc(f, a + 1, space.dx)), axis=axes))
            d2.append(np.max(np.abs(_d2c(f, a + 1, space.dx)), axis=axes))
    d1_slope = _supnorm_slope(np.max(d1, axis=0), grid)
    d2_slope = _supnorm_slope(np.max(d2, axis=0), grid)

    passed = coeff_slope >= -0.1 and d1_slope >= -1.2 and d2_slope >= -2.2
    return SettingReport(
        coefficient_slope=coeff_slope,
        derivative_slopes={1: d1_slope, 2: d2_slope},
        passed=passed,
        details={
            "coefficient_sup_max": float(np.max(coeff_sup)),
            "d1_sup_max": float(np.max(np.max(d1, axis=0))),
            "d2_sup_max": float(np.max(np.max(d2, axis=0))),
        },
    )


# -- differential operators ------------------------------------------------


def christoffel(metric: StaticMetricFamily) -> np.ndarray:
    """Spatial Christoffel symbols Gamma^c_ab, shape (K, *space, d, d, d).

    Centered finite differences of the spatial metric; time derivatives
    vanish identically for a static family.
    """
    space = metric.space
    h = metric.spatial
    det = metric.det_spatial
    if np.any(det <= NUMERIC_FLOOR) or not np.all(np.isfinite(det)):
        k_bad, flat_bad = np.unravel_index(
            int(np.argmin(det)), det.shape[:1] + (int(np.prod(space.shape)),)
        )
        raise SettingError(f"singular spatial metric at (eps index {k_bad}, point {flat_bad})")
    dh = np.stack(
        [_dc(h, a + 1, space.dx) for a in range(space.d)], axis=-3
    )  # (..., c, a, b) with c the derivative direction
    # Gamma^c_ab = 1/2 h^{cg} (d_a h_gb + d_b h_ga - d_g h_ab)
    k_shape = dh.shape[:-3]
    d = space.d
    gamma_lower = np.zeros(k_shape + (d, d, d))  # (g, a, b)
    for g in range(d):
        for a in range(d):
            for b in range(d):
                gamma_lower[..., g, a, b] = 0.5 * (
                    dh[..., a, g, b] + dh[..., b, g, a] - dh[..., g, a, b]
                )
    return np.einsum("...cg,...gab->...cab", metric.inv_spatial, gamma_lower)


def spatial_wave_operator(metric: StaticMetricFamily, u: np.ndarray) -> np.ndarray:
    """Flux-form divergence (1/w) d_a (w h^{ab} d_b u), per epsilon.

    Diagonal terms use staggered half-cell fluxes (keeping the discrete
    operator in divergence form); cross terms use centered differences.
    """
    space = metric.space
    dx = space.dx
    w = metric.weight
    out = np.zeros_like(u)
    for a in range(space.d):
        axis = a + 1
        coef = w * metric.inv_spatial[..., a, a]
        coef_half = 0.5 * (coef + np.roll(coef, -1, axis))
        flux = coef_half * (np.roll(u, -1, axis) - u) / dx
        out += (flux - np.roll(flux, 1, axis)) / dx
        for b in range(space.d):
            if b == a:
                continue
            cross = w * metric.inv_spatial[..., a, b]
            out += _dc(cross * _dc(u, b + 1, dx), axis, dx)
    return out / w


def dalembert_apply(
    metric: StaticMetricFamily,
    u_prev: np.ndarray,
    u_curr: np.ndarray,
    u_next: np.ndarray,
    dt: float,
) -> np.ndarray:
    """Discrete d'Alembertian from three consecutive time slices.

    -V**-2 (centered second time difference) + flux-form spatial part;
    exact on quadratics in t and second order in dx and dt.
    """
    utt = (u_next - 2.0 * u_curr + u_prev) / dt**2
    return -utt / metric.lapse**2 + spatial_wave_operator(metric, u_curr)


# -- solver ----------------------------------------------------------------


def solve(
    metric: StaticMetricFamily,
    data: CauchyData,
    t_final: float,
    cfl: float = 0.5,
    dt: Optional[float] = None,
    check_setting: bool = True,
) -> WaveRun:
    """Leapfrog integration of d_t^2 u = V^2 L(u) on the periodic box.

    The time step is cfl * dx / c_max unless overridden; the first step
    is a Taylor start from the initial derivative.  Blow-up beyond 1e6
    times the initial scale aborts with the epsilon index.
    """
    if check_setting:
        report = validate_setting(metric)
        if not report.passed:
            raise SettingError(f"metric family violates the setting bounds: {report}")
    if not (0 < cfl < 1):
        raise ValueError(f"cfl must lie in (0, 1), got {cfl}")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    expect = (metric.grid.k,) + metric.space.shape
    if data.v.shape != expect:
        raise ValueError(f"initial data shape {data.v.shape}, expected {expect}")
    if dt is None:
        dt_target = cfl * metric.space.dx / metric.c_max
        n_steps = max(4, int(math.ceil(t_final / dt_target - 1e-12)))
        dt = t_final / n_steps
    else:
        n_steps = max(4, int(round(t_final / dt)))
        if abs(n_steps * dt - t_final) > 1e-9:
            raise ValueError("dt must divide t_final")

    v2 = metric.lapse**2
    slices = np.empty((metric.grid.k, n_steps + 1) + metric.space.shape)
    slices[:, 0] = data.v
    slices[:, 1] = data.v + dt * data.w + 0.5 * dt**2 * v2 * spatial_wave_operator(metric, data.v)
    scale = max(float(np.max(np.abs(data.v))), dt * float(np.max(np.abs(data.w))), 1e-30)
    limit = 1e6 * scale
    for j in range(1, n_steps):
        slices[:, j + 1] = (
            2.0 * slices[:, j]
            - slices[:, j - 1]
            + dt**2 * v2 * spatial_wave_operator(metric, slices[:, j])
        )
        if j % 16 == 0 or j == n_steps - 1:
            sup = np.max(np.abs(slices[:, j + 1]), axis=tuple(range(1, 1 + metric.space.d)))
            if np.any(sup > limit):
                bad = int(np.flatnonzero(sup > limit)[0])
                raise InstabilityError(
                    f"run unstable at epsilon index {bad} (step {j + 1}, sup={sup[bad]:.3e})"
                )
    times = np.arange(n_steps + 1) * dt
    return WaveRun(slices=slices, dt=dt, times=times)


# -- derivatives on stored slices -------------------------------------------


def _time_derivatives(run: WaveRun, j: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(u, u_t, u_tt) at slice j; second-order one-sided at the run ends."""
    s, dt = run.slices, run.dt
    m = run.n_slices - 1
    u = s[:, j]
    if 0 < j < m:
        ut = (s[:, j + 1] - s[:, j - 1]) / (2 * dt)
        utt = (s[:, j + 1] - 2 * u + s[:, j - 1]) / dt**2
    elif j == 0:
        ut = (-3 * s[:, 0] + 4 * s[:, 1] - s[:, 2]) / (2 * dt)
        utt = (2 * s[:, 0] - 5 * s[:, 1] + 4 * s[:, 2] - s[:, 3]) / dt**2
    else:
        ut = (3 * s[:, m] - 4 * s[:, m - 1] + s[:, m - 2]) / (2 * dt)
        utt = (2 * s[:, m] - 5 * s[:, m - 1] + 4 * s[:, m - 2] - s[:, m - 3]) / dt**2
    return u, ut, utt


@dataclass(frozen=True)
class _SliceFields:
    """All derivative fields of u needed for energies up to order 2."""

    u: np.ndarray
    ut: np.ndarray
    utt: np.ndarray
    ux: tuple            # d_a u
    utx: tuple           # d_t d_a u
    uxx: tuple           # d_a d_b u, tuple of tuples


def _fields_from_run(metric: StaticMetricFamily, run: WaveRun, j: int) -> _SliceFields:
    dx = metric.space.dx
    d = metric.space.d
    u, ut, utt = _time_derivatives(run, j)
    ux = tuple(_dc(u, a + 1, dx) for a in range(d))
    utx = tuple(_dc(ut, a + 1, dx) for a in range(d))
    uxx = tuple(
        tuple(
            _d2c(u, a + 1, dx) if a == b else _dc(ux[b], a + 1, dx)
            for b in range(d)
        )
        for a in range(d)
    )
    return _SliceFields(u, ut, utt, ux, utx, uxx)


def _fields_from_data(metric: StaticMetricFamily, data: CauchyData) -> _SliceFields:
    """Initial fields with time derivatives recovered through the equation."""
    dx = metric.space.dx
    d = metric.space.d
    u, ut = data.v, data.w
    utt = metric.lapse**2 * spatial_wave_operator(metric, u)
    ux = tuple(_dc(u, a + 1, dx) for a in range(d))
    utx = tuple(_dc(ut, a + 1, dx) for a in range(d))
    uxx = tuple(
        tuple(
            _d2c(u, a + 1, dx) if a == b else _dc(ux[b], a + 1, dx)
            for b in range(d)
        )
        for a in range(d)
    )
    return _SliceFields(u, ut, utt, ux, utx, uxx)


def _cov_square(metric: StaticMetricFamily, f: _SliceFields, j: int) -> np.ndarray:
    """|nabla^(j) u|^2 contracted with the flipped Riemannian metric.

    The flip of the static metric is diag(V^-2, h^{ab}); order 2 uses
    covariant second derivatives with the static Christoffel symbols
    (Gamma^0_0a = V_a / V, Gamma^a_00 = V h^{ab} V_b, spatial Gamma from h).
    """
    d = metric.space.d
    hinv = metric.inv_spatial
    v = metric.lapse
    if j == 0:
        return f.u**2
    if j == 1:
        out = f.ut**2 / v**2
        for a in range(d):
            for b in range(d):
                out += hinv[..., a, b] * f.ux[a] * f.ux[b]
        return out
    if j == 2:
        dx = metric.space.dx
        gamma = christoffel(metric)
        vx = tuple(_dc(v, a + 1, dx) for a in range(d))
        # (nabla nabla u)_{00} = u_tt - Gamma^a_00 u_a
        c00 = f.utt.copy()
        for a in range(d):
            gam_a00 = v * sum(hinv[..., a, b] * vx[b] for b in range(d))
            c00 -= gam_a00 * f.ux[a]
        # (nabla nabla u)_{0a} = u_ta - (V_a / V) u_t
        c0 = [f.utx[a] - (vx[a] / v) * f.ut for a in range(d)]
        # (nabla nabla u)_{ab} = u_ab - Gamma^c_ab u_c
        cab = [
            [
                f.uxx[a][b] - sum(gamma[..., c, a, b] * f.ux[c] for c in range(d))
                for b in range(d)
            ]
            for a in range(d)
        ]
        out = (c00 / v**2) ** 2
        for a in range(d):
            for b in range(d):
                out += 2.0 / v**2 * hinv[..., a, b] * c0[a] * c0[b]
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    for e in range(d):
                        out += hinv[..., a, c] * hinv[..., b, e] * cab[a][b] * cab[c][e]
        return out
    raise ValueError(f"hierarchy order must be 0, 1 or 2, got {j}")


def _partial_square(metric: StaticMetricFamily, f: _SliceFields, j: int) -> np.ndarray:
    """Sum of squared partial derivatives over all order-j index tuples."""
    d = metric.space.d
    if j == 0:
        return f.u**2
    if j == 1:
        out = f.ut**2
        for a in range(d):
            out += f.ux[a] ** 2
        return out
    if j == 2:
        out = f.utt**2
        for a in range(d):
            out += 2.0 * f.utx[a] ** 2  # (t,a) and (a,t)
        for a in range(d):
            for b in range(d):
                out += f.uxx[a][b] ** 2
        return out
    raise ValueError(f"hierarchy order must be 0, 1 or 2, got {j}")


# -- energies and Sobolev norms ---------------------------------------------


def _energy_terms_from_fields(
    metric: StaticMetricFamily, f: _SliceFields, k: int
) -> list:
    return [metric.integrate(0.5 * metric.lapse * _cov_square(metric, f, j)) for j in range(k + 1)]


def energy_term(metric: StaticMetricFamily, run: WaveRun, tau: float, j: int) -> np.ndarray:
    """Single hierarchy term: slice integral of (V/2) |nabla^(j) u|^2."""
    f = _fields_from_run(metric, run, run.slice_index(tau))
    return metric.integrate(0.5 * metric.lapse * _cov_square(metric, f, j))


def energy(metric: StaticMetricFamily, run: WaveRun, tau: float, k: int) -> np.ndarray:
    """Energy of the k-th hierarchy: cumulative sum of terms j = 0..k."""
    f = _fields_from_run(metric, run, run.slice_index(tau))
    return np.sum(_energy_terms_from_fields(metric, f, k), axis=0)


def initial_energy_from_data(metric: StaticMetricFamily, data: CauchyData, k: int) -> np.ndarray:
    """E^k at t=0 from (v, w) only, recovering u_tt through the equation."""
    f = _fields_from_data(metric, data)
    return np.sum(_energy_terms_from_fields(metric, f, k), axis=0)


def sobolev_norms(
    metric: StaticMetricFamily, run: WaveRun, tau: float, k: int
) -> Tuple[np.ndarray, np.ndarray]:
    """(covariant, partial) slice Sobolev norms of order k, per epsilon."""
    f = _fields_from_run(metric, run, run.slice_index(tau))
    cov = np.sum(
        [metric.integrate(_cov_square(metric, f, j)) for j in range(k + 1)], axis=0
    )
    part = np.sum(
        [metric.integrate(_partial_square(metric, f, j)) for j in range(k + 1)], axis=0
    )
    return np.sqrt(cov), np.sqrt(part)


@dataclass(frozen=True)
class EquivalenceReport:
    """Sandwich of E^k between Sobolev norms with A = M0/2, A' = M/2."""

    k: int
    tau: float
    energy: np.ndarray
    sob_cov: np.ndarray
    sob_part: np.ndarray
    a_upper: float
    a_lower: float
    sandwich_ok: bool
    margin_low: np.ndarray
    margin_high: np.ndarray
    weighted_ratio_cov_by_part: np.ndarray
    weighted_ratio_part_by_cov: np.ndarray
    fitted_b_prime: float
    fitted_b: float
    uniform_ok: bool


def verify_equivalence(
    metric: StaticMetricFamily, run: WaveRun, tau: float, k: int, slack: float = 0.05
) -> EquivalenceReport:
    """Check A' ||u||^2 <= E^k <= A ||u||^2 and the eps-weighted bounds.

    A = M0/2 and A' = M/2 come from the lapse bounds; the flat family
    gives equality.  The covariant/partial comparison reports per-epsilon
    ratios against the weighted sums sum_j eps**-2(k-j) ||u||_j^2 and
    checks they stay epsilon-uniform (fitted slope >= -0.1).
    """
    j = run.slice_index(tau)
    f = _fields_from_run(metric, run, j)
    e_val = np.sum(_energy_terms_from_fields(metric, f, k), axis=0)
    cov2 = [metric.integrate(_cov_square(metric, f, i)) for i in range(k + 1)]
    part2 = [metric.integrate(_partial_square(metric, f, i)) for i in range(k + 1)]
    sob_cov2 = np.sum(cov2, axis=0)
    sob_part2 = np.sum(part2, axis=0)
    a_upper = metric.m_upper / 2.0
    a_lower = metric.m_lower / 2.0
    scale = np.maximum(np.maximum(e_val, a_upper * sob_cov2), 1e-30)
    hi = a_upper * sob_cov2 - e_val
    lo = e_val - a_lower * sob_cov2
    ok = bool(np.all(hi >= -slack * scale) and np.all(lo >= -slack * scale))

    eps = metric.grid.samples
    if k >= 1:
        wsum_part = np.sum([eps ** (-2.0 * (k - i)) * part2[i] for i in range(1, k + 1)], axis=0)
        wsum_cov = np.sum([eps ** (-2.0 * (k - i)) * cov2[i] for i in range(1, k + 1)], axis=0)
        r_cov = sob_cov2 / np.maximum(wsum_part, 1e-300)
        r_part = sob_part2 / np.maximum(wsum_cov, 1e-300)
    else:
        r_cov = np.ones_like(sob_cov2)
        r_part = np.ones_like(sob_cov2)
    uniform_ok = True
    for r in (r_cov, r_part):
        if np.max(r) > 1e-13:
            fit = valuation(GeneralizedNumber(metric.grid, np.maximum(r, 1e-300)))
            if not fit.is_zero and fit.slope < -0.1:
                uniform_ok = False
    return EquivalenceReport(
        k=k,
        tau=tau,
        energy=e_val,
        sob_cov=np.sqrt(sob_cov2),
        sob_part=np.sqrt(sob_part2),
        a_upper=a_upper,
        a_lower=a_lower,
        sandwich_ok=ok,
        margin_low=lo,
        margin_high=hi,
        weighted_ratio_cov_by_part=r_cov,
        weighted_ratio_part_by_cov=r_part,
        fitted_b_prime=float(np.max(r_cov)),
        fitted_b=float(np.max(r_part)),
        uniform_ok=uniform_ok,
    )


@dataclass(frozen=True)
class GrowthReport:
    """Exponential-growth fit of E^1 and moderateness of sup-energies."""

    fitted_c: np.ndarray          # per epsilon
    c_uniform_max: float
    sup_energy_slopes: Dict[int, float]
    moderate: bool
    zero_energy: bool


def verify_energy_growth(
    metric: StaticMetricFamily, run: WaveRun, ks: Sequence[int] = (0, 1, 2)
) -> GrowthReport:
    """Fit C in E^1_tau <= E^1_0 exp(C tau) and sup-energy decay slopes.

    The homogeneous equation has no source term, so a conserved or
    decaying discrete energy yields C ~ 0.  Moderateness asks each
    sup_tau E^k to have a finite decay exponent in epsilon.
    """
    n = run.n_slices
    e1 = np.stack([energy(metric, run, run.times[j], 1) for j in range(n)], axis=0)
    e0 = e1[0]
    zero = bool(np.all(e1 < 1e-28))
    fitted = np.zeros(metric.grid.k)
    if not zero:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.log(np.maximum(e1[1:], 1e-300) / np.maximum(e0, 1e-300))
            per_slice_c = ratios / run.times[1:, None]
        fitted = np.maximum(np.max(per_slice_c, axis=0), 0.0)
    slopes: Dict[int, float] = {}
    for k in ks:
        sup_e = np.max(
            np.stack([energy(metric, run, run.times[j], k) for j in range(n)], axis=0),
            axis=0,
        )
        slopes[k] = _supnorm_slope(sup_e, metric.grid)
    moderate = all(math.isfinite(s) or s == math.inf for s in slopes.values())
    return GrowthReport(
        fitted_c=fitted,
        c_uniform_max=float(np.max(fitted)) if not zero else 0.0,
        sup_energy_slopes=slopes,
        moderate=moderate,
        zero_energy=zero,
    )


# -- negligibility propagation ----------------------------------------------


def _field_sup_net(field: np.ndarray, grid: EpsilonGrid) -> GeneralizedNumber:
    axes = tuple(range(1, field.ndim))
    return GeneralizedNumber(grid, np.max(np.abs(field), axis=axes))


def _difference_valuation(diff_sup: np.ndarray, grid: EpsilonGrid) -> AsymptoticFit:
    """Valuation of a difference net, fitted over all resolvable samples.

    Double precision rounds sub-ulp perturbations away, so the deep tail
    of a difference of two solves is often exactly zero; the fit uses
    every nonzero sample and returns the +inf sentinel for an
    identically vanishing difference.
    """
    net = GeneralizedNumber(grid, diff_sup)
    try:
        return valuation(net, full_window=True)
    except FitError:
        # one or two resolvable samples: report the crudest secant bound
        usable = np.flatnonzero(diff_sup >= NUMERIC_FLOOR)
        logs = grid.log_samples
        if len(usable) == 2:
            a, b = usable
            slope = (math.log(diff_sup[b]) - math.log(diff_sup[a])) / (logs[b] - logs[a])
            return AsymptoticFit(slope, math.nan, math.nan, False, slope)
        return AsymptoticFit(math.inf, math.nan, math.nan, True, math.inf)


def _check_negligible_field(field: np.ndarray, grid: EpsilonGrid, m_max: float, name: str):
    fit = _difference_valuation(np.max(np.abs(field), axis=tuple(range(1, field.ndim))), grid)
    # 0.01 of fit slack: a slope-m_max power net fits to m_max up to rounding
    if not fit.is_zero and fit.slope < m_max - 0.01:
        raise ValueError(f"{name} has valuation {fit.slope:.2f}, need >= {m_max}")


def uniqueness_test(
    metric: StaticMetricFamily,
    data: CauchyData,
    perturbation: CauchyData,
    t_final: float,
    m_max: float = DEFAULT_M_MAX,
    cfl: float = 0.5,
) -> AsymptoticFit:
    """Valuation of the sup-difference between a run and its perturbed twin.

    The perturbation must be negligible (valuation >= m_max); both runs
    share one time step so the comparison is slicewise.
    """
    _check_negligible_field(perturbation.v, metric.grid, m_max, "perturbation v")
    _check_negligible_field(perturbation.w, metric.grid, m_max, "perturbation w")
    base = solve(metric, data, t_final, cfl=cfl)
    pert = solve(metric, data + perturbation, t_final, cfl=cfl, dt=base.dt, check_setting=False)
    diff = np.max(
        np.abs(base.slices - pert.slices), axis=tuple(range(1, base.slices.ndim))
    )
    return _difference_valuation(diff, metric.grid)


def representative_independence(
    metric: StaticMetricFamily,
    delta_lapse_sq: Optional[np.ndarray],
    delta_spatial: Optional[np.ndarray],
    data: CauchyData,
    t_final: float,
    m_max: float = DEFAULT_M_MAX,
    cfl: float = 0.5,
) -> AsymptoticFit:
    """Valuation of the solution change under a negligible metric change.

    The perturbed family must still satisfy the metric invariants; both
    solves run on the base time step.
    """
    grid, space = metric.grid, metric.space
    v2 = metric.lapse**2
    h = metric.spatial.copy()
    if delta_lapse_sq is not None:
        _check_negligible_field(np.asarray(delta_lapse_sq), grid, m_max, "lapse delta")
        v2 = v2 + delta_lapse_sq
        if np.any(v2 <= 0):
            raise SettingError("perturbed lapse is not positive")
    if delta_spatial is not None:
        _check_negligible_field(np.asarray(delta_spatial), grid, m_max, "spatial delta")
        h = h + delta_spatial
    perturbed = StaticMetricFamily(
        grid,
        space,
        np.sqrt(v2),
        h,
        m_lower=float(np.min(v2)),
        m_upper=float(np.max(v2)),
        name=metric.name + "+delta",
    )
    base = solve(metric, data, t_final, cfl=cfl)
    other = solve(perturbed, data, t_final, cfl=cfl, dt=base.dt, check_setting=False)
    diff = np.max(
        np.abs(base.slices - other.slices), axis=tuple(range(1, base.slices.ndim))
    )
    return _difference_valuation(diff, metric.grid)


# -- paraboloid region -------------------------------------------------------


@dataclass(frozen=True)
class ParaboloidRegion:
    """Foliated region below t = height * (1 - |x|^2 / radius^2)."""

    height: float
    radius: float
    center: tuple

    @property
    def ratio(self) -> float:
        return self.height / self.radius


@dataclass(frozen=True)
class SpacelikeCertificate:
    """Per-sample verification that the paraboloid boundary is spacelike."""

    ratio: float
    ratio_bound: float
    n_samples: int
    worst_value: float
    bound: float
    apex_value: float
    apex_bound: float
    passed: bool


def build_region(
    m_lower: float,
    m_upper: float,
    height: float,
    radius: float,
    metric: StaticMetricFamily,
    center: Optional[tuple] = None,
    tol: float = 1e-9,
) -> Tuple[ParaboloidRegion, SpacelikeCertificate]:
    """Validate the ratio condition and certify a spacelike boundary.

    Rejects height/radius > (1/2) sqrt(M0 / (6 M)); otherwise evaluates
    <n,n> = -V**-2 + (2h/rho^2)^2 h^{ab} x_a x_b at boundary samples
    (grid points within the radius, offsets wrapped periodically) over
    the tail epsilons and demands <n,n> <= -1/(2M) + tol throughout.
    """
    if height <= 0 or radius <= 0:
        raise ValueError("height and radius must be positive")
    ratio = height / radius
    ratio_bound = 0.5 * math.sqrt(m_upper / (6.0 * m_lower))
    if ratio > ratio_bound:
        raise RegionError(
            f"ratio h/rho = {ratio:.4f} exceeds (1/2)sqrt(M0/(6M)) = {ratio_bound:.4f}"
        )
    space = metric.space
    if center is None:
        center = (space.length / 2,) * space.d
    mesh = space.meshgrid()
    offsets = [
        (x - c + space.length / 2) % space.length - space.length / 2
        for x, c in zip(mesh, center)
    ]
    r2 = sum(o**2 for o in offsets)
    mask = r2 <= radius**2 + 1e-12
    tail = metric.grid.tail
    vinv2 = 1.0 / metric.lapse[tail] ** 2
    quad = np.zeros((len(tail),) + space.shape)
    for a in range(space.d):
        for b in range(space.d):
            quad += metric.inv_spatial[tail][..., a, b] * offsets[a] * offsets[b]
    nn = -vinv2 + (2.0 * height / radius**2) ** 2 * quad
    samples = nn[:, mask]
    bound = -1.0 / (2.0 * m_lower)
    worst = float(np.max(samples))
    apex_idx = np.unravel_index(int(np.argmin(r2)), r2.shape)
    apex_value = float(np.max(nn[(slice(None),) + apex_idx]))
    cert = SpacelikeCertificate(
        ratio=ratio,
        ratio_bound=ratio_bound,
        n_samples=int(np.count_nonzero(mask)),
        worst_value=worst,
        bound=bound,
        apex_value=apex_value,
        apex_bound=-1.0 / m_upper,
        passed=worst <= bound + tol,
    )
    if not cert.passed:
        raise RegionError(
            f"spacelike certificate fails: worst <n,n> = {worst:.6f} > {bound:.6f} + tol"
        )
    return ParaboloidRegion(height, radius, tuple(center)), cert


# -- sup-norm vs energy -------------------------------------------------------


@dataclass(frozen=True)
class SupEnergyReport:
    """Fit of sup|u| <= K eps**-N sup_tau E^2."""

    ratios: np.ndarray
    fitted_k: float
    fitted_n: float
    zero_solution: bool


def sup_vs_energy(metric: StaticMetricFamily, run: WaveRun) -> SupEnergyReport:
    """Per-epsilon ratio of sup|u| to sup_tau E^2 and its decay exponent."""
    sup_u = run.sup_abs()
    n = run.n_slices
    sup_e = np.max(
        np.stack([energy(metric, run, run.times[j], 2) for j in range(n)], axis=0), axis=0
    )
    if np.all(sup_u < 1e-28):
        return SupEnergyReport(np.zeros_like(sup_u), 0.0, 0.0, True)
    ratios = sup_u / np.maximum(sup_e, 1e-300)
    fit = valuation(GeneralizedNumber(metric.grid, ratios))
    fitted_n = max(0.0, -fit.slope) if not fit.is_zero else 0.0
    fitted_k = float(np.exp(fit.intercept)) if not fit.is_zero else 0.0
    return SupEnergyReport(ratios, fitted_k, fitted_n, False)


# -- tabulated report for the CLI ---------------------------------------------


@dataclass
class EnergyReport:
    """Energy/Sobolev table over (k, tau, eps) plus fitted decay slopes."""

    rows: list = field(default_factory=list)  # (k, tau, eps, E, sob_cov, sob_part, sup_u)
    slopes: Dict[int, float] = field(default_factory=dict)


def energy_report(
    metric: StaticMetricFamily,
    run: WaveRun,
    ks: Iterable[int] = (0, 1, 2),
    taus: Optional[Sequence[float]] = None,
) -> EnergyReport:
    if taus is None:
        step = max(1, (run.n_slices - 1) // 8)
        taus = [run.times[j] for j in range(0, run.n_slices, step)]
    report = EnergyReport()
    eps = metric.grid.samples
    space_axes = tuple(range(1, 1 + metric.space.d))
    for k in ks:
        sup_k = np.zeros(metric.grid.k)
        for tau in taus:
            e = energy(metric, run, tau, k)
            cov, part = sobolev_norms(metric, run, tau, k)
            sup_u = np.max(np.abs(run.slices[:, run.slice_index(tau)]), axis=space_axes)
            sup_k = np.maximum(sup_k, e)
            for i in range(metric.grid.k):
                report.rows.append(
                    (k, float(tau), float(eps[i]), float(e[i]), float(cov[i]), float(part[i]), float(sup_u[i]))
                )
        report.slopes[k] = _supnorm_slope(sup_k, metric.grid)
    return report
