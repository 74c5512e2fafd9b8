"""Heat kernel by eigenexpansion, identity checks, and trace bounds.

The kernel of the drift heat semigroup is H(x,y,t) = sum_i e^{-lambda_i t}
psi_i(x) psi_i(y) over weighted-orthonormal eigenfunctions with psi_0 =
V_phi^{-1/2}.  On the sphere the expansion is organized per azimuthal mode;
kernel values are reported for points on a common meridian, where the sine
modes vanish and the cosine modes contribute their meridian profiles.

Truncation is certified against the retained discrete operators: the tail of
the retained problems is bounded by (dim - N) e^{-lambda_N t}, and on the
sphere the azimuthal sectors beyond the cap are bounded through the
weighted Weyl comparison lambda >= e^{-osc(phi)} l(l+1)/r^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import TruncationError, DriftLabError
from .eigensolve import MergedSpectrum, Spectrum
from .geometry import SphereSymmetric, WeightedGeometry, weighted_cell_measure
from .operators import SpectralProblem

TWO_PI = 2.0 * math.pi


@dataclass
class HeatKernelModel:
    """Truncated eigenexpansion of the weighted heat kernel.

    lambdas      retained eigenvalues, ascending, starting at ~0
    profiles     (n_nodes, N) meridian/grid values; sine copies are zero
    modes        azimuthal index per entry (0 for 1-D geometries)
    sin_copy     True for the sine partner of an m >= 1 entry
    theta_w      quadrature weights of e^{-phi} dV in the grid coordinate,
                 azimuthal factor excluded
    """

    geometry: WeightedGeometry
    lambdas: np.ndarray
    profiles: np.ndarray
    modes: np.ndarray
    sin_copy: np.ndarray
    theta_w: np.ndarray
    v_phi: float
    total_dim: int
    tol: float
    cap: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_retained(self) -> int:
        return self.lambdas.size

    @property
    def is_sphere(self) -> bool:
        return isinstance(self.geometry.topology, SphereSymmetric)

    @property
    def lambda_max(self) -> float:
        return float(self.lambdas[-1])

    def truncation_bound(self, t: float) -> float:
        """Certified tail bound of the discarded spectrum at time t."""
        if t <= 0:
            return math.inf
        tail = (self.total_dim - self.n_retained) * math.exp(-self.lambda_max * t)
        if self.is_sphere:
            tail += self._missing_sector_bound(t)
        return tail

    def _missing_sector_bound(self, t: float) -> float:
        # Sectors m > cap: pairs (l, m), cap < m <= l, multiplicity 2, with
        # lambda >= e^{-osc(phi)} l(l+1)/r^2 by Rayleigh quotient comparison.
        cap = self.cap if self.cap is not None else self.geometry.topology.azimuthal_mode_cap
        r2 = self.geometry.topology.radius ** 2
        kappa = math.exp(-self.geometry.phi_oscillation()) / r2
        total = 0.0
        l = cap + 1
        while True:
            term = 2.0 * (l - cap) * math.exp(-kappa * l * (l + 1) * t)
            total += term
            ratio = ((l + 1 - cap) / (l - cap)) * math.exp(-2.0 * kappa * (l + 1) * t)
            if ratio < 0.5 and term < 1e-3 * self.tol:
                total += term * ratio / (1.0 - ratio)
                break
            l += 1
            if l > cap + 100000:
                return math.inf
        return total

    @property
    def t_min(self) -> float:
        """Smallest time with truncation_bound(t) <= tol (bisection)."""
        lo, hi = 1e-12, 1.0
        while self.truncation_bound(hi) > self.tol:
            hi *= 2.0
            if hi > 1e12:
                raise TruncationError("truncation bound never reaches tolerance")
        if self.truncation_bound(lo) <= self.tol:
            return lo
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if self.truncation_bound(mid) <= self.tol:
                hi = mid
            else:
                lo = mid
        return hi

    def require_valid_time(self, t: float):
        bound = self.truncation_bound(t)
        if bound > self.tol:
            raise TruncationError(
                f"t={t:g} below the certified range: truncation bound "
                f"{bound:.3e} > tol {self.tol:.3e}; admissible t >= {self.t_min:.6g}"
            )


def build_heat_model(
    spectrum: Spectrum | MergedSpectrum,
    problem: Optional[SpectralProblem] = None,
    problems: Optional[dict] = None,
    tol: float = 1e-8,
) -> HeatKernelModel:
    """Heat kernel model from a solved spectrum.

    1-D geometries pass (spectrum, problem); spheres pass a MergedSpectrum
    plus the per-mode problems dict {m: SpectralProblem}.
    """
    if isinstance(spectrum, MergedSpectrum):
        if not problems:
            raise DriftLabError("sphere heat model needs the per-mode problems")
        any_problem = problems[0]
        geom = any_problem.geometry
        n_nodes = any_problem.dim
        entries = spectrum.entries
        lambdas = np.array([max(e.value, 0.0) for e in entries])
        profiles = np.zeros((n_nodes, len(entries)))
        for col, e in enumerate(entries):
            if not e.sin_copy:
                profiles[:, col] = spectrum.spectra[e.mode].eigenfunctions[:, e.column]
        modes = np.array([e.mode for e in entries], dtype=int)
        sin_copy = np.array([e.sin_copy for e in entries], dtype=bool)
        total_dim = sum(
            p.dim * (2 if m >= 1 else 1) for m, p in problems.items()
        )
        cap = max(problems)
        theta_w = weighted_cell_measure(geom)
        v_phi = float(TWO_PI * theta_w.sum())
    else:
        if problem is None:
            problem = spectrum.problem
        geom = problem.geometry
        lambdas = np.maximum(spectrum.eigenvalues, 0.0)
        profiles = spectrum.eigenfunctions
        modes = np.zeros(lambdas.size, dtype=int)
        sin_copy = np.zeros(lambdas.size, dtype=bool)
        total_dim = problem.dim
        cap = None
        theta_w = problem.mass_diag
        v_phi = float(theta_w.sum())
    order = np.argsort(lambdas, kind="stable")
    model = HeatKernelModel(
        geometry=geom,
        lambdas=lambdas[order],
        profiles=profiles[:, order],
        modes=modes[order],
        sin_copy=sin_copy[order],
        theta_w=theta_w,
        v_phi=v_phi,
        total_dim=total_dim,
        tol=tol,
        cap=cap,
    )
    return model


# -- pointwise evaluation -------------------------------------------------------


def heat_kernel_eval(model: HeatKernelModel, ix: int, iy: int, t: float) -> float:
    """Kernel value at two grid points (same meridian on the sphere)."""
    model.require_valid_time(t)
    weights = np.exp(-model.lambdas * t)
    return float(np.sum(weights * model.profiles[ix] * model.profiles[iy]))


def centered_diagonal(model: HeatKernelModel, ix: int, t: float) -> float:
    """On-diagonal value of the centered kernel H - 1/V_phi: a sum of squares
    over the nonconstant modes, hence nonnegative."""
    weights = np.exp(-model.lambdas[1:] * t)
    return float(np.sum(weights * model.profiles[ix, 1:] ** 2))


def _zonal_integrals(model: HeatKernelModel) -> np.ndarray:
    """int psi_i e^{-phi} dV per entry; exactly zero for m >= 1 by the
    azimuthal integral, quadrature of the meridian profile for m = 0."""
    az = TWO_PI if model.is_sphere else 1.0
    vals = az * (model.theta_w @ model.profiles)
    vals[model.modes >= 1] = 0.0
    return vals


def stochastic_completeness_check(model: HeatKernelModel, ix: int, t: float) -> float:
    """|int H(x, ., t) e^{-phi} dV - 1|: heat conservation in the weighted measure."""
    model.require_valid_time(t)
    ints = _zonal_integrals(model)
    total = np.sum(np.exp(-model.lambdas * t) * model.profiles[ix] * ints)
    return float(abs(total - 1.0))


# -- quadrature over the manifold -------------------------------------------------


def _section_values(model: HeatKernelModel, coeffs: np.ndarray, azimuths: Optional[np.ndarray]):
    """Values of sum_i coeffs_i psi_i over the manifold sample grid.

    1-D: values on the nodes.  Sphere: (n_theta, n_azimuth) with the cosine
    azimuthal factors; sine copies carry zero profiles and the x-point on the
    reference meridian kills them.
    """
    base = model.profiles * coeffs[None, :]
    if not model.is_sphere:
        return base.sum(axis=1)
    cosines = np.cos(np.outer(model.modes, azimuths))
    return np.einsum("im,ma->ia", base, cosines)


def _manifold_weights(model: HeatKernelModel, azimuths: Optional[np.ndarray]):
    if not model.is_sphere:
        return model.theta_w
    da = TWO_PI / azimuths.size
    return np.outer(model.theta_w, np.full(azimuths.size, da))


def _azimuth_grid(model: HeatKernelModel) -> Optional[np.ndarray]:
    if not model.is_sphere:
        return None
    n_az = 2 * int(model.modes.max()) + 4
    return np.arange(n_az) * (TWO_PI / n_az)


@dataclass(frozen=True)
class CenteredKernelReport:
    """Identity checks of the centered kernel G = H - 1/V_phi."""

    mean_zero_dev: float
    l1_bound_max: float
    semigroup_dev: float
    diagonal_min: float
    times: tuple


def centered_kernel_checks(
    model: HeatKernelModel,
    t_grid,
    x_samples=None,
    seed: int = 0,
) -> CenteredKernelReport:
    """Mean-zero, L1 bound (<= 2), semigroup identity, and on-diagonal
    nonnegativity of the centered kernel at sampled points and times.

    The semigroup identity integrates G(x,.,t) G(.,z,s) over the manifold;
    on the sphere the azimuthal quadrature uses a uniform grid dense enough
    to integrate the retained trigonometric polynomials exactly.
    """
    rng = np.random.default_rng(seed)
    n = model.profiles.shape[0]
    if x_samples is None:
        x_samples = sorted(set([n // 7, n // 2, (5 * n) // 7]))
    t_grid = [float(t) for t in t_grid]
    for t in t_grid:
        model.require_valid_time(t)
    az = _azimuth_grid(model)
    w_man = _manifold_weights(model, az)
    ints = _zonal_integrals(model)

    mean_zero = 0.0
    l1_max = 0.0
    semi_dev = 0.0
    diag_min = math.inf
    for t in t_grid:
        decay = np.exp(-model.lambdas * t)
        for ix in x_samples:
            coeffs = decay * model.profiles[ix]
            # Mean-zero: only nonconstant entries, integrated over M.
            coeffs0 = coeffs.copy()
            coeffs0[0] = 0.0
            mean_zero = max(mean_zero, abs(float(coeffs0 @ ints)))
            g_vals = _section_values(model, coeffs, az) - 1.0 / model.v_phi
            l1_max = max(l1_max, float(np.sum(w_man * np.abs(g_vals))))
            diag_min = min(diag_min, centered_diagonal(model, ix, t))
        # Semigroup at (t/2, t/2) and an asymmetric split, random x, z.
        for t1, t2 in ((0.5 * t, 0.5 * t), (0.75 * t, 0.25 * t)):
            if (
                model.truncation_bound(t1) > model.tol
                or model.truncation_bound(t2) > model.tol
            ):
                continue
            ix = int(rng.integers(0, n))
            iz = int(rng.integers(0, n))
            ce1 = np.exp(-model.lambdas * t1) * model.profiles[ix]
            ce2 = np.exp(-model.lambdas * t2) * model.profiles[iz]
            ce1[0] = 0.0
            ce2[0] = 0.0
            g1 = _section_values(model, ce1, az)
            g2 = _section_values(model, ce2, az)
            lhs = float(np.sum(np.exp(-model.lambdas * t) * model.profiles[ix] * model.profiles[iz])) - (
                math.exp(-model.lambdas[0] * t) * model.profiles[ix, 0] * model.profiles[iz, 0]
            )
            rhs = float(np.sum(w_man * g1 * g2))
            semi_dev = max(semi_dev, abs(lhs - rhs))
    return CenteredKernelReport(
        mean_zero_dev=mean_zero,
        l1_bound_max=l1_max,
        semigroup_dev=semi_dev,
        diagonal_min=diag_min,
        times=tuple(t_grid),
    )


# -- trace and bounds ---------------------------------------------------------------


def heat_trace(model: HeatKernelModel, t: float) -> float:
    """sum_{i>=1} e^{-lambda_i t}, the constant mode excluded."""
    model.require_valid_time(t)
    return float(np.sum(np.exp(-model.lambdas[1:] * t)))


def trace_upper_bound(c1: float, nu: float, v_phi: float, t: float) -> float:
    """4 (nu / (2 C1))^(nu/2) t^(-nu/2) V_phi."""
    return 4.0 * (nu / (2.0 * c1)) ** (nu / 2.0) * t ** (-nu / 2.0) * v_phi


@dataclass(frozen=True)
class TraceBoundReport:
    passed: bool
    worst_ratio: float
    pointwise_passed: bool
    pointwise_worst_ratio: float
    t_grid: tuple


def trace_bound_check(
    model: HeatKernelModel,
    c1: float,
    nu: float,
    t_grid,
    x_samples=None,
) -> TraceBoundReport:
    """trace(t) <= 4 (nu/(2 C1))^(nu/2) t^(-nu/2) V_phi on the grid, plus the
    pointwise version for the centered diagonal without the volume factor."""
    n = model.profiles.shape[0]
    if x_samples is None:
        x_samples = sorted(set([n // 7, n // 2, (5 * n) // 7]))
    worst = 0.0
    worst_pt = 0.0
    for t in t_grid:
        bound = trace_upper_bound(c1, nu, model.v_phi, t)
        worst = max(worst, heat_trace(model, t) / bound)
        pw_bound = bound / model.v_phi
        for ix in x_samples:
            worst_pt = max(worst_pt, centered_diagonal(model, ix, t) / pw_bound)
    return TraceBoundReport(
        passed=worst <= 1.0,
        worst_ratio=worst,
        pointwise_passed=worst_pt <= 1.0,
        pointwise_worst_ratio=worst_pt,
        t_grid=tuple(float(t) for t in t_grid),
    )


def trace_monotonicity_check(model: HeatKernelModel, t_grid) -> bool:
    """Nonincreasing and convex trace along the (increasing) grid."""
    values = np.array([heat_trace(model, t) for t in t_grid])
    nonincreasing = bool(np.all(np.diff(values) <= 1e-14))
    t = np.asarray(t_grid, dtype=float)
    slopes = np.diff(values) / np.diff(t)
    convex = bool(np.all(np.diff(slopes) >= -1e-12 * max(1.0, float(np.abs(slopes).max()))))
    return nonincreasing and convex


def differential_inequality_check(
    model: HeatKernelModel,
    c1: float,
    nu: float,
    t_samples,
    x_samples=None,
    rel_step: float = 1e-4,
) -> float:
    """Min slack of -d/dt G(x,x,t) >= 2^(-4/nu) C1 (int G(x,.,t/2)^2 e^-phi)^((2+nu)/nu).

    The time derivative is a centered difference with step rel_step * t.
    """
    n = model.profiles.shape[0]
    if x_samples is None:
        x_samples = sorted(set([n // 7, n // 2, (5 * n) // 7]))
    az = _azimuth_grid(model)
    w_man = _manifold_weights(model, az)
    worst = math.inf
    for t in t_samples:
        model.require_valid_time(0.5 * t)
        dt = rel_step * t
        for ix in x_samples:
            g_plus = centered_diagonal(model, ix, t + dt)
            g_minus = centered_diagonal(model, ix, t - dt)
            lhs = -(g_plus - g_minus) / (2 * dt)
            coeffs = np.exp(-model.lambdas * 0.5 * t) * model.profiles[ix]
            coeffs[0] = 0.0
            g_half = _section_values(model, coeffs, az)
            l2 = float(np.sum(w_man * g_half**2))
            rhs = 2.0 ** (-4.0 / nu) * c1 * l2 ** ((2.0 + nu) / nu)
            worst = min(worst, lhs - rhs)
    return worst


def eigenvalue_growth_bound(
    eigenvalues: np.ndarray,
    k: int,
    c1: float,
    nu: float,
    v_phi: float,
    tolerance: float = 0.0,
):
    """Lower bound on the k-th positive eigenvalue from the trace bound.

    Evaluating the trace bound at t = 1/lambda_k and keeping the first k
    terms (each at least 1/e) gives 4 (nu lambda_k / (2 C1))^(nu/2) V_phi
    >= k/e, i.e.

        lambda_k >= (c(nu) k / V_phi)^(2/nu) * C1,   c(nu) = (2/nu)^(nu/2) / (4 e).

    Returns (bound, satisfied, margin) against eigenvalues[k-1] of the
    positive spectrum.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    positive = lam[lam > 1e-9]
    if k < 1 or k > positive.size:
        raise DriftLabError(f"k={k} outside the resolved positive spectrum ({positive.size})")
    c_nu = (2.0 / nu) ** (nu / 2.0) / (4.0 * math.e)
    bound = (c_nu * k / v_phi) ** (2.0 / nu) * c1
    lam_k = float(positive[k - 1])
    return bound, lam_k >= bound - tolerance, lam_k - bound


def gaussian_envelope_diagnostic(
    model: HeatKernelModel,
    t_grid,
    eps: float = 0.5,
    n_pairs: int = 24,
    seed: int = 0,
) -> float:
    """Fitted envelope constant sup log H(x,y,t) + d(x,y)^2 / (4(1+eps)t).

    Purely diagnostic: reported, never asserted against any constant.
    """
    rng = np.random.default_rng(seed)
    n = model.profiles.shape[0]
    geom = model.geometry
    worst = -math.inf
    coords = geom.node_coords
    for t in t_grid:
        model.require_valid_time(t)
        for _ in range(n_pairs):
            ix, iy = int(rng.integers(0, n)), int(rng.integers(0, n))
            value = heat_kernel_eval(model, ix, iy, t)
            if value <= 0:
                continue
            dist = _model_distance(geom, coords[ix], coords[iy])
            worst = max(worst, math.log(value) + dist**2 / (4.0 * (1.0 + eps) * t))
    return worst


def _model_distance(geom: WeightedGeometry, x: float, y: float) -> float:
    from .geometry import Circle

    if isinstance(geom.topology, Circle):
        r = geom.topology.radius
        d = abs(x - y) % TWO_PI
        return r * min(d, TWO_PI - d)
    if isinstance(geom.topology, SphereSymmetric):
        return geom.topology.radius * abs(x - y)
    return abs(x - y)
