"""Model weighted manifolds: grids, weights, curvature, and volumes.

A weighted manifold here is a 1-D circle or interval, or the round 2-sphere
with a weight depending on colatitude only.  The measure is e^{-phi} dV.
Grids are uniform; the sphere grid is offset half a cell from the poles so
the sin(theta) density handles the coordinate singularity naturally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GeometryError

NEUMANN = "neumann"
DIRICHLET = "dirichlet"

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Circle:
    """Flat circle of given radius, coordinate theta in [0, 2*pi]."""

    radius: float


@dataclass(frozen=True)
class Interval:
    """Flat interval [a, b] with Neumann or Dirichlet ends."""

    a: float
    b: float
    bc: str = NEUMANN


@dataclass(frozen=True)
class SphereSymmetric:
    """Round 2-sphere of given radius, rotationally symmetric weight.

    The spectrum is assembled per azimuthal mode m = 0..azimuthal_mode_cap.
    """

    radius: float
    azimuthal_mode_cap: int


Topology = Circle | Interval | SphereSymmetric

PhiLike = Callable[[np.ndarray], np.ndarray] | np.ndarray | float | None


def _sample_phi(phi: PhiLike, coords: np.ndarray) -> np.ndarray:
    if phi is None:
        return np.zeros_like(coords)
    if callable(phi):
        vals = np.asarray(phi(coords), dtype=float)
        if vals.shape != coords.shape:
            vals = np.broadcast_to(vals, coords.shape).astype(float)
        return vals.copy()
    arr = np.asarray(phi, dtype=float)
    if arr.ndim == 0:
        return np.full_like(coords, float(arr))
    if arr.shape != coords.shape:
        raise GeometryError(
            f"phi samples have shape {arr.shape}, grid has shape {coords.shape}"
        )
    return arr.copy()


@dataclass(frozen=True)
class WeightedGeometry:
    """Discretized model weighted manifold.

    grid            strictly increasing coordinate samples; for Circle the
                    first and last samples identify the same point
    weight_phi      phi at the grid points
    metric_density  Riemannian volume density in the grid coordinate
    dimension_n     intrinsic dimension (1 for Circle/Interval, 2 for sphere)
    """

    topology: Topology
    grid: np.ndarray
    weight_phi: np.ndarray
    metric_density: np.ndarray
    dimension_n: int
    name: str = ""

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        phi = np.asarray(self.weight_phi, dtype=float)
        dens = np.asarray(self.metric_density, dtype=float)
        if grid.ndim != 1 or grid.size < 8:
            raise GeometryError("grid must be 1-D with at least 8 points")
        steps = np.diff(grid)
        if np.any(steps <= 0):
            raise GeometryError("grid must be strictly increasing")
        if steps.max() / steps.min() > 10.0 + 1e-12:
            raise GeometryError("grid spacing ratio exceeds 10 (not quasi-uniform)")
        if phi.shape != grid.shape or dens.shape != grid.shape:
            raise GeometryError("phi and metric_density must match the grid")
        if not np.all(np.isfinite(phi)):
            raise GeometryError("weight_phi must be finite at all grid points")
        if np.any(dens[1:-1] <= 0):
            raise GeometryError("metric_density must be positive on the interior")
        if isinstance(self.topology, Circle):
            scale = max(1.0, float(np.abs(phi).max()))
            if abs(phi[0] - phi[-1]) > 1e-10 * scale:
                raise GeometryError(
                    "phi is not periodic: endpoint mismatch "
                    f"{abs(phi[0] - phi[-1]):.3e}"
                )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weight_phi", phi)
        object.__setattr__(self, "metric_density", dens)

    # -- active nodes (distinct degrees of freedom) --------------------------

    @property
    def n_nodes(self) -> int:
        """Number of distinct nodes (the duplicate circle sample dropped)."""
        if isinstance(self.topology, Circle):
            return self.grid.size - 1
        return self.grid.size

    @property
    def node_coords(self) -> np.ndarray:
        if isinstance(self.topology, Circle):
            return self.grid[:-1]
        return self.grid

    @property
    def phi_nodes(self) -> np.ndarray:
        if isinstance(self.topology, Circle):
            return self.weight_phi[:-1]
        return self.weight_phi

    @property
    def density_nodes(self) -> np.ndarray:
        if isinstance(self.topology, Circle):
            return self.metric_density[:-1]
        return self.metric_density

    @property
    def spacing(self) -> float:
        return float(np.mean(np.diff(self.grid)))

    @property
    def cell_weights(self) -> np.ndarray:
        """Node cell lengths: trapezoid weights on endpoint grids, full cells
        on the circle (periodic) and the pole-offset sphere grid."""
        h = self.spacing
        n = self.n_nodes
        if isinstance(self.topology, Interval):
            w = np.full(n, h)
            w[0] = 0.5 * h
            w[-1] = 0.5 * h
            return w
        return np.full(n, h)

    @property
    def metric_gxx(self) -> float:
        """Coordinate metric coefficient g_xx (constant for the models)."""
        if isinstance(self.topology, Circle):
            return self.topology.radius**2
        if isinstance(self.topology, SphereSymmetric):
            return self.topology.radius**2
        return 1.0

    @property
    def is_closed(self) -> bool:
        return isinstance(self.topology, (Circle, SphereSymmetric))

    @property
    def has_constant_kernel(self) -> bool:
        """True when the constant function is in the operator kernel."""
        if isinstance(self.topology, Interval):
            return self.topology.bc == NEUMANN
        return True

    @property
    def diameter(self) -> float:
        """Analytic Riemannian diameter of the model (not a mesh distance)."""
        if isinstance(self.topology, Circle):
            return math.pi * self.topology.radius
        if isinstance(self.topology, SphereSymmetric):
            return math.pi * self.topology.radius
        return self.topology.b - self.topology.a

    @property
    def arclength_extent(self) -> float:
        """Total length of the 1-D parameter domain in the metric."""
        if isinstance(self.topology, Circle):
            return TWO_PI * self.topology.radius
        if isinstance(self.topology, SphereSymmetric):
            return math.pi * self.topology.radius
        return self.topology.b - self.topology.a

    def phi_oscillation(self) -> float:
        return float(self.weight_phi.max() - self.weight_phi.min())


# -- builders ----------------------------------------------------------------


def build_circle(radius: float, phi: PhiLike, n_points: int, name: str = "") -> WeightedGeometry:
    """Circle of the given radius with n_points distinct nodes.

    The stored grid carries the duplicate 2*pi sample so the periodic
    identification is explicit; phi must match at the endpoints.
    """
    if n_points < 8:
        raise GeometryError("n_points must be at least 8")
    if radius <= 0:
        raise GeometryError("radius must be positive")
    grid = np.linspace(0.0, TWO_PI, n_points + 1)
    phi_vals = _sample_phi(phi, grid)
    dens = np.full_like(grid, float(radius))
    return WeightedGeometry(
        topology=Circle(radius=float(radius)),
        grid=grid,
        weight_phi=phi_vals,
        metric_density=dens,
        dimension_n=1,
        name=name or f"circle_r{radius:g}",
    )


def build_interval(
    a: float,
    b: float,
    bc: str,
    phi: PhiLike,
    n_points: int,
    name: str = "",
) -> WeightedGeometry:
    """Interval [a, b] with the given boundary condition."""
    if not a < b:
        raise GeometryError(f"interval requires a < b, got a={a}, b={b}")
    if n_points < 8:
        raise GeometryError("n_points must be at least 8")
    if bc not in (NEUMANN, DIRICHLET):
        raise GeometryError(f"unknown boundary condition {bc!r}")
    grid = np.linspace(float(a), float(b), n_points)
    phi_vals = _sample_phi(phi, grid)
    dens = np.ones_like(grid)
    return WeightedGeometry(
        topology=Interval(a=float(a), b=float(b), bc=bc),
        grid=grid,
        weight_phi=phi_vals,
        metric_density=dens,
        dimension_n=1,
        name=name or f"interval_{a:g}_{b:g}_{bc}",
    )


def build_sphere_symmetric(
    radius: float,
    phi: PhiLike,
    n_points: int,
    azimuthal_mode_cap: int,
    name: str = "",
) -> WeightedGeometry:
    """Round 2-sphere with a colatitude-only weight.

    The grid offsets half a cell from the poles; the sin(theta) density
    degenerates there and regularizes the coordinate singularity.
    """
    if azimuthal_mode_cap < 0:
        raise GeometryError("azimuthal_mode_cap must be nonnegative")
    if n_points < 8:
        raise GeometryError("n_points must be at least 8")
    if radius <= 0:
        raise GeometryError("radius must be positive")
    h = math.pi / n_points
    grid = (np.arange(n_points) + 0.5) * h
    phi_vals = _sample_phi(phi, grid)
    dens = radius**2 * np.sin(grid)
    return WeightedGeometry(
        topology=SphereSymmetric(radius=float(radius), azimuthal_mode_cap=int(azimuthal_mode_cap)),
        grid=grid,
        weight_phi=phi_vals,
        metric_density=dens,
        dimension_n=2,
        name=name or f"sphere_r{radius:g}",
    )


# -- quadrature and volumes ---------------------------------------------------


def weighted_volume(geom: WeightedGeometry) -> float:
    """integral of e^{-phi} dV by the cell quadrature rule of the grid.

    For the sphere this includes the 2*pi azimuthal factor.
    """
    w = geom.cell_weights * geom.density_nodes * np.exp(-geom.phi_nodes)
    total = float(w.sum())
    if isinstance(geom.topology, SphereSymmetric):
        total *= TWO_PI
    if total <= 0:
        raise GeometryError("weighted volume must be positive")
    return total


def weighted_cell_measure(geom: WeightedGeometry) -> np.ndarray:
    """Per-node quadrature weights of the measure e^{-phi} dV (no azimuth)."""
    return geom.cell_weights * geom.density_nodes * np.exp(-geom.phi_nodes)


# -- derivatives of phi -------------------------------------------------------


def phi_derivatives(geom: WeightedGeometry, noise_threshold: float = 0.5):
    """Second-order finite-difference phi' and phi'' at the nodes.

    Centered stencils inside, one-sided second-order stencils at interval
    ends; periodic wrap on the circle.  Raises when the coarse/fine second
    difference disagreement suggests the grid does not resolve phi.
    """
    phi = geom.phi_nodes
    h = geom.spacing
    periodic = isinstance(geom.topology, Circle)
    d1 = _deriv1(phi, h, periodic)
    d2 = _deriv2(phi, h, periodic)
    _check_resolved(phi, h, periodic, d2, noise_threshold)
    return d1, d2


def _deriv1(f: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    n = f.size
    out = np.empty(n)
    if periodic:
        out[:] = (np.roll(f, -1) - np.roll(f, 1)) / (2 * h)
        return out
    out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return out


def _deriv2(f: np.ndarray, h: float, periodic: bool) -> np.ndarray:
    n = f.size
    out = np.empty(n)
    if periodic:
        out[:] = (np.roll(f, -1) - 2 * f + np.roll(f, 1)) / h**2
        return out
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
    return out


def _check_resolved(f, h, periodic, d2_fine, threshold):
    # Compare the h and 2h second differences in the L2 norm; smooth phi
    # gives an O(h^2) ratio, noisy or cusped phi an O(1) one.
    n = f.size
    if n < 9:
        return
    if periodic:
        d2_coarse = (np.roll(f, -2) - 2 * f + np.roll(f, 2)) / (2 * h) ** 2
        mism = d2_coarse - d2_fine
        ref = d2_fine
    else:
        d2_coarse = (f[4:] - 2 * f[2:-2] + f[:-4]) / (2 * h) ** 2
        mism = d2_coarse - d2_fine[2:-2]
        ref = d2_fine[2:-2]
    ratio = float(np.linalg.norm(mism)) / (1.0 + float(np.linalg.norm(ref)))
    if ratio > threshold:
        raise GeometryError(
            "grid too coarse to resolve phi: second-difference noise ratio "
            f"{ratio:.3g} exceeds threshold {threshold:g}"
        )


# -- curvature ----------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureSummary:
    """Pointwise-infimum curvature data of the weighted manifold.

    ric_phi_inf is the infimum over the grid of the smallest eigenvalue of
    Ric + Hess(phi); ric_q_inf(q) subtracts the rank-one gradient term
    (1/q) dphi x dphi from the matching component before taking the infimum.
    """

    ric_phi_inf: float
    diameter_d: float
    weighted_volume_V_phi: float
    _radial_component: np.ndarray = field(repr=False)
    _other_component: np.ndarray = field(repr=False)
    _grad_sq: np.ndarray = field(repr=False)

    def ric_q_inf(self, q: float) -> float:
        if q <= 0:
            raise GeometryError("q must be positive")
        radial = self._radial_component - self._grad_sq / q
        return float(min(radial.min(), self._other_component.min()))


def curvature_summary(geom: WeightedGeometry, q: float = 1.0) -> CurvatureSummary:
    """Curvature summary from finite differences of phi.

    Circle/Interval carry zero Ricci curvature, so Ric_phi is the second
    arclength derivative of phi.  On the sphere the two diagonal components
    are 1/r^2 + phi''/r^2 and 1/r^2 + cot(theta) phi'/r^2, and the gradient
    term lives in the radial (colatitude) component.
    """
    d1, d2 = phi_derivatives(geom)
    gxx = geom.metric_gxx
    if isinstance(geom.topology, SphereSymmetric):
        r2 = geom.topology.radius**2
        theta = geom.node_coords
        radial = 1.0 / r2 + d2 / r2
        other = 1.0 / r2 + (np.cos(theta) / np.sin(theta)) * d1 / r2
    else:
        radial = d2 / gxx
        other = radial
    grad_sq = d1**2 / gxx
    summary = CurvatureSummary(
        ric_phi_inf=float(min(radial.min(), other.min())),
        diameter_d=geom.diameter,
        weighted_volume_V_phi=weighted_volume(geom),
        _radial_component=radial,
        _other_component=other,
        _grad_sq=grad_sq,
    )
    # The rank-one term is nonnegative, so the q-modified infimum can only drop.
    assert summary.ric_q_inf(q) <= summary.ric_phi_inf + 1e-12
    return summary


# -- volume-form comparison ---------------------------------------------------


@dataclass(frozen=True)
class VolumeComparisonReport:
    passed: bool
    worst_margin: float
    n_samples: int
    truncated: bool
    a: float
    A_R: float
    R: float


def _phi_interp(geom: WeightedGeometry):
    x = geom.grid
    phi = geom.weight_phi
    if isinstance(geom.topology, Circle):
        def f(t):
            return np.interp(np.mod(t, TWO_PI), x, phi)
    else:
        def f(t):
            return np.interp(np.clip(t, x[0], x[-1]), x, phi)
    return f


def verify_volume_comparison(
    geom: WeightedGeometry,
    R: float,
    a: float,
    A_R: float,
    n_base: int = 8,
    n_dir: int = 4,
    n_radii: int = 12,
    tol: float = 1e-12,
    basepoints=None,
    directions=None,
) -> VolumeComparisonReport:
    """Check the geodesic volume-density ratio bound (r2/r1)^a e^{A_R}.

    The weighted density along a unit-speed geodesic from x is
    J_phi(x, r, xi) = e^{-phi(exp_x(r xi))} J(x, r, xi) with J = 1 on the
    flat models and J(r) = radius * sin(r/radius) on the sphere.  Radius
    pairs r1 < r2 < R are truncated at the injectivity radius (or the
    boundary) with a truncation flag in the report.  The worst margin is
    reported in log space: min over samples of log(bound) - log(ratio).

    basepoints/directions restrict the sampled grid (defaults cover the
    whole model; directions are +-1 in 1-D, azimuth angles on the sphere).
    """
    if R <= 0:
        raise GeometryError("R must be positive")
    phi_at = _phi_interp(geom)
    top = geom.topology
    truncated = False
    margins = []
    n_samp = 0

    def check_profile(r_grid: np.ndarray, log_jphi: np.ndarray):
        nonlocal n_samp
        # All pairs r1 < r2 on the sampled profile.
        for i in range(len(r_grid) - 1):
            r1 = r_grid[i]
            lj1 = log_jphi[i]
            r2 = r_grid[i + 1 :]
            lj2 = log_jphi[i + 1 :]
            log_ratio = lj2 - lj1
            log_bound = a * (np.log(r2) - np.log(r1)) + A_R
            margins.append(float((log_bound - log_ratio).min()))
            n_samp += len(r2)

    if isinstance(top, Circle):
        inj = math.pi * top.radius
        r_max = min(R, inj * (1 - 1e-9))
        truncated = R > inj
        bases = basepoints if basepoints is not None else np.linspace(0.0, TWO_PI, n_base, endpoint=False)
        dirs = directions if directions is not None else (+1.0, -1.0)
        r_grid = np.linspace(r_max / n_radii, r_max, n_radii)
        for x0 in bases:
            for direction in dirs:
                pts = x0 + direction * r_grid / top.radius
                log_jphi = -phi_at(pts)
                check_profile(r_grid, log_jphi)
    elif isinstance(top, Interval):
        bases = basepoints if basepoints is not None else np.linspace(top.a, top.b, n_base)
        dirs = directions if directions is not None else (+1.0, -1.0)
        for x0 in bases:
            for direction in dirs:
                reach = (top.b - x0) if direction > 0 else (x0 - top.a)
                r_max = min(R, reach)
                if R > reach:
                    truncated = True
                if r_max <= 0:
                    continue
                r_grid = np.linspace(r_max / n_radii, r_max, n_radii)
                pts = x0 + direction * r_grid
                log_jphi = -phi_at(pts)
                check_profile(r_grid, log_jphi)
    else:
        rad = top.radius
        inj = math.pi * rad
        r_max = min(R, inj * (1 - 1e-6))
        truncated = R > inj
        bases = basepoints if basepoints is not None else np.linspace(
            math.pi / (n_base + 1), math.pi * n_base / (n_base + 1), n_base
        )
        azimuths = directions if directions is not None else np.linspace(0.0, math.pi, n_dir)
        r_grid = np.linspace(r_max / n_radii, r_max, n_radii)
        for th0 in bases:
            for alpha in azimuths:
                # Colatitude along the geodesic by the spherical law of cosines.
                c = np.cos(th0) * np.cos(r_grid / rad) + np.sin(th0) * np.sin(
                    r_grid / rad
                ) * np.cos(alpha)
                theta_r = np.arccos(np.clip(c, -1.0, 1.0))
                log_j = np.log(rad * np.sin(r_grid / rad))
                log_jphi = -phi_at(theta_r) + log_j
                check_profile(r_grid, log_jphi)

    worst = float(min(margins)) if margins else math.inf
    return VolumeComparisonReport(
        passed=worst >= -tol,
        worst_margin=worst,
        n_samples=n_samp,
        truncated=truncated,
        a=a,
        A_R=A_R,
        R=R,
    )


# -- named weight functions ----------------------------------------------------


def builtin_phi(name: str, **params) -> Callable[[np.ndarray], np.ndarray]:
    """Named weight builders used by experiment configs.

    zero            phi = 0
    cos             amplitude * cos(frequency * x)
    quadratic       0.5 * amplitude * (x - center)^2
    gaussian-well   -depth * exp(-(x - center)^2 / (2 width^2))
    """
    known = {"zero", "cos", "quadratic", "gaussian-well"}
    if name not in known:
        raise GeometryError(f"unknown builtin phi {name!r}; known: {sorted(known)}")
    if name == "zero":
        _require_params(name, params, set())
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if name == "cos":
        _require_params(name, params, {"amplitude"}, {"frequency"})
        amp = float(params["amplitude"])
        freq = float(params.get("frequency", 1.0))
        return lambda x: amp * np.cos(freq * np.asarray(x, dtype=float))
    if name == "quadratic":
        _require_params(name, params, {"amplitude"}, {"center"})
        amp = float(params["amplitude"])
        center = float(params.get("center", 0.0))
        return lambda x: 0.5 * amp * (np.asarray(x, dtype=float) - center) ** 2
    _require_params(name, params, {"depth", "width"}, {"center"})
    depth = float(params["depth"])
    width = float(params["width"])
    center = float(params.get("center", 0.0))
    if width <= 0:
        raise GeometryError("gaussian-well width must be positive")
    return lambda x: -depth * np.exp(-((np.asarray(x, dtype=float) - center) ** 2) / (2 * width**2))


def _require_params(name, params, required, optional=frozenset()):
    keys = set(params)
    missing = required - keys
    unknown = keys - required - set(optional)
    if missing:
        raise GeometryError(f"builtin phi {name!r} missing parameters {sorted(missing)}")
    if unknown:
        raise GeometryError(f"builtin phi {name!r} got unknown parameters {sorted(unknown)}")


def phi_from_table(coords: Sequence[float], values: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """Weight from a sampled (coordinate, phi) table, linearly interpolated."""
    xs = np.asarray(coords, dtype=float)
    ys = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise GeometryError("phi table needs two equal-length columns with >= 2 rows")
    if np.any(np.diff(xs) <= 0):
        raise GeometryError("phi table coordinates must be strictly increasing")
    return lambda x: np.interp(np.asarray(x, dtype=float), xs, ys)
