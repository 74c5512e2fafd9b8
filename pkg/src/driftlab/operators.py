"""Discrete self-adjoint operators on weighted geometries.

The drift Laplacian is assembled in flux (finite-volume) form: the stiffness
matrix is a sum of rank-one edge terms with weights e^{-(phi_i+phi_j)/2}, so
symmetry and the discrete integration by parts hold exactly, and the constant
vector is in the kernel of every closed/Neumann stiffness matrix by
construction.  The unitarily equivalent Schrodinger operator is assembled on
the same grid with the unweighted measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import AssemblyError, GeometryError
from .geometry import (
    TWO_PI,
    Circle,
    DIRICHLET,
    Interval,
    SphereSymmetric,
    WeightedGeometry,
    phi_derivatives,
)

DRIFT_LAPLACIAN = "drift_laplacian"
SCHRODINGER = "schrodinger"
COLLAPSE_NEUMANN = "collapse_neumann"

POTENTIAL_COMPATIBLE = "compatible"
POTENTIAL_CENTERED = "centered"


@dataclass
class SpectralProblem:
    """Symmetric generalized eigenproblem A v = lambda B v.

    stiffness   quadratic form of the operator (CSR, symmetric PSD)
    mass        diagonal weighted mass matrix (inner product of the measure)
    label       drift_laplacian | schrodinger | collapse_neumann
    mode        azimuthal index for sphere problems, None otherwise
    nodes       coordinates of the degrees of freedom
    """

    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    label: str
    geometry: Optional[WeightedGeometry]
    geometry_ref: str
    nodes: np.ndarray
    mass_diag: np.ndarray
    mode: Optional[int] = None
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.stiffness.shape[0]

    def stiffness_form(self, u: np.ndarray) -> np.ndarray:
        """u^T A u, column-wise for 2-D input."""
        Au = self.stiffness @ u
        return np.einsum("i...,i...->...", u, Au)

    def mass_form(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("i...,i...->...", u, self.mass_diag[:, None] * u if u.ndim == 2 else self.mass_diag * u)

    def weyl_scale(self) -> float:
        """Coarse scale of the first nonzero eigenvalue, used for shifts."""
        return self.meta.get("weyl_scale", 1.0)


def _edge_structure(geom: WeightedGeometry):
    """Edges, geometric edge coefficients, and node weights for the grid.

    Returns (i, j, c_edge, q_node, cells) where the stiffness kinetic part is
    sum_e c_e * w_e * (u_i - u_j)^2 with w_e the weight factor, and the mass
    is q * e^{-phi}.  Azimuthal factors are NOT included here.
    """
    x = geom.node_coords
    n = x.size
    h = geom.spacing
    gxx = geom.metric_gxx
    top = geom.topology
    if isinstance(top, Circle):
        i = np.arange(n)
        j = (i + 1) % n
        rho_mid = np.full(n, top.radius)
        c = rho_mid / gxx / h
    elif isinstance(top, Interval):
        i = np.arange(n - 1)
        j = i + 1
        c = np.full(n - 1, 1.0 / h)
    else:
        i = np.arange(n - 1)
        j = i + 1
        theta_mid = 0.5 * (x[:-1] + x[1:])
        rho_mid = top.radius**2 * np.sin(theta_mid)
        c = rho_mid / gxx / h
    q = geom.cell_weights * geom.density_nodes
    return i, j, c, q


def _azimuth_factor(geom: WeightedGeometry, mode: Optional[int]) -> float:
    if isinstance(geom.topology, SphereSymmetric):
        return TWO_PI if mode == 0 else math.pi
    return 1.0


def _mode_potential_geo(geom: WeightedGeometry, mode: int) -> np.ndarray:
    """Geometric part of the azimuthal potential m^2 / sin(theta)^2 dV."""
    theta = geom.node_coords
    return mode**2 * geom.cell_weights / np.sin(theta)


def _assemble_edges(n, i, j, w):
    data = np.concatenate([w, w, -w, -w])
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    return sparse.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def _apply_dirichlet(A, B, nodes, mass_diag):
    A = A[1:-1, :][:, 1:-1]
    B = B[1:-1, :][:, 1:-1]
    return A, B, nodes[1:-1], mass_diag[1:-1]


def _check_mass(geom, weights):
    if np.any(weights == 0.0) or not np.all(np.isfinite(weights)):
        bad = int(np.argmin(np.where(np.isfinite(weights), weights, 0.0)))
        raise AssemblyError(
            f"degenerate mass entry at grid point {bad} "
            f"(coordinate {geom.node_coords[bad]:.6g}); e^-phi underflowed"
        )


def _base_meta(geom: WeightedGeometry) -> dict:
    return {"weyl_scale": (math.pi / geom.arclength_extent) ** 2}


def assemble_drift_laplacian(geom: WeightedGeometry, mode: Optional[int] = None):
    """Drift Laplacian as a (stiffness, weighted mass) pair.

    For SphereSymmetric without an explicit mode this returns one problem per
    azimuthal mode 0..cap, each including the m^2/sin^2(theta) potential and
    the azimuthal normalization factor (2*pi for m=0, pi for m>=1).
    Dirichlet intervals eliminate the boundary rows and columns.
    """
    if isinstance(geom.topology, SphereSymmetric) and mode is None:
        return [
            assemble_drift_laplacian(geom, mode=m)
            for m in range(geom.topology.azimuthal_mode_cap + 1)
        ]
    i, j, c, q = _edge_structure(geom)
    n = geom.n_nodes
    phi = geom.phi_nodes
    af = _azimuth_factor(geom, mode)
    ephi = np.exp(-phi)
    _check_mass(geom, ephi)
    w_edge = af * c * np.exp(-0.5 * (phi[i] + phi[j]))
    A = _assemble_edges(n, i, j, w_edge)
    if isinstance(geom.topology, SphereSymmetric) and mode:
        A = A + sparse.diags(af * _mode_potential_geo(geom, mode) * ephi).tocsr()
    mass_diag = af * q * ephi
    B = sparse.diags(mass_diag).tocsr()
    nodes = geom.node_coords
    if isinstance(geom.topology, Interval) and geom.topology.bc == DIRICHLET:
        A, B, nodes, mass_diag = _apply_dirichlet(A, B, nodes, mass_diag)
    return SpectralProblem(
        stiffness=A,
        mass=B,
        label=DRIFT_LAPLACIAN,
        geometry=geom,
        geometry_ref=geom.name,
        nodes=nodes,
        mass_diag=mass_diag,
        mode=mode,
        meta=_base_meta(geom),
    )


def assemble_schrodinger(
    geom: WeightedGeometry,
    mode: Optional[int] = None,
    potential: str = POTENTIAL_COMPATIBLE,
):
    """Schrodinger operator unitarily equivalent to the drift Laplacian.

    Unweighted kinetic form plus the potential (|grad phi|^2)/4 + (1/2) times
    the geometer's Laplacian of phi, with the unweighted mass.

    potential="compatible" evaluates the potential through the exact discrete
    ground-state transform of the flux-form drift stiffness: each node i
    receives sum over incident edges of c_e (e^{(phi_i-phi_j)/2} - 1).  This
    makes the congruence by diag(e^{phi/2}) exact, so the two assemblies are
    isospectral to rounding; the expression is a second-order discretization
    of the potential.

    potential="centered" uses the textbook stencils instead (flux Laplacian
    of phi, centered squared gradient); it differs from the compatible one by
    an O(h^2) effective-potential commutator, which is what
    discrete_conjugation_check measures.
    """
    if potential not in (POTENTIAL_COMPATIBLE, POTENTIAL_CENTERED):
        raise AssemblyError(f"unknown potential discretization {potential!r}")
    if isinstance(geom.topology, SphereSymmetric) and mode is None:
        return [
            assemble_schrodinger(geom, mode=m, potential=potential)
            for m in range(geom.topology.azimuthal_mode_cap + 1)
        ]
    i, j, c, q = _edge_structure(geom)
    n = geom.n_nodes
    phi = geom.phi_nodes
    af = _azimuth_factor(geom, mode)
    A = _assemble_edges(n, i, j, af * c)
    if isinstance(geom.topology, SphereSymmetric) and mode:
        A = A + sparse.diags(af * _mode_potential_geo(geom, mode)).tocsr()
    q_full = af * q

    if potential == POTENTIAL_COMPATIBLE:
        W = np.zeros(n)
        np.add.at(W, i, af * c * (np.exp(0.5 * (phi[i] - phi[j])) - 1.0))
        np.add.at(W, j, af * c * (np.exp(0.5 * (phi[j] - phi[i])) - 1.0))
    else:
        d1, _ = phi_derivatives(geom)
        grad_sq = d1**2 / geom.metric_gxx
        # Geometer's Laplacian of phi through the unweighted flux stencil.
        kin = _assemble_edges(n, i, j, c)
        lap_geo = (kin @ phi) / q
        W = q_full * (0.25 * grad_sq + 0.5 * lap_geo)

    A = A + sparse.diags(W).tocsr()
    mass_diag = q_full.copy()
    B = sparse.diags(mass_diag).tocsr()
    nodes = geom.node_coords
    if isinstance(geom.topology, Interval) and geom.topology.bc == DIRICHLET:
        A, B, nodes, mass_diag = _apply_dirichlet(A, B, nodes, mass_diag)
    return SpectralProblem(
        stiffness=A,
        mass=B,
        label=SCHRODINGER,
        geometry=geom,
        geometry_ref=geom.name,
        nodes=nodes,
        mass_diag=mass_diag,
        mode=mode,
        meta={**_base_meta(geom), "potential": potential},
    )


def discrete_conjugation_check(p_drift: SpectralProblem, p_schrod: SpectralProblem) -> float:
    """Deviation of the ground-state transform from the Schrodinger assembly.

    Congruence of the drift pair by E = diag(e^{phi/2}) maps the weighted
    mass to the unweighted one and the stiffness to kinetic-plus-potential.
    The returned deviation is the largest entry of E A_d E - A_s scaled to
    potential units (divided by the node mass weight), interior rows only on
    intervals since the transform turns the natural boundary condition into
    a Robin one.  Second-order decay under refinement is the discrete
    statement of the unitary equivalence for an independent potential
    discretization; the compatible assembly gives rounding-level deviation.
    """
    if p_drift.geometry is not p_schrod.geometry and not np.array_equal(
        p_drift.nodes, p_schrod.nodes
    ):
        raise AssemblyError("conjugation check requires matching grids")
    if p_drift.mode != p_schrod.mode:
        raise AssemblyError("conjugation check requires matching azimuthal modes")
    geom = p_drift.geometry
    phi = geom.phi_nodes if geom is not None else np.zeros(p_drift.dim)
    if p_drift.dim != phi.size:
        # Dirichlet problems dropped the boundary entries.
        phi = phi[1:-1]
    E = sparse.diags(np.exp(0.5 * phi))
    A_t = (E @ p_drift.stiffness @ E).tocsr()
    B_t = (E @ p_drift.mass @ E).tocsr()
    D_a = (A_t - p_schrod.stiffness).tocoo()
    q = p_schrod.mass_diag
    interior = np.ones(p_drift.dim, dtype=bool)
    if geom is not None and isinstance(geom.topology, Interval):
        interior[0] = interior[-1] = False
    dev = 0.0
    for r, col, v in zip(D_a.row, D_a.col, D_a.data):
        if interior[r] and interior[col]:
            dev = max(dev, abs(v) / math.sqrt(q[r] * q[col]))
    mass_dev = np.abs(B_t.diagonal() - q) / q
    dev = max(dev, float(mass_dev[interior].max()))
    return dev


def bochner_residual(geom: WeightedGeometry, u: np.ndarray) -> float:
    """Worst-case residual of the weighted Bochner identity in 1-D.

    Both sides are evaluated with centered second-order differences with
    respect to arclength; in 1-D the Hessian-squared term is (u'')^2 and the
    curvature term is phi'' (u')^2.  Interval points closer than 4 cells to
    a boundary are excluded.
    """
    if isinstance(geom.topology, SphereSymmetric):
        raise GeometryError("Bochner residual check is restricted to 1-D geometries")
    u = np.asarray(u, dtype=float)
    if u.shape != geom.node_coords.shape:
        raise GeometryError("u must be sampled at the geometry nodes")
    if geom.n_nodes < 64:
        raise GeometryError("Bochner check needs at least 64 grid points")
    h = geom.spacing
    periodic = isinstance(geom.topology, Circle)
    scale = 1.0 / math.sqrt(geom.metric_gxx)
    phi = geom.phi_nodes

    def d1(f):
        if periodic:
            return (np.roll(f, -1) - np.roll(f, 1)) / (2 * h) * scale
        out = np.full_like(f, np.nan)
        out[1:-1] = (f[2:] - f[:-2]) / (2 * h) * scale
        return out

    def d2(f):
        if periodic:
            return (np.roll(f, -1) - 2 * f + np.roll(f, 1)) / h**2 * scale**2
        out = np.full_like(f, np.nan)
        out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2 * scale**2
        return out

    u1 = d1(u)
    u2 = d2(u)
    p1 = d1(phi)
    p2 = d2(phi)
    drift_u = u2 - p1 * u1
    grad_sq = u1**2
    lhs = d2(grad_sq) - p1 * d1(grad_sq)
    rhs = 2 * u2**2 + 2 * u1 * d1(drift_u) + 2 * p2 * grad_sq
    res = np.abs(lhs - rhs)
    if not periodic:
        res = res[4:-4]
    res = res[np.isfinite(res)]
    return float(res.max())


def export_matrix_coo(matrix: sparse.spmatrix, path) -> None:
    """Debug dump: one 'row col value' line per stored entry."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
