"""Lowest eigenpairs of symmetric generalized problems A v = lambda B v.

Dense LAPACK below dimension 2000, shift-invert ARPACK above it (the shift
sits strictly below the spectrum so the factored matrix is positive
definite), and a selected-range tridiagonal LAPACK path when many pairs of a
tridiagonal pencil are requested.  Starting vectors are seeded, so repeated
solves are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import SolveError
from .operators import SpectralProblem

DENSE_CUTOFF = 2000
DEFAULT_TOL = 1e-10


@dataclass
class Spectrum:
    """Ordered lowest eigenpairs of a spectral problem.

    eigenfunctions are B-orthonormal columns sampled on the problem nodes.
    discretization_estimate and extrapolated are populated by
    attach_richardson when a coarse companion solve is available.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    residual_norms: np.ndarray
    problem: SpectralProblem
    discretization_estimate: Optional[np.ndarray] = None
    extrapolated: Optional[np.ndarray] = None

    @property
    def k(self) -> int:
        return self.eigenvalues.size

    def estimate_for(self, index: int) -> float:
        if self.discretization_estimate is None:
            return 0.0
        return float(self.discretization_estimate[index])


def residual_floor(problem: SpectralProblem) -> float:
    """Double-precision floor of ||Av - lambda Bv|| / ||Bv||.

    The floor scales with the largest pencil eigenvalue; demanding less than
    eps * lambda_max of a second-order stiffness matrix is not achievable.
    """
    lam_max = float(np.max(problem.stiffness.diagonal() / problem.mass_diag))
    return 64.0 * np.finfo(float).eps * max(lam_max, 1.0)


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _residuals(problem, vals, vecs):
    Av = problem.stiffness @ vecs
    Bv = problem.mass_diag[:, None] * vecs
    num = np.linalg.norm(Av - vals[None, :] * Bv, axis=0)
    den = np.linalg.norm(Bv, axis=0)
    return num / den


def _is_tridiagonal(A: sparse.csr_matrix) -> bool:
    coo = A.tocoo()
    return bool(np.all(np.abs(coo.row - coo.col) <= 1))


def solve_lowest(
    problem: SpectralProblem,
    k: int,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    method: str = "auto",
) -> Spectrum:
    """Lowest k eigenpairs, B-orthonormal, ordered ascending.

    method: auto | dense | shift_invert | tridiagonal
    """
    n = problem.dim
    if k < 1:
        raise SolveError("k must be at least 1")
    if k > n - 2:
        raise SolveError(f"k={k} too large for problem dimension {n} (need k <= n-2)")

    if method == "auto":
        if n <= DENSE_CUTOFF:
            method = "dense"
        elif k > 40 and _is_tridiagonal(problem.stiffness):
            method = "tridiagonal"
        else:
            method = "shift_invert"

    if method == "dense":
        vals, vecs = sla.eigh(
            problem.stiffness.toarray(),
            np.diag(problem.mass_diag),
            subset_by_index=(0, k - 1),
        )
    elif method == "tridiagonal":
        if not _is_tridiagonal(problem.stiffness):
            raise SolveError("tridiagonal method requires a tridiagonal stiffness")
        scale = 1.0 / np.sqrt(problem.mass_diag)
        C = (sparse.diags(scale) @ problem.stiffness @ sparse.diags(scale)).tocsr()
        d = C.diagonal()
        e = C.diagonal(1)
        vals, w = sla.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
        vecs = scale[:, None] * w
    elif method == "shift_invert":
        sigma = -max(1e-8, 0.5 * problem.weyl_scale())
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        ncv = min(n - 1, max(2 * k + 20, 40))
        try:
            vals, vecs = eigsh(
                problem.stiffness,
                k=k,
                M=problem.mass,
                sigma=sigma,
                which="LM",
                v0=v0,
                ncv=ncv,
                maxiter=max(2000, 40 * k),
                tol=0,
            )
        except ArpackNoConvergence as exc:
            ritz = np.asarray(exc.eigenvalues)
            res = (
                _residuals(problem, ritz, np.asarray(exc.eigenvectors))
                if getattr(exc, "eigenvectors", None) is not None and len(ritz)
                else None
            )
            raise SolveError(
                f"eigensolver did not converge for k={k}, dim={n}",
                ritz_values=ritz,
                residuals=res,
            ) from exc
    else:
        raise SolveError(f"unknown method {method!r}")

    order = np.argsort(vals)
    vals = np.asarray(vals, dtype=float)[order]
    vecs = np.asarray(vecs, dtype=float)[:, order]
    # B-normalize explicitly; LAPACK and ARPACK both return B-orthonormal
    # vectors but renormalizing costs nothing and pins the convention.
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, problem.mass_diag[:, None] * vecs))
    vecs = vecs / norms
    vecs = _canonical_signs(vecs)
    res = _residuals(problem, vals, vecs)
    allowed = max(tol, residual_floor(problem))
    if float(res.max()) > 1e3 * allowed:
        raise SolveError(
            f"residuals {res.max():.3e} far above tolerance {allowed:.3e}",
            ritz_values=vals,
            residuals=res,
        )
    return Spectrum(
        eigenvalues=vals,
        eigenfunctions=vecs,
        residual_norms=res,
        problem=problem,
    )


def attach_richardson(fine: Spectrum, coarse: Spectrum, order: int = 2) -> Spectrum:
    """Per-pair Richardson error estimate from an h / 2h solve pair.

    estimate_j = |lambda_j(h) - lambda_j(2h)| / (2^order - 1) estimates the
    error of the fine eigenvalue; extrapolated removes the leading term.
    """
    k = min(fine.k, coarse.k)
    factor = 2.0**order - 1.0
    diff = fine.eigenvalues[:k] - coarse.eigenvalues[:k]
    est = np.abs(diff) / factor
    extrap = fine.eigenvalues[:k] + diff / factor
    return replace(
        fine,
        eigenvalues=fine.eigenvalues[:k],
        eigenfunctions=fine.eigenfunctions[:, :k],
        residual_norms=fine.residual_norms[:k],
        discretization_estimate=est,
        extrapolated=extrap,
    )


@dataclass(frozen=True)
class MergedEntry:
    value: float
    mode: int
    column: int
    sin_copy: bool
    estimate: float = 0.0


@dataclass
class MergedSpectrum:
    """Sphere spectrum merged across azimuthal modes.

    Modes m >= 1 appear twice (cosine and sine azimuthal factors); the sine
    copy shares the eigenvalue and carries no meridian profile.
    """

    entries: list
    spectra: dict

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    @property
    def estimates(self) -> np.ndarray:
        return np.array([e.estimate for e in self.entries])

    def profile(self, index: int) -> np.ndarray:
        entry = self.entries[index]
        spec = self.spectra[entry.mode]
        if entry.sin_copy:
            return np.zeros(spec.eigenfunctions.shape[0])
        return spec.eigenfunctions[:, entry.column]


def merge_mode_spectra(spectra: dict, k: Optional[int] = None) -> MergedSpectrum:
    """Merge per-azimuthal-mode spectra with multiplicity 2 for m >= 1."""
    entries = []
    for m, spec in sorted(spectra.items()):
        for col, lam in enumerate(spec.eigenvalues):
            est = spec.estimate_for(col) if spec.discretization_estimate is not None else 0.0
            entries.append(MergedEntry(float(lam), m, col, False, est))
            if m >= 1:
                entries.append(MergedEntry(float(lam), m, col, True, est))
    entries.sort(key=lambda e: (e.value, e.mode, e.column, e.sin_copy))
    if k is not None:
        entries = entries[:k]
    return MergedSpectrum(entries=entries, spectra=dict(spectra))


def first_eigenfunction_normalized(spec: Spectrum, gap_tol: float = 1e-9):
    """First nonconstant eigenfunction rescaled so max f = 1.

    Returns (f, beta) with beta = -min f in (0, 1].  The sign is fixed so
    that the extremum of larger magnitude is the maximum; on a tie the first
    grid value is made nonnegative.
    """
    lam = spec.eigenvalues
    idx = None
    for i in range(1, spec.k):
        if lam[i] > lam[0] + gap_tol:
            idx = i
            break
    if idx is None:
        raise SolveError("no nonconstant mode separated from the bottom eigenvalue")
    f = spec.eigenfunctions[:, idx].copy()
    fmax, fmin = float(f.max()), float(f.min())
    # Near-ties (symmetric modes) are resolved by the first grid value.
    if abs(fmin) > abs(fmax) * (1 + 1e-9):
        f = -f
    elif abs(fmin) >= abs(fmax) * (1 - 1e-9) and f[0] < 0:
        f = -f
    if f.max() <= 0:
        raise SolveError("sign convention failed: nonpositive maximum")
    f = f / f.max()
    beta = -float(f.min())
    return f, beta
