"""Numerical Sobolev constants and the gradient interpolation inequality.

The weighted Sobolev inequality with exponent nu > 2 and shift alpha reads

    (int |u|^(2nu/(nu-2)) e^-phi)^((nu-2)/nu)
        <= C_o V_phi^(-2/nu) int (|grad u|^2 + alpha u^2) e^-phi.

`estimate_sobolev_constant` maximizes the corresponding ratio over a random
battery of smooth candidates followed by a normalized fixed-point ascent on
the extremal condition, and certifies the battery with a 25% inflated
constant.  `c1_constant` forms the downstream interpolation constant
C1 = lambda_1 / (C_o (lambda_1 + alpha)) V_phi^(2/nu), and
`gradient_interpolation_check` reproduces the full inequality chain
(Sobolev step, spectral-gap step, Hoelder step) on weighted-mean-zero
batteries, logging the worst margin of every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import factorized

from .eigensolve import Spectrum
from .errors import DriftLabError
from .operators import SpectralProblem

DEFAULT_SAFETY = 0.25


@dataclass
class SobolevEstimate:
    """Certified-on-battery Sobolev constant estimate.

    c_o_estimate is (1 + safety) times the best ratio seen, so every battery
    member satisfies the inequality with it by construction.  c1_value is
    computed exactly from the stored inputs.
    """

    nu: float
    alpha: float
    c_o_estimate: float
    extremal_function: np.ndarray
    battery_size: int
    max_ratio: float
    safety: float
    lambda1: float
    v_phi: float
    ascent_iterations: int
    warnings: list = field(default_factory=list)

    @property
    def c1_value(self) -> float:
        return c1_constant(self, self.lambda1, self.v_phi)


def c1_constant(est: SobolevEstimate, lambda1: float, v_phi: float) -> float:
    """Interpolation constant lambda1/(C_o (lambda1 + alpha)) V_phi^(2/nu)."""
    if lambda1 <= 0:
        raise DriftLabError("lambda1 must be positive")
    return lambda1 / (est.c_o_estimate * (lambda1 + est.alpha)) * v_phi ** (2.0 / est.nu)


def _integrals(problem: SpectralProblem):
    w = problem.mass_diag
    v_phi = float(w.sum())
    return w, v_phi


def rayleigh_ratio(problem: SpectralProblem, U: np.ndarray, nu: float, alpha: float) -> np.ndarray:
    """Sobolev quotient per column of U; scale invariant by homogeneity."""
    w, v_phi = _integrals(problem)
    p = 2.0 * nu / (nu - 2.0)
    num = (w @ np.abs(U) ** p) ** ((nu - 2.0) / nu) * v_phi ** (2.0 / nu)
    den = problem.stiffness_form(U) + alpha * (w @ U**2)
    return num / den


def _battery(
    problem: SpectralProblem,
    spectrum: Spectrum,
    size: int,
    seed: int,
    include_constants: bool,
    mean_zero: bool,
    deterministic_bumps: bool = False,
):
    """Random smooth candidates: low-mode combinations plus coordinate bumps.

    With deterministic_bumps a seed-independent sweep of bump centers and
    widths is prepended, which pins the ascent starting basin across seeds.
    """
    rng = np.random.default_rng(seed)
    n = problem.dim
    w, v_phi = _integrals(problem)
    x = problem.nodes
    lo, hi = float(x.min()), float(x.max())
    cols = []
    if deterministic_bumps:
        for center in np.linspace(lo, hi, 17):
            for rel_width in (0.05, 0.1, 0.2, 0.3):
                width = rel_width * (hi - lo)
                cols.append(np.exp(-((x - center) ** 2) / (2 * width**2)))
    modes = spectrum.eigenfunctions[:, : min(spectrum.k, 10)]
    n_combo = size - size // 3
    for _ in range(n_combo):
        start = 0 if (include_constants and not mean_zero) else 1
        c = rng.standard_normal(modes.shape[1] - start)
        cols.append(modes[:, start:] @ c)
    while len(cols) < size + (68 if deterministic_bumps else 0):
        center = rng.uniform(lo, hi)
        width = rng.uniform(0.05, 0.3) * (hi - lo)
        cols.append(np.exp(-((x - center) ** 2) / (2 * width**2)))
    U = np.column_stack(cols)
    if mean_zero:
        U = U - np.outer(np.ones(n), (w @ U) / v_phi)
    norms = np.sqrt(w @ U**2)
    norms[norms == 0] = 1.0
    return U / norms


def _deflated_solver(problem: SpectralProblem, alpha: float):
    """Factorized solve of (A + alpha B); at alpha = 0 with constants in the
    kernel, solve on the complement by grounding one node and projecting."""
    A = problem.stiffness
    B = problem.mass
    if alpha > 1e-14:
        return factorized((A + alpha * B).tocsc()), False
    w = problem.mass_diag
    v_phi = w.sum()
    ones = np.ones(problem.dim)
    solve_red = factorized(A[1:, :][:, 1:].tocsc())

    def solve(rhs):
        # Compatibility: project rhs onto the range of A (1-sum zero).
        r = rhs - w * (ones @ rhs) / v_phi
        x = np.zeros_like(r)
        x[1:] = solve_red(r[1:])
        return x

    return solve, True


def estimate_sobolev_constant(
    problem: SpectralProblem,
    spectrum: Spectrum,
    nu: float = 4.0,
    alpha: Optional[float] = None,
    battery_size: int = 200,
    seed: int = 0,
    safety: float = DEFAULT_SAFETY,
    ascent_iters: int = 100,
    ascent_tol: float = 1e-8,
) -> SobolevEstimate:
    """Battery-plus-ascent maximization of the Sobolev quotient.

    alpha defaults to the first positive eigenvalue, which keeps the
    inequality nontrivial for constants.  When alpha = 0 on a geometry whose
    operator kernel contains constants, constants make the quotient blow up;
    they are excluded from the battery and a warning is attached.

    The ascent repeatedly solves (A + alpha B) u = B |u|^((nu+2)/(nu-2)) sgn u
    and stops when the quotient improves by less than ascent_tol (relative)
    or after ascent_iters iterations.
    """
    if nu <= 2:
        raise DriftLabError("nu must exceed 2")
    lam = spectrum.eigenvalues
    positive = lam[lam > 1e-9]
    if positive.size == 0:
        raise DriftLabError("spectrum has no positive eigenvalue for alpha/lambda1")
    lambda1 = float(positive[0])
    if alpha is None:
        alpha = lambda1
    if alpha < 0:
        raise DriftLabError("alpha must be nonnegative")

    warnings = []
    include_constants = alpha > 1e-14
    if not include_constants and problem.geometry is not None and problem.geometry.has_constant_kernel:
        warnings.append(
            "alpha = 0 with constants in the kernel: the quotient is unbounded on "
            "constants; battery restricted to the mean-zero complement"
        )
    w, v_phi = _integrals(problem)
    U = _battery(
        problem,
        spectrum,
        battery_size,
        seed,
        include_constants=include_constants,
        mean_zero=not include_constants,
        deterministic_bumps=True,
    )
    if include_constants:
        U = np.column_stack([U, np.full(problem.dim, 1.0 / math.sqrt(v_phi))])
    ratios = rayleigh_ratio(problem, U, nu, alpha)
    solve, deflated = _deflated_solver(problem, alpha)
    p_exp = (nu + 2.0) / (nu - 2.0)

    def ascend(u, r_start):
        best_r, best_u = r_start, u
        it = 0
        for it in range(1, ascent_iters + 1):
            rhs = problem.mass_diag * np.abs(best_u) ** p_exp * np.sign(best_u)
            u_new = solve(rhs)
            if deflated:
                u_new = u_new - (w @ u_new) / v_phi
            norm = math.sqrt(float(w @ u_new**2))
            if norm == 0 or not np.all(np.isfinite(u_new)):
                break
            u_new /= norm
            r_new = float(rayleigh_ratio(problem, u_new[:, None], nu, alpha)[0])
            if r_new <= best_r * (1 + ascent_tol):
                if r_new > best_r:
                    best_r, best_u = r_new, u_new
                break
            best_r, best_u = r_new, u_new
        return best_r, best_u, it

    # Multi-start from the top candidates so the reported fixed point does
    # not depend on which random start happened to rank first.
    starts = np.argsort(ratios)[::-1][:3]
    best_ratio = float(ratios[starts[0]])
    u = U[:, starts[0]].copy()
    iters = 0
    for s in starts:
        r_s, u_s, it_s = ascend(U[:, s].copy(), float(ratios[s]))
        iters = max(iters, it_s)
        if r_s > best_ratio:
            best_ratio, u = r_s, u_s

    return SobolevEstimate(
        nu=float(nu),
        alpha=float(alpha),
        c_o_estimate=(1.0 + safety) * best_ratio,
        extremal_function=u,
        battery_size=battery_size,
        max_ratio=best_ratio,
        safety=safety,
        lambda1=lambda1,
        v_phi=v_phi,
        ascent_iterations=iters,
        warnings=warnings,
    )


@dataclass(frozen=True)
class InterpolationReport:
    """Worst margins of every step in the inequality chain, one battery.

    min_slack          min of LHS - RHS of the gradient interpolation bound
    sobolev_step_min   min slack of the rearranged Sobolev inequality
    gap_step_min       min slack of the spectral-gap step (lambda1 u^2 bound)
    holder_step_min    min relative slack of the Hoelder interpolation step
    """

    min_slack: float
    sobolev_step_min: float
    gap_step_min: float
    holder_step_min: float
    n_functions: int
    c1: float


def holder_step_slacks(problem: SpectralProblem, U: np.ndarray, nu: float) -> np.ndarray:
    """Relative slack of (int u^2)^((2+nu)/nu) <= (int |u|)^(4/nu) (int |u|^p)^((nu-2)/nu).

    Pure quadrature fact (Hoelder with p = (nu+2)/4 on the weighted sums);
    slack is normalized by the right-hand side.
    """
    w, _ = _integrals(problem)
    p = 2.0 * nu / (nu - 2.0)
    s2 = w @ U**2
    s1 = w @ np.abs(U)
    sp = (w @ np.abs(U) ** p) ** ((nu - 2.0) / nu)
    rhs = s1 ** (4.0 / nu) * sp
    lhs = s2 ** ((2.0 + nu) / nu)
    return (rhs - lhs) / rhs


def gradient_interpolation_check(
    problem: SpectralProblem,
    spectrum: Spectrum,
    est: SobolevEstimate,
    battery_size: int = 1000,
    seed: int = 1,
) -> InterpolationReport:
    """Check int |grad u|^2 e^-phi >= C1 (int u^2)^((2+nu)/nu) (int |u|)^(-4/nu)
    on a weighted-mean-zero battery, logging every step of the chain.

    The chain per function u:
      Sobolev step:  g >= C_o^{-1} V^{2/nu} ||u||_p^2-type term - alpha int u^2
      gap step:      int u^2 <= g / lambda1           (mean-zero functions)
      Hoelder step:  the interpolation inequality between the three norms
    The first eigenfunction is prepended to the battery; it is mean zero by
    orthogonality to constants and saturates the gap step.
    """
    w, v_phi = _integrals(problem)
    nu, alpha = est.nu, est.alpha
    U = _battery(problem, spectrum, battery_size - 1, seed, include_constants=False, mean_zero=True)
    lam = spectrum.eigenvalues
    first_pos = int(np.argmax(lam > 1e-9))
    U = np.column_stack([spectrum.eigenfunctions[:, first_pos], U])

    g = problem.stiffness_form(U)
    s2 = w @ U**2
    s1 = w @ np.abs(U)
    p = 2.0 * nu / (nu - 2.0)
    sp = (w @ np.abs(U) ** p) ** ((nu - 2.0) / nu)

    c1 = est.c1_value
    lhs_main = g
    rhs_main = c1 * s2 ** ((2.0 + nu) / nu) * s1 ** (-4.0 / nu)
    main = lhs_main - rhs_main

    sob = g - (sp * v_phi ** (2.0 / nu) / est.c_o_estimate - alpha * s2)
    gap = g / est.lambda1 - s2
    holder = holder_step_slacks(problem, U, nu)

    return InterpolationReport(
        min_slack=float(main.min()),
        sobolev_step_min=float(sob.min()),
        gap_step_min=float(gap.min()),
        holder_step_min=float(holder.min()),
        n_functions=U.shape[1],
        c1=c1,
    )
