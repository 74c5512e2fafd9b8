"""Closed-form eigenvalue bounds and their evaluation against spectra.

Every bound is a pure function of (dimension, curvature bound, diameter);
`evaluate_bound_battery` decides applicability from curvature data, compares
against a computed spectrum, and emits one report per bound.  Curvature
hypotheses are checked with a small negative slack to absorb finite
difference noise in the curvature summary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GeometryError
from .eigensolve import MergedSpectrum, Spectrum
from .geometry import WeightedGeometry, phi_derivatives

LOWER = "lower"
UPPER = "upper"

SATISFIED = "satisfied"
VIOLATED = "violated"
NOT_APPLICABLE = "not_applicable"
ADVISORY = "advisory"

HYPOTHESIS_SLACK = 1e-8

CHENG_RIC_NONNEG = "ric_nonneg"
CHENG_RIC_AT_LEAST_N_MINUS_1 = "ric_at_least_n_minus_1"
CHENG_RIC_AT_LEAST_MINUS_K = "ric_at_least_minus_k"


def zhong_yang_value(d: float) -> float:
    """Sharp first-eigenvalue lower bound pi^2/d^2 under nonnegative curvature."""
    return math.pi**2 / d**2


def yang_explicit_bound(n: int, k: float, d: float) -> float:
    """Explicit first-eigenvalue lower bound under Ric_phi >= -(n-1)k, k >= 0.

    (pi^2/16) max(n-1,2)(n-1)k / (exp(0.5 max(sqrt(n-1),sqrt 2)
    sqrt((n-1) k d^2)) - 1)^2.  The k -> 0 limit degenerates to 0/0 and is
    returned as the Zhong-Yang value pi^2/d^2, the sharp flat-case bound the
    formula refines; the same applies for n = 1 where the (n-1)k factor
    vanishes identically.
    """
    _validate_nkd(n, k, d)
    nk = (n - 1) * k
    if nk == 0.0:
        return zhong_yang_value(d)
    c = 0.5 * max(math.sqrt(n - 1), math.sqrt(2.0))
    denom = (math.exp(c * math.sqrt(nk * d * d)) - 1.0) ** 2
    return (math.pi**2 / 16.0) * max(n - 1, 2) * nk / denom


def yang_combined_bound(n: int, k: float, d: float) -> float:
    """Gradient-estimate refinement of the explicit bound.

    pi^2/d^2 / (1 + (n-1)k/mu) is increasing in mu, so seeding it with any
    valid lower bound keeps it valid; the maximum with the seed is returned.
    """
    _validate_nkd(n, k, d)
    base = yang_explicit_bound(n, k, d)
    nk = (n - 1) * k
    if nk == 0.0:
        return zhong_yang_value(d)
    combined = (math.pi**2 / d**2) / (1.0 + nk / base)
    return max(combined, base)


def ling_bound(n: int, k: float, d: float) -> Optional[float]:
    """First-eigenvalue lower bound under Ric_phi >= (n-1)k > 0.

    pi^2/d^2 + (3/8)(n-1)k in dimension 2, coefficient 31/100 above.
    Returns None when k <= 0 (hypothesis empty).
    """
    _validate_nkd(n, max(k, 0.0), d)
    if k <= 0.0:
        return None
    if n == 1:
        return zhong_yang_value(d)
    coeff = 3.0 / 8.0 if n == 2 else 31.0 / 100.0
    return math.pi**2 / d**2 + coeff * (n - 1) * k


def andrews_ni_bound(n: int, k: float, d: float) -> Optional[float]:
    """Neumann first-eigenvalue bound pi^2/d^2 + (n-1)k/2 on convex domains."""
    _validate_nkd(n, max(k, 0.0), d)
    if k <= 0.0:
        return None
    return math.pi**2 / d**2 + 0.5 * (n - 1) * k


def cheng_upper_bound(n: int, j: int, d: float, regime: str, k: float = 0.0) -> float:
    """Cheng-type upper bound on the j-th positive eigenvalue.

    ric_nonneg:                 8 n (n+4) j^2 / d^2
    ric_at_least_n_minus_1:     4 n j^2 / d^2
    ric_at_least_minus_k:       k/4 + 8 n (n+4) j^2 / d^2
    """
    if j < 1:
        raise GeometryError("j must be at least 1")
    _validate_nkd(n, max(k, 0.0), d)
    if regime == CHENG_RIC_NONNEG:
        return 8.0 * n * (n + 4) * j**2 / d**2
    if regime == CHENG_RIC_AT_LEAST_N_MINUS_1:
        return 4.0 * n * j**2 / d**2
    if regime == CHENG_RIC_AT_LEAST_MINUS_K:
        return 0.25 * k + 8.0 * n * (n + 4) * j**2 / d**2
    raise GeometryError(f"unknown Cheng regime {regime!r}")


def _validate_nkd(n, k, d):
    if n < 1:
        raise GeometryError("dimension n must be at least 1")
    if k < 0:
        raise GeometryError("curvature parameter k must be nonnegative here")
    if d <= 0:
        raise GeometryError("diameter must be positive")


# -- gradient estimate --------------------------------------------------------


def gradient_estimate_check(
    geom: WeightedGeometry,
    f: np.ndarray,
    mu1: float,
    n: int,
    k: float,
    floor: float = 1e-4,
) -> float:
    """Worst-case slack of the first-eigenfunction gradient estimate.

    With f normalized to max f = 1, checks
    |grad f| / sqrt(1 - f^2) <= sqrt(mu1)
        + 0.5 max(sqrt(n-1), sqrt 2) sqrt((n-1)k) sqrt(1 - f^2)
    on interior points where 1 - f^2 >= floor, and returns min(RHS - LHS).
    Derivatives are centered differences, so the slack carries O(h)
    derivative noise near the extrema.
    """
    from .geometry import Circle

    f = np.asarray(f, dtype=float)
    if f.shape != geom.node_coords.shape:
        raise GeometryError("f must be sampled on the geometry nodes")
    h = geom.spacing
    periodic = isinstance(geom.topology, Circle)
    scale = 1.0 / math.sqrt(geom.metric_gxx)
    if periodic:
        grad = (np.roll(f, -1) - np.roll(f, 1)) / (2 * h) * scale
        mask = np.ones(f.size, dtype=bool)
    else:
        grad = np.empty_like(f)
        grad[1:-1] = (f[2:] - f[:-2]) / (2 * h) * scale
        grad[0] = grad[1]
        grad[-1] = grad[-2]
        mask = np.zeros(f.size, dtype=bool)
        mask[1:-1] = True
    one_minus = 1.0 - f**2
    mask &= one_minus >= floor
    if not np.any(mask):
        raise GeometryError("all points excluded by the 1 - f^2 floor")
    root = np.sqrt(one_minus[mask])
    lhs = np.abs(grad[mask]) / root
    rhs = math.sqrt(max(mu1, 0.0)) + 0.5 * max(
        math.sqrt(max(n - 1, 0)), math.sqrt(2.0)
    ) * math.sqrt(max((n - 1) * k, 0.0)) * root
    return float((rhs - lhs).min())


# -- reports --------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Result of one bound evaluated against one computed eigenvalue."""

    bound_name: str
    hypothesis: str
    hypothesis_ok: bool
    bound_value: Optional[float]
    target_index: int
    target_value: Optional[float]
    direction: str
    verdict: str
    margin: Optional[float]
    tolerance: float
    notes: str = ""

    def row(self) -> dict:
        return {
            "bound": self.bound_name,
            "direction": self.direction,
            "hypothesis": self.hypothesis,
            "hypothesis_ok": self.hypothesis_ok,
            "bound_value": self.bound_value,
            "target_index": self.target_index,
            "target_value": self.target_value,
            "verdict": self.verdict,
            "margin": self.margin,
            "tolerance": self.tolerance,
            "notes": self.notes,
        }


def _verdict(direction, computed, bound, tolerance):
    if direction == LOWER:
        ok = computed >= bound - tolerance
        margin = computed - bound
    else:
        ok = computed <= bound + tolerance
        margin = bound - computed
    return (SATISFIED if ok else VIOLATED), margin


def evaluate_bound_battery(
    geom: WeightedGeometry,
    curvature,
    spectrum: Spectrum | MergedSpectrum,
    j_max: int = 5,
    tolerance_safety: float = 2.0,
) -> list[BoundReport]:
    """All applicable bounds checked against the computed spectrum.

    Verdict tolerance per target is tolerance_safety times the Richardson
    discretization estimate of the eigenvalue plus 1e-10; the Richardson
    estimate asymptotically equals the true error, so equality-case bounds
    would sit exactly on the edge without the safety factor.

    Cheng's intermediate regime (curvature at least n-1) is always reported
    as Advisory: the round sphere violates the stated constant, so the
    checker records the margin without judging it.
    """
    n = geom.dimension_n
    d = geom.diameter
    ric = curvature.ric_phi_inf
    lam = np.asarray(spectrum.eigenvalues, dtype=float)
    if isinstance(spectrum, MergedSpectrum):
        est = spectrum.estimates
    else:
        est = (
            spectrum.discretization_estimate
            if spectrum.discretization_estimate is not None
            else np.zeros_like(lam)
        )
    positive = [i for i in range(lam.size) if lam[i] > 1e-9]
    if not positive:
        raise GeometryError("spectrum has no resolved positive eigenvalue")
    i1 = positive[0]
    mu1 = float(lam[i1])

    def tol_for(i):
        return tolerance_safety * float(est[min(i, est.size - 1)]) + 1e-10

    reports: list[BoundReport] = []

    # Lower bounds allowing negative curvature: hypothesis Ric_phi >= -(n-1)k.
    # The best admissible k is max(0, -inf Ric)/(n-1); in dimension 1 the
    # product (n-1)k vanishes for every k, so the hypothesis degenerates to
    # Ric_phi >= 0.
    if n >= 2:
        k_yang = max(0.0, -ric) / (n - 1)
        yang_ok = True
        hyp_yang = f"Ric_phi >= -(n-1)k with k={k_yang:.6g} (inf Ric_phi = {ric:.6g})"
    else:
        k_yang = 0.0
        yang_ok = ric >= -HYPOTHESIS_SLACK
        hyp_yang = f"n=1: requires Ric_phi >= 0 (inf Ric_phi = {ric:.6g})"
    for name, fn in (
        ("yang_explicit", yang_explicit_bound),
        ("yang_combined", yang_combined_bound),
    ):
        if yang_ok:
            bv = fn(n, k_yang, d)
            verdict, margin = _verdict(LOWER, mu1, bv, tol_for(i1))
            reports.append(
                BoundReport(name, hyp_yang, True, bv, i1, mu1, LOWER, verdict, margin, tol_for(i1))
            )
        else:
            reports.append(
                BoundReport(name, hyp_yang, False, None, i1, mu1, LOWER, NOT_APPLICABLE, None, tol_for(i1))
            )

    # Positive-curvature lower bounds: hypothesis Ric_phi >= (n-1)k > 0.
    k_pos = ric / max(n - 1, 1)
    pos_ok = k_pos > HYPOTHESIS_SLACK
    hyp_pos = f"Ric_phi >= (n-1)k with k={k_pos:.6g} > 0"
    for name, fn in (("ling", ling_bound), ("andrews_ni", andrews_ni_bound)):
        if pos_ok:
            bv = fn(n, k_pos, d)
            verdict, margin = _verdict(LOWER, mu1, bv, tol_for(i1))
            note = ""
            if name == "andrews_ni":
                note = (
                    "convex domain taken as the whole model (interval is "
                    "geodesically convex; closed models use Omega = M); "
                    "diameter is the full model diameter"
                )
            reports.append(
                BoundReport(name, hyp_pos, True, bv, i1, mu1, LOWER, verdict, margin, tol_for(i1), note)
            )
        else:
            reports.append(
                BoundReport(name, hyp_pos, False, None, i1, mu1, LOWER, NOT_APPLICABLE, None, tol_for(i1))
            )

    # Cheng-type upper bounds on the j-th positive eigenvalue.  Upper bounds
    # do not survive the weight through Ric_phi alone (the drift term can
    # push eigenvalues far above the unweighted scale while Ric_phi stays
    # positive); the transfer needs the gradient-corrected curvature
    # Ric_phi - (1/q) dphi x dphi, fixed here at q = 1.
    ric_q = curvature.ric_q_inf(1.0)
    for j in range(1, j_max + 1):
        if j - 1 >= len(positive):
            break
        idx = positive[j - 1]
        muj = float(lam[idx])
        tol = tol_for(idx)

        hyp1 = f"Ric_phi - dphi x dphi >= 0 (inf = {ric_q:.6g})"
        if ric_q >= -HYPOTHESIS_SLACK:
            bv = cheng_upper_bound(n, j, d, CHENG_RIC_NONNEG)
            verdict, margin = _verdict(UPPER, muj, bv, tol)
            reports.append(
                BoundReport(f"cheng_nonneg_j{j}", hyp1, True, bv, idx, muj, UPPER, verdict, margin, tol)
            )
        else:
            reports.append(
                BoundReport(f"cheng_nonneg_j{j}", hyp1, False, None, idx, muj, UPPER, NOT_APPLICABLE, None, tol)
            )

        hyp2_ok = ric_q >= (n - 1) - HYPOTHESIS_SLACK
        bv2 = cheng_upper_bound(n, j, d, CHENG_RIC_AT_LEAST_N_MINUS_1) if hyp2_ok else None
        reports.append(
            BoundReport(
                f"cheng_unit_ric_j{j}",
                f"Ric_phi - dphi x dphi >= n-1 = {n - 1} (inf = {ric_q:.6g})",
                hyp2_ok,
                bv2,
                idx,
                muj,
                UPPER,
                ADVISORY if hyp2_ok else NOT_APPLICABLE,
                (bv2 - muj) if hyp2_ok else None,
                tol,
                "advisory: the stated constant is violated by the round sphere; margin recorded, never judged",
            )
        )

        if n >= 2:
            k_neg = max(0.0, -ric_q) / (n - 1)
            hyp3_ok = True
            hyp3 = f"Ric_phi - dphi x dphi >= -(n-1)k with k={k_neg:.6g}"
        else:
            k_neg = 0.0
            hyp3_ok = ric_q >= -HYPOTHESIS_SLACK
            hyp3 = "n=1: requires Ric_phi - dphi x dphi >= 0"
        if hyp3_ok:
            bv3 = cheng_upper_bound(n, j, d, CHENG_RIC_AT_LEAST_MINUS_K, k=k_neg)
            verdict, margin = _verdict(UPPER, muj, bv3, tol)
            reports.append(
                BoundReport(f"cheng_negative_j{j}", hyp3, True, bv3, idx, muj, UPPER, verdict, margin, tol)
            )
        else:
            reports.append(
                BoundReport(f"cheng_negative_j{j}", hyp3, False, None, idx, muj, UPPER, NOT_APPLICABLE, None, tol)
            )
    return reports


# -- empirical ratio diagnostics ------------------------------------------------


@dataclass(frozen=True)
class RatioDiagnostics:
    """Purely empirical spectral ratios; no pass/fail judgment attached."""

    ratios: np.ndarray
    fitted_constant: float
    sigma_grad_phi: float
    rows: list = field(default_factory=list)


def ratio_diagnostics(
    geom: WeightedGeometry,
    spectrum: Spectrum | MergedSpectrum,
    j_max: int,
    v_phi: float,
) -> RatioDiagnostics:
    """mu_j / mu_1 table, the fitted constant in mu_j ~ C (j/V_phi)^(2/n),
    and the weight gradient bound sigma = max |grad phi|."""
    lam = np.asarray(spectrum.eigenvalues, dtype=float)
    positive = lam[lam > 1e-9]
    if positive.size == 0:
        raise GeometryError("no positive eigenvalues resolved")
    j_max = min(j_max, positive.size)
    mus = positive[:j_max]
    ratios = mus / mus[0]
    n = geom.dimension_n
    js = np.arange(1, j_max + 1, dtype=float)
    logs = np.log(mus) - (2.0 / n) * np.log(js / v_phi)
    fitted = float(np.exp(np.mean(logs)))
    d1, _ = phi_derivatives(geom)
    sigma = float(np.max(np.abs(d1)) / math.sqrt(geom.metric_gxx))
    rows = [
        {"j": int(j), "mu_j": float(mu), "ratio_to_mu1": float(r)}
        for j, mu, r in zip(js, mus, ratios)
    ]
    return RatioDiagnostics(ratios=ratios, fitted_constant=fitted, sigma_grad_phi=sigma, rows=rows)
