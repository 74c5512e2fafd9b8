import math

import numpy as np
import pytest
from mpmath import mp
from numpy.testing import assert_allclose

from driftlab import bounds, operators
from driftlab.eigensolve import first_eigenfunction_normalized, merge_mode_spectra, solve_lowest
from driftlab.errors import GeometryError
from driftlab.geometry import (
    build_circle,
    build_interval,
    build_sphere_symmetric,
    curvature_summary,
    weighted_volume,
)

SEED = 5

mp.dps = 40


def yang_oracle(n, k, d):
    """High-precision re-evaluation of the explicit curvature bound."""
    n_, k_, d_ = mp.mpf(n), mp.mpf(k), mp.mpf(d)
    num = mp.pi**2 / 16 * max(n - 1, 2) * (n_ - 1) * k_
    den = (mp.exp(mp.mpf(1) / 2 * max(mp.sqrt(n_ - 1), mp.sqrt(2)) * mp.sqrt((n_ - 1) * k_ * d_**2)) - 1) ** 2
    return float(num / den)


class TestFormulas:
    def test_yang_explicit_zero_curvature_is_sharp_flat_value(self):
        assert bounds.yang_explicit_bound(2, 0.0, math.pi) == pytest.approx(1.0, abs=1e-15)

    def test_yang_explicit_against_high_precision_oracle(self):
        val = bounds.yang_explicit_bound(2, 1.0, math.pi)
        assert_allclose(val, yang_oracle(2, 1.0, math.pi), rtol=1e-13)
        assert_allclose(val, 0.018255822405426492, rtol=1e-12)
        val3 = bounds.yang_explicit_bound(3, 1.0, 1.0)
        assert_allclose(val3, yang_oracle(3, 1.0, 1.0), rtol=1e-13)
        assert_allclose(val3, float((mp.pi**2 / 4) / (mp.e - 1) ** 2), rtol=1e-12)

    def test_yang_explicit_monotone_nonincreasing_in_k(self):
        ks = np.linspace(0.0, 4.0, 25)
        vals = [bounds.yang_explicit_bound(2, k, math.pi) for k in ks]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_yang_combined(self):
        assert bounds.yang_combined_bound(3, 0.0, 2.0) == pytest.approx(math.pi**2 / 4, abs=1e-15)
        base = bounds.yang_explicit_bound(2, 1.0, math.pi)
        combined_inner = (math.pi**2 / math.pi**2) / (1.0 + 1.0 / base)
        assert bounds.yang_combined_bound(2, 1.0, math.pi) == pytest.approx(max(base, combined_inner))
        vals = [bounds.yang_combined_bound(2, k, math.pi) for k in (0.005, 0.01, 0.02)]
        assert all(0 < v < 1 for v in vals)
        assert vals[0] > vals[1] > vals[2]

    def test_ling(self):
        assert bounds.ling_bound(2, 1.0, math.pi) == pytest.approx(1.375)
        assert bounds.ling_bound(3, 1.0, math.pi) == pytest.approx(1.0 + 0.62, abs=1e-12)
        assert bounds.ling_bound(2, 0.0, math.pi) is None
        assert bounds.ling_bound(2, 1e-12, math.pi) == pytest.approx(1.0, abs=1e-9)

    def test_andrews_ni(self):
        assert bounds.andrews_ni_bound(2, 1.0, math.pi) == pytest.approx(1.5)
        assert bounds.andrews_ni_bound(1, 1.0, math.pi) == pytest.approx(1.0)
        assert bounds.andrews_ni_bound(2, -1.0, math.pi) is None

    def test_ling_strictly_below_andrews_ni(self):
        for n in (2, 3, 5):
            for k in (0.1, 1.0, 7.0):
                assert bounds.ling_bound(n, k, 2.0) < bounds.andrews_ni_bound(n, k, 2.0)

    def test_cheng_values(self):
        assert bounds.cheng_upper_bound(2, 1, math.pi, bounds.CHENG_RIC_NONNEG) == pytest.approx(
            9.726833629664426, rel=1e-12
        )
        assert bounds.cheng_upper_bound(2, 2, math.pi, bounds.CHENG_RIC_NONNEG) == pytest.approx(
            4 * 9.726833629664426, rel=1e-12
        )
        assert bounds.cheng_upper_bound(
            2, 1, math.pi, bounds.CHENG_RIC_AT_LEAST_N_MINUS_1
        ) == pytest.approx(0.8105694691387022, rel=1e-12)
        assert bounds.cheng_upper_bound(
            2, 1, math.pi, bounds.CHENG_RIC_AT_LEAST_MINUS_K, k=2.0
        ) == pytest.approx(0.5 + 9.726833629664426, rel=1e-12)

    def test_pure_functions_bit_identical(self):
        a = bounds.yang_explicit_bound(4, 0.37, 2.11)
        b = bounds.yang_explicit_bound(4, 0.37, 2.11)
        assert a == b

    def test_input_validation(self):
        with pytest.raises(GeometryError):
            bounds.yang_explicit_bound(0, 1.0, 1.0)
        with pytest.raises(GeometryError):
            bounds.yang_explicit_bound(2, -1.0, 1.0)
        with pytest.raises(GeometryError):
            bounds.cheng_upper_bound(2, 0, 1.0, bounds.CHENG_RIC_NONNEG)


class TestGradientEstimate:
    def test_circle_equality_case(self, circle_flat_1024):
        g, _, s = circle_flat_1024
        f, _ = first_eigenfunction_normalized(s)
        slack = bounds.gradient_estimate_check(g, f, float(s.eigenvalues[1]), 1, 0.0)
        assert -0.02 <= slack <= 1e-3

    def test_interval_equality_case(self, interval_flat_2049):
        g, _, s = interval_flat_2049
        f, _ = first_eigenfunction_normalized(s)
        slack = bounds.gradient_estimate_check(g, f, float(s.eigenvalues[1]), 1, 0.0)
        assert -0.02 <= slack <= 1e-3

    def test_ou_interval_nonnegative(self, interval_ou_2049):
        g, _, s = interval_ou_2049
        f, _ = first_eigenfunction_normalized(s)
        slack = bounds.gradient_estimate_check(g, f, float(s.eigenvalues[1]), 1, 0.0)
        assert slack >= 0.0

    def test_all_points_masked_rejected(self, circle_flat_1024):
        g, _, _ = circle_flat_1024
        with pytest.raises(GeometryError, match="floor"):
            bounds.gradient_estimate_check(g, np.ones(g.n_nodes), 1.0, 1, 0.0)


class TestBattery:
    def test_sphere_battery(self, sphere_flat_1024):
        g, _, specs = sphere_flat_1024
        merged = merge_mode_spectra(specs)
        reports = bounds.evaluate_bound_battery(g, curvature_summary(g), merged, j_max=3)
        by_name = {r.bound_name: r for r in reports}
        assert by_name["ling"].verdict == bounds.SATISFIED
        assert by_name["ling"].bound_value == pytest.approx(1.375, abs=1e-6)
        assert by_name["andrews_ni"].bound_value == pytest.approx(1.5, abs=1e-6)
        assert by_name["cheng_unit_ric_j1"].verdict == bounds.ADVISORY
        # the advisory case really is numerically violated on the sphere
        assert by_name["cheng_unit_ric_j1"].bound_value < by_name["cheng_unit_ric_j1"].target_value
        assert by_name["cheng_nonneg_j1"].verdict == bounds.SATISFIED

    def test_ou_battery_upper_bounds_not_applicable(self, interval_ou_2049):
        # Ric_phi = 1 but the gradient-corrected curvature is very negative:
        # the plain Cheng constants do not apply to the drift spectrum here
        # (mu_1 = 1 would violate them), so the hypothesis must fail.
        g, _, s = interval_ou_2049
        reports = bounds.evaluate_bound_battery(g, curvature_summary(g), s, j_max=2)
        by_name = {r.bound_name: r for r in reports}
        assert by_name["cheng_nonneg_j1"].verdict == bounds.NOT_APPLICABLE
        assert by_name["yang_explicit"].verdict == bounds.SATISFIED
        assert by_name["ling"].verdict == bounds.SATISFIED

    def test_negative_curvature_n1_all_lower_not_applicable(self):
        g = build_circle(1.0, lambda t: np.cos(t), 1024)
        s = solve_lowest(operators.assemble_drift_laplacian(g), 6, seed=SEED)
        reports = bounds.evaluate_bound_battery(g, curvature_summary(g), s, j_max=2)
        for r in reports:
            if r.direction == bounds.LOWER:
                assert r.verdict == bounds.NOT_APPLICABLE

    def test_no_violations_on_flat_models(self):
        # The sharp pi^2/d^2 cases sit below the bound by exactly the
        # discretization error, so the verdict needs the Richardson
        # tolerance attached, as in the production battery path.
        from driftlab.eigensolve import attach_richardson

        cases = [
            (build_circle(1.0, None, 1024), build_circle(1.0, None, 512)),
            (
                build_interval(0.0, math.pi, "neumann", None, 1025),
                build_interval(0.0, math.pi, "neumann", None, 513),
            ),
        ]
        for g_fine, g_coarse in cases:
            s = attach_richardson(
                solve_lowest(operators.assemble_drift_laplacian(g_fine), 12, seed=SEED),
                solve_lowest(operators.assemble_drift_laplacian(g_coarse), 12, seed=SEED),
            )
            reports = bounds.evaluate_bound_battery(g_fine, curvature_summary(g_fine), s, j_max=5)
            assert all(r.verdict != bounds.VIOLATED for r in reports)


class TestRatioDiagnostics:
    def test_circle_ratios(self, circle_flat_1024):
        g, _, s = circle_flat_1024
        d = bounds.ratio_diagnostics(g, s, 5, weighted_volume(g))
        assert_allclose(d.ratios, [1, 1, 4, 4, 9], rtol=1e-4)
        assert d.sigma_grad_phi == pytest.approx(0.0, abs=1e-10)

    def test_sphere_ratios(self, sphere_flat_1024):
        g, _, specs = sphere_flat_1024
        merged = merge_mode_spectra(specs, k=9)
        d = bounds.ratio_diagnostics(g, merged, 8, weighted_volume(g))
        assert_allclose(d.ratios, [1, 1, 1, 3, 3, 3, 3, 3], rtol=1e-4)

    def test_ou_ratios(self, interval_ou_2049):
        g, _, s = interval_ou_2049
        d = bounds.ratio_diagnostics(g, s, 4, weighted_volume(g))
        assert_allclose(d.ratios, [1, 2, 3, 4], rtol=1e-3)
        assert d.sigma_grad_phi == pytest.approx(6.0, rel=1e-3)
