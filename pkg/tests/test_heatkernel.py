import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from driftlab import heatkernel, operators, sobolev
from driftlab.eigensolve import merge_mode_spectra, solve_lowest
from driftlab.errors import TruncationError
from driftlab.geometry import build_circle, build_interval, build_sphere_symmetric

SEED = 17

THETA_SUM_40 = 0.7726372048266522  # 2 sum_{m<=40} e^{-m^2}


@pytest.fixture(scope="module")
def circle_model():
    g = build_circle(1.0, None, 2048)
    p = operators.assemble_drift_laplacian(g)
    s = solve_lowest(p, 111, seed=SEED)
    return heatkernel.build_heat_model(s, p, tol=1e-8)


@pytest.fixture(scope="module")
def ou_model():
    g = build_interval(-6.0, 6.0, "neumann", lambda x: x * x / 2, 2049)
    p = operators.assemble_drift_laplacian(g)
    s = solve_lowest(p, 300, seed=SEED)
    return heatkernel.build_heat_model(s, p, tol=1e-8)


@pytest.fixture(scope="module")
def sphere_model():
    g = build_sphere_symmetric(1.0, None, 512, 12)
    probs = {p.mode: p for p in operators.assemble_drift_laplacian(g)}
    specs = {m: solve_lowest(probs[m], 13 - m, seed=SEED) for m in probs}
    merged = merge_mode_spectra(specs)
    return heatkernel.build_heat_model(merged, problems=probs, tol=1e-8), merged


class TestEval:
    def test_long_time_limit_is_equilibrium(self, circle_model):
        m = circle_model
        vals = [heatkernel.heat_kernel_eval(m, ix, iy, 40.0) for ix, iy in [(0, 0), (100, 900), (7, 1500)]]
        assert_allclose(vals, 1.0 / (2 * math.pi), atol=1e-12)

    def test_diagonal_at_t1_matches_partial_sum_oracle(self, circle_model):
        val = heatkernel.heat_kernel_eval(circle_model, 100, 100, 1.0)
        assert_allclose(val, (1.0 + THETA_SUM_40) / (2 * math.pi), atol=2e-6)

    def test_symmetry_exact(self, circle_model):
        a = heatkernel.heat_kernel_eval(circle_model, 3, 700, 0.7)
        b = heatkernel.heat_kernel_eval(circle_model, 700, 3, 0.7)
        assert a == b

    def test_below_certified_range_rejected(self, circle_model):
        with pytest.raises(TruncationError, match="admissible"):
            heatkernel.heat_kernel_eval(circle_model, 0, 0, 1e-4)

    def test_truncation_bound_decreasing(self, circle_model):
        m = circle_model
        ts = [0.05, 0.1, 1.0, 5.0]
        vals = [m.truncation_bound(t) for t in ts]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        assert m.truncation_bound(m.t_min) <= m.tol * (1 + 1e-9)


class TestCompleteness:
    def test_circle_small_time(self, circle_model):
        # enough modes are retained that t = 0.01 is certified
        assert circle_model.t_min <= 0.01
        for t in (0.01, 0.1, 1.0):
            dev = heatkernel.stochastic_completeness_check(circle_model, 123, t)
            assert dev <= 1e-8

    def test_ou_interval(self, ou_model):
        dev = heatkernel.stochastic_completeness_check(ou_model, 400, 0.1)
        assert dev <= 1e-6

    def test_sphere(self, sphere_model):
        model, _ = sphere_model
        dev = heatkernel.stochastic_completeness_check(model, 200, 0.2)
        assert dev <= 1e-6


class TestCenteredKernel:
    def test_circle_identities(self, circle_model):
        rep = heatkernel.centered_kernel_checks(circle_model, [0.1, 0.5, 1.0], seed=SEED)
        assert rep.mean_zero_dev <= 1e-10
        assert rep.semigroup_dev <= 1e-8
        assert rep.l1_bound_max <= 2.0 + 1e-6
        assert rep.diagonal_min >= 0.0

    def test_sphere_identities(self, sphere_model):
        model, _ = sphere_model
        rep = heatkernel.centered_kernel_checks(model, [0.2, 0.5, 1.0], seed=SEED)
        assert rep.mean_zero_dev <= 1e-8
        assert rep.semigroup_dev <= 1e-8
        assert rep.l1_bound_max <= 2.0 + 1e-6
        assert rep.diagonal_min >= 0.0


class TestTrace:
    def test_circle_trace_single_grid(self, circle_model):
        # single-grid value carries the h^2 eigenvalue bias (~1e-6 here);
        # the acceptance check removes it by Richardson extrapolation
        assert_allclose(heatkernel.heat_trace(circle_model, 1.0), THETA_SUM_40, atol=3e-6)

    def test_trace_monotone_decreasing_to_zero(self, circle_model):
        ts = np.logspace(math.log10(0.05), 2.0, 25)
        vals = [heatkernel.heat_trace(circle_model, t) for t in ts]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-12
        assert heatkernel.heat_trace(circle_model, 0.4) < heatkernel.heat_trace(circle_model, 0.2)

    def test_trace_completely_monotone(self, circle_model):
        assert heatkernel.trace_monotonicity_check(
            circle_model, np.logspace(math.log10(0.05), 1, 30)
        )

    def test_sphere_trace_against_degeneracy_sum(self, sphere_model):
        model, _ = sphere_model
        oracle = sum((2 * l + 1) * math.exp(-l * (l + 1) * 0.5) for l in range(1, 30))
        assert_allclose(heatkernel.heat_trace(model, 0.5), oracle, rtol=1e-4)


class TestBounds:
    def test_growth_constant_value(self):
        # c(nu) = (2/nu)^(nu/2) / (4 e) from the trace bound at t = 1/lambda_k
        bound, ok, margin = heatkernel.eigenvalue_growth_bound(
            np.array([0.0, 1.0]), 1, c1=1.0, nu=4.0, v_phi=1.0
        )
        assert_allclose(bound, math.sqrt(1.0 / (16.0 * math.e)), rtol=1e-14)
        assert ok

    def test_bound_scales_with_k(self):
        lam = np.arange(0.0, 40.0)
        b1, _, _ = heatkernel.eigenvalue_growth_bound(lam, 6, 0.8, 4.0, 2 * math.pi)
        b2, _, _ = heatkernel.eigenvalue_growth_bound(lam, 12, 0.8, 4.0, 2 * math.pi)
        assert b2 / b1 == pytest.approx(2 ** (2.0 / 4.0), rel=1e-12)

    def test_certified_pipeline_on_circle(self, circle_model):
        g = build_circle(1.0, None, 2048)
        p = operators.assemble_drift_laplacian(g)
        s = solve_lowest(p, 12, seed=SEED)
        est = sobolev.estimate_sobolev_constant(p, s, nu=4.0, battery_size=150, seed=SEED)
        c1 = est.c1_value
        t_grid = np.logspace(math.log10(0.05), 1, 30)
        rep = heatkernel.trace_bound_check(circle_model, c1, 4.0, t_grid)
        assert rep.passed and rep.pointwise_passed
        bound, ok, _ = heatkernel.eigenvalue_growth_bound(
            circle_model.lambdas, 1, c1, 4.0, circle_model.v_phi
        )
        assert ok and bound < 1.0
        slack = heatkernel.differential_inequality_check(circle_model, c1, 4.0, [0.2, 0.5, 1.0])
        assert slack >= 0.0

    def test_k_outside_spectrum_rejected(self, circle_model):
        from driftlab.errors import DriftLabError

        with pytest.raises(DriftLabError, match="outside"):
            heatkernel.eigenvalue_growth_bound(np.array([0.0, 1.0]), 5, 1.0, 4.0, 1.0)

    def test_gaussian_envelope_finite(self, circle_model):
        val = heatkernel.gaussian_envelope_diagnostic(circle_model, [0.1, 0.5], seed=SEED)
        assert np.isfinite(val)


class TestWeylAdvisory:
    def test_short_time_scale_bounded_on_flat_circle(self, circle_model):
        # advisory: trace(t) * sqrt(4 pi t) / |M| should hover near 1 for
        # small t on flat models
        for t in (0.05, 0.1):
            scaled = heatkernel.heat_trace(circle_model, t) * math.sqrt(4 * math.pi * t) / (2 * math.pi)
            assert 0.5 <= scaled <= 1.5
