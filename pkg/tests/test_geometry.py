import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import erf, i0

from driftlab.errors import GeometryError
from driftlab.geometry import (
    build_circle,
    build_interval,
    build_sphere_symmetric,
    builtin_phi,
    curvature_summary,
    phi_from_table,
    verify_volume_comparison,
    weighted_volume,
)

TWO_PI = 2 * math.pi


class TestBuilders:
    def test_circle_flat_volume(self):
        g = build_circle(1.0, None, 2048)
        assert abs(weighted_volume(g) - TWO_PI) < 1e-10

    def test_circle_cos_volume_against_quadrature_oracle(self):
        # oracle: int_0^2pi e^{-cos t} dt = 2 pi I0(1)
        g = build_circle(1.0, lambda t: np.cos(t), 2048)
        assert_allclose(weighted_volume(g), 2 * math.pi * i0(1.0), rtol=1e-10)

    def test_circle_radius_scaling(self):
        g = build_circle(2.0, None, 1024)
        assert abs(weighted_volume(g) - 4 * math.pi) < 1e-10
        assert g.diameter == pytest.approx(2 * math.pi)

    def test_circle_rejects_nonperiodic_phi(self):
        with pytest.raises(GeometryError, match="periodic"):
            build_circle(1.0, lambda t: t, 64)

    def test_interval_flat(self):
        g = build_interval(0.0, math.pi, "neumann", None, 512)
        assert g.diameter == pytest.approx(math.pi)
        assert weighted_volume(g) == pytest.approx(math.pi, abs=1e-12)

    def test_interval_gaussian_volume_against_erf_oracle(self):
        g = build_interval(-3.0, 3.0, "neumann", lambda x: x * x / 2, 4097)
        oracle = math.sqrt(2 * math.pi) * erf(3 / math.sqrt(2))
        assert_allclose(weighted_volume(g), oracle, rtol=1e-7)

    def test_interval_dirichlet_valid(self):
        g = build_interval(0.0, 1.0, "dirichlet", None, 64)
        assert g.diameter == pytest.approx(1.0)

    def test_interval_rejects_reversed_endpoints(self):
        with pytest.raises(GeometryError, match="a < b"):
            build_interval(2.0, 1.0, "neumann", None, 64)

    def test_sphere_flat_volume(self):
        g = build_sphere_symmetric(1.0, None, 2048, 5)
        assert_allclose(weighted_volume(g), 4 * math.pi, rtol=1e-6)

    def test_sphere_weighted_volume_closed_form(self):
        # oracle: 2 pi int e^{-c cos} sin = 4 pi sinh(c)/c at c = 0.1
        g = build_sphere_symmetric(1.0, lambda t: 0.1 * np.cos(t), 2048, 3)
        assert_allclose(weighted_volume(g), 12.587325039852291, rtol=1e-6)

    def test_sphere_rejects_negative_cap(self):
        with pytest.raises(GeometryError, match="cap"):
            build_sphere_symmetric(1.0, None, 64, -1)

    def test_minimum_points(self):
        with pytest.raises(GeometryError):
            build_circle(1.0, None, 4)


class TestCurvature:
    def test_flat_circle(self):
        c = curvature_summary(build_circle(1.0, None, 256))
        assert abs(c.ric_phi_inf) < 1e-10
        assert c.diameter_d == pytest.approx(math.pi)

    def test_quadratic_weight_interval(self):
        # phi = x^2/2: Hess phi = 1 exactly (the FD stencils are exact on
        # quadratics); the q = 1 modification subtracts x^2, inf = 1 - 9.
        c = curvature_summary(build_interval(-3, 3, "neumann", lambda x: x * x / 2, 1024))
        assert_allclose(c.ric_phi_inf, 1.0, atol=1e-9)
        assert_allclose(c.ric_q_inf(1.0), -8.0, atol=1e-8)

    def test_round_sphere(self):
        c = curvature_summary(build_sphere_symmetric(1.0, None, 1024, 2))
        assert_allclose(c.ric_phi_inf, 1.0, atol=1e-9)

    def test_weighted_sphere_components(self):
        # phi = c cos(theta): both Hessian components equal -c cos(theta),
        # so inf Ric_phi = 1 - c.
        c = curvature_summary(build_sphere_symmetric(1.0, lambda t: 0.1 * np.cos(t), 2048, 2))
        assert_allclose(c.ric_phi_inf, 0.9, atol=1e-5)

    def test_constant_weight_matches_unweighted(self):
        c0 = curvature_summary(build_circle(1.0, None, 256))
        c1 = curvature_summary(build_circle(1.0, lambda t: 0.7 + 0 * t, 256))
        assert_allclose(c1.ric_phi_inf, c0.ric_phi_inf, atol=1e-10)

    def test_ric_q_monotone_in_q(self):
        c = curvature_summary(build_interval(-2, 2, "neumann", lambda x: np.cos(x), 512))
        qs = [0.25, 0.5, 1.0, 2.0, 8.0]
        vals = [c.ric_q_inf(q) for q in qs]
        assert all(a <= b + 1e-14 for a, b in zip(vals, vals[1:]))
        assert all(v <= c.ric_phi_inf + 1e-12 for v in vals)

    def test_noise_rejected(self):
        rng = np.random.default_rng(0)
        g = build_interval(0, 1, "neumann", rng.standard_normal(128), 128)
        with pytest.raises(GeometryError, match="coarse"):
            curvature_summary(g)


class TestVolumeMonotonicityAndScaling:
    def test_volume_decreases_when_phi_increases(self):
        base = build_circle(1.0, lambda t: 0.2 * np.cos(t), 256)
        shifted = build_circle(1.0, lambda t: 0.2 * np.cos(t) + 0.3, 256)
        assert weighted_volume(shifted) < weighted_volume(base)

    def test_scaling_diameter_and_volume(self):
        for r1, r2 in [(1.0, 2.0)]:
            c1, c2 = build_circle(r1, None, 256), build_circle(r2, None, 256)
            assert c2.diameter / c1.diameter == pytest.approx(r2 / r1)
            assert weighted_volume(c2) / weighted_volume(c1) == pytest.approx(r2 / r1)
            s1 = build_sphere_symmetric(r1, None, 256, 1)
            s2 = build_sphere_symmetric(r2, None, 256, 1)
            assert s2.diameter / s1.diameter == pytest.approx(r2 / r1)
            assert weighted_volume(s2) / weighted_volume(s1) == pytest.approx((r2 / r1) ** 2, rel=1e-9)


class TestVolumeComparison:
    def test_flat_circle_ratio_one(self):
        r = verify_volume_comparison(build_circle(1.0, None, 512), R=1.0, a=0.0, A_R=0.0)
        assert r.passed
        assert abs(r.worst_margin) < 1e-12

    def test_round_sphere_sine_monotonicity(self):
        # sin(r)/r decreasing makes sin r2 / sin r1 <= r2/r1; verified
        # against dense geodesic sampling.
        r = verify_volume_comparison(
            build_sphere_symmetric(1.0, None, 512, 1), R=math.pi / 2, a=1.0, A_R=0.0,
            n_base=12, n_dir=6, n_radii=24,
        )
        assert r.passed

    def test_sphere_truncates_beyond_injectivity(self):
        r = verify_volume_comparison(build_sphere_symmetric(1.0, None, 256, 1), R=5.0, a=1.0, A_R=0.0)
        assert r.truncated

    def test_interval_linear_weight_forward_direction(self):
        # phi = x from the left end going right: ratio e^{-(r2-r1)} <= 1.
        g = build_interval(0.0, 3.0, "neumann", lambda x: x, 512)
        r = verify_volume_comparison(g, R=2.0, a=0.0, A_R=0.0, basepoints=[0.0], directions=[+1.0])
        assert r.passed

    def test_interval_linear_weight_fails_without_allowance(self):
        g = build_interval(0.0, 3.0, "neumann", lambda x: x, 512)
        r = verify_volume_comparison(g, R=2.0, a=0.0, A_R=0.0)
        assert not r.passed
        r2 = verify_volume_comparison(g, R=2.0, a=0.0, A_R=2.0)
        assert r2.passed


class TestBuiltinPhi:
    def test_named_builders(self):
        x = np.linspace(0, 1, 5)
        assert_allclose(builtin_phi("zero")(x), 0.0)
        assert_allclose(builtin_phi("cos", amplitude=0.5)(np.array([0.0])), 0.5)
        assert_allclose(builtin_phi("quadratic", amplitude=2.0)(np.array([3.0])), 9.0)
        well = builtin_phi("gaussian-well", depth=1.5, width=0.7)
        assert well(np.array([0.0]))[0] == pytest.approx(-1.5)

    def test_unknown_name_and_params(self):
        with pytest.raises(GeometryError, match="unknown builtin"):
            builtin_phi("sinh")
        with pytest.raises(GeometryError, match="unknown parameters"):
            builtin_phi("cos", amplitude=1.0, junk=2)
        with pytest.raises(GeometryError, match="missing"):
            builtin_phi("gaussian-well", depth=1.0)

    def test_table_interpolation(self):
        f = phi_from_table([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])
        assert f(np.array([0.5]))[0] == pytest.approx(1.0)
        with pytest.raises(GeometryError):
            phi_from_table([0.0, 0.0], [1.0, 2.0])
