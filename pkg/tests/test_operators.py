import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from driftlab import operators
from driftlab.eigensolve import solve_lowest
from driftlab.errors import AssemblyError, GeometryError
from driftlab.geometry import build_circle, build_interval, build_sphere_symmetric, weighted_volume

SEED = 7


def _geometries():
    return [
        build_circle(1.0, lambda t: np.cos(t), 256),
        build_interval(0.0, math.pi, "neumann", None, 257),
        build_interval(-4.0, 4.0, "neumann", lambda x: x * x / 2, 257),
        build_interval(0.0, 1.0, "dirichlet", lambda x: x, 257),
    ]


class TestAssemblyContracts:
    @pytest.mark.parametrize("geom", _geometries(), ids=lambda g: g.name)
    def test_stiffness_exactly_symmetric(self, geom):
        p = operators.assemble_drift_laplacian(geom)
        assert (p.stiffness - p.stiffness.T).nnz == 0

    @pytest.mark.parametrize("geom", _geometries(), ids=lambda g: g.name)
    def test_quadratic_form_nonnegative_on_random_vectors(self, geom):
        p = operators.assemble_drift_laplacian(geom)
        rng = np.random.default_rng(SEED)
        U = rng.standard_normal((p.dim, 32))
        forms = p.stiffness_form(U)
        assert np.all(forms >= -1e-9 * np.abs(forms).max())

    def test_constant_in_kernel_for_closed_and_neumann(self):
        for geom in _geometries()[:3]:
            p = operators.assemble_drift_laplacian(geom)
            ones = np.ones(p.dim)
            rel = np.linalg.norm(p.stiffness @ ones) / np.linalg.norm(p.stiffness.diagonal())
            assert rel <= 1e-10

    @pytest.mark.parametrize("geom", _geometries()[:3], ids=lambda g: g.name)
    def test_mass_total_equals_weighted_volume(self, geom):
        p = operators.assemble_drift_laplacian(geom)
        assert_allclose(p.mass_diag.sum(), weighted_volume(geom), rtol=1e-12)

    def test_sphere_mass_total_across_modes(self):
        g = build_sphere_symmetric(1.0, lambda t: 0.2 * np.cos(t), 256, 2)
        probs = operators.assemble_drift_laplacian(g)
        v = weighted_volume(g)
        assert_allclose(probs[0].mass_diag.sum(), v, rtol=1e-12)
        # m >= 1 modes carry the azimuthal factor pi instead of 2 pi.
        assert_allclose(probs[1].mass_diag.sum(), v / 2, rtol=1e-12)

    def test_underflow_rejected_with_location(self):
        g = build_interval(0.0, 1.0, "neumann", lambda x: 2000.0 * x, 64)
        with pytest.raises(AssemblyError, match="grid point"):
            operators.assemble_drift_laplacian(g)


class TestDriftSpectra:
    def test_circle_fourier_modes(self):
        g = build_circle(1.0, None, 2048)
        s = solve_lowest(operators.assemble_drift_laplacian(g), 7, seed=SEED)
        assert_allclose(s.eigenvalues, [0, 1, 1, 4, 4, 9, 9], atol=2e-4)

    def test_interval_neumann_cosine_modes(self):
        g = build_interval(0.0, math.pi, "neumann", None, 2049)
        s = solve_lowest(operators.assemble_drift_laplacian(g), 4, seed=SEED)
        assert_allclose(s.eigenvalues, [0, 1, 4, 9], atol=2e-5)

    def test_ou_spectrum_against_refined_oracle(self):
        # oracle: dense-style solve at 4x resolution of the same truncated
        # problem; the continuum values are the integers.
        g = build_interval(-6.0, 6.0, "neumann", lambda x: x * x / 2, 1025)
        s = solve_lowest(operators.assemble_drift_laplacian(g), 4, seed=SEED)
        g4 = build_interval(-6.0, 6.0, "neumann", lambda x: x * x / 2, 4097)
        s4 = solve_lowest(operators.assemble_drift_laplacian(g4), 4, seed=SEED)
        assert_allclose(s.eigenvalues, s4.eigenvalues, atol=2e-4)
        assert_allclose(s4.eigenvalues, [0, 1, 2, 3], atol=1e-4)


class TestSchrodinger:
    def test_zero_weight_reduces_to_plain_laplacian(self):
        g = build_circle(1.0, None, 256)
        pd = operators.assemble_drift_laplacian(g)
        ps = operators.assemble_schrodinger(g)
        assert (pd.stiffness - ps.stiffness).nnz == 0
        assert_allclose(ps.mass_diag, pd.mass_diag, rtol=1e-14)

    def test_ou_potential_is_shifted_oscillator(self):
        # x^2/4 - 1/2: the +1/2 sign would shift the whole spectrum by one
        # and break the isospectrality with the drift operator.  The
        # discrete potential is second-order accurate, so the worst-case
        # mismatch must drop by about 4 under grid doubling.
        errs = []
        for n in (1025, 2049):
            g = build_interval(-6.0, 6.0, "neumann", lambda x: x * x / 2, n)
            ps = operators.assemble_schrodinger(g)
            kin = operators.assemble_schrodinger(
                build_interval(-6.0, 6.0, "neumann", None, n)
            ).stiffness
            x = ps.nodes
            potential = (ps.stiffness - kin).diagonal() / ps.mass_diag
            errs.append(np.abs(potential[1:-1] - (x**2 / 4 - 0.5)[1:-1]).max())
        assert errs[0] <= 1e-3
        assert 3.3 <= errs[0] / errs[1] <= 4.7
        g = build_interval(-6.0, 6.0, "neumann", lambda x: x * x / 2, 1025)
        sd = solve_lowest(operators.assemble_drift_laplacian(g), 5, seed=SEED)
        ss = solve_lowest(operators.assemble_schrodinger(g), 5, seed=SEED)
        assert_allclose(ss.eigenvalues, sd.eigenvalues, atol=1e-9)

    def test_circle_cos_spectra_agree(self):
        g = build_circle(1.0, lambda t: np.cos(t), 1024)
        sd = solve_lowest(operators.assemble_drift_laplacian(g), 10, seed=SEED)
        ss = solve_lowest(operators.assemble_schrodinger(g), 10, seed=SEED)
        rel = np.abs(sd.eigenvalues - ss.eigenvalues) / np.maximum(np.abs(ss.eigenvalues), 1.0)
        assert rel.max() <= 1e-9

    def test_sphere_mode_spectra_agree(self):
        g = build_sphere_symmetric(1.0, lambda t: 0.3 * np.cos(t), 512, 2)
        for pd, ps in zip(
            operators.assemble_drift_laplacian(g), operators.assemble_schrodinger(g)
        ):
            sd = solve_lowest(pd, 4, seed=SEED)
            ss = solve_lowest(ps, 4, seed=SEED)
            assert_allclose(ss.eigenvalues, sd.eigenvalues, atol=1e-8)


class TestConjugationCheck:
    def test_zero_weight_deviation_vanishes(self):
        g = build_circle(1.0, None, 256)
        dev = operators.discrete_conjugation_check(
            operators.assemble_drift_laplacian(g), operators.assemble_schrodinger(g)
        )
        assert dev <= 1e-12

    def test_centered_potential_second_order_on_circle(self):
        devs = []
        for n in (512, 1024):
            g = build_circle(1.0, lambda t: np.cos(t), n)
            devs.append(
                operators.discrete_conjugation_check(
                    operators.assemble_drift_laplacian(g),
                    operators.assemble_schrodinger(g, potential=operators.POTENTIAL_CENTERED),
                )
            )
        assert 3.3 <= devs[0] / devs[1] <= 4.7

    def test_centered_potential_second_order_on_interval(self):
        devs = []
        for n in (513, 1025):
            g = build_interval(-6, 6, "neumann", lambda x: x * x / 2, n)
            devs.append(
                operators.discrete_conjugation_check(
                    operators.assemble_drift_laplacian(g),
                    operators.assemble_schrodinger(g, potential=operators.POTENTIAL_CENTERED),
                )
            )
        assert 3.3 <= devs[0] / devs[1] <= 4.7

    def test_mismatched_grids_rejected(self):
        g1 = build_circle(1.0, None, 256)
        g2 = build_circle(1.0, None, 128)
        with pytest.raises(AssemblyError, match="matching"):
            operators.discrete_conjugation_check(
                operators.assemble_drift_laplacian(g1), operators.assemble_schrodinger(g2)
            )


class TestBochner:
    def test_flat_circle_cosine_second_order(self):
        res = []
        for n in (256, 512):
            g = build_circle(1.0, None, n)
            res.append(operators.bochner_residual(g, np.cos(g.node_coords)))
        assert 3.0 <= res[0] / res[1] <= 5.0

    def test_weighted_circle_second_order(self):
        res = []
        for n in (512, 1024):
            g = build_circle(1.0, lambda t: np.cos(t), n)
            res.append(operators.bochner_residual(g, np.sin(2 * g.node_coords)))
        assert 3.3 <= res[0] / res[1] <= 4.7

    def test_constant_function_machine_zero(self):
        g = build_circle(1.0, lambda t: np.cos(t), 256)
        assert operators.bochner_residual(g, np.ones(g.n_nodes)) <= 1e-13

    def test_coarse_grid_rejected(self):
        g = build_interval(0, 1, "neumann", None, 32)
        with pytest.raises(GeometryError, match="64"):
            operators.bochner_residual(g, np.zeros(32))

    def test_sphere_rejected(self):
        g = build_sphere_symmetric(1.0, None, 128, 1)
        with pytest.raises(GeometryError, match="1-D"):
            operators.bochner_residual(g, np.zeros(128))


def test_export_matrix_coo_roundtrip(tmp_path):
    g = build_interval(0, 1, "neumann", None, 16)
    p = operators.assemble_drift_laplacian(g)
    path = tmp_path / "matrix.txt"
    operators.export_matrix_coo(p.stiffness, path)
    rows = np.loadtxt(path)
    rebuilt = np.zeros((p.dim, p.dim))
    for r, c, v in rows:
        rebuilt[int(r), int(c)] = v
    assert_allclose(rebuilt, p.stiffness.toarray(), rtol=0, atol=0)
