"""Tests for the curvature engine and the operators on bivectors."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nicurv.geometry.catalog import (
    flat_torus,
    hyperbolic_product,
    round_sphere,
    trig_torus,
)
from nicurv.geometry.curvature import (
    PAIRS,
    CurvaturePointData,
    bivector_operator,
    constant_curvature_tensor,
    conformal_scale_check,
    curvature_at,
    lambda2_operator,
    laplacian,
    symmetry_defects,
    weyl_decompose,
)
from nicurv.geometry.isotropic import random_curvature_tensor
from nicurv.geometry.metric import (
    ConformalMetric,
    DerivativeOptions,
    ScalarField,
    randomized_spd,
)

SPHERE_POINTS = [[0.0, 0.0, 0.0, 0.0], [0.3, -0.2, 0.5, 0.1],
                 [1.0, 1.0, -1.0, 0.5]]
CUSP_POINTS = [[0.0, 0.1, 0.2, 0.3], [-1.3, 0.7, 0.4, 5.0]]
seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestAnchors:
    """Constant-curvature and flat reference metrics."""

    def test_flat_torus_is_flat(self):
        """Every curvature entry of a constant metric vanishes."""
        g = randomized_spd(np.random.default_rng(3))
        data = curvature_at(flat_torus(g), [1.0, 2.0, 3.0, 4.0])
        assert np.max(np.abs(data.riemann)) <= 1e-12
        assert data.scalar == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("x", SPHERE_POINTS)
    def test_unit_sphere(self, x):
        """S^4: s = 12, every sectional curvature 1, W = 0."""
        data = curvature_at(round_sphere(), x)
        assert data.scalar == pytest.approx(12.0, abs=1e-6)
        assert data.weyl_norm <= 1e-8
        for a, b in PAIRS:
            assert data.sectional(a, b) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("x", CUSP_POINTS)
    def test_hyperbolic_times_circle(self, x):
        """H^3 x S^1: s = -6 and conformally flat."""
        data = curvature_at(hyperbolic_product(), x)
        assert data.scalar == pytest.approx(-6.0, abs=1e-6)
        assert data.weyl_norm <= 1e-8
        assert data.sectional(0, 1) == pytest.approx(-1.0, abs=1e-10)
        assert data.sectional(0, 3) == pytest.approx(0.0, abs=1e-10)

    def test_sphere_matches_constant_curvature_tensor(self):
        """R_abcd = delta_ac delta_bd - delta_ad delta_bc on S^4."""
        data = curvature_at(round_sphere(), SPHERE_POINTS[1])
        assert_allclose(data.riemann, constant_curvature_tensor(1.0),
                        atol=1e-10)

    def test_flip_sign_negates(self):
        """The negative control turns the sphere into s = -12."""
        data = curvature_at(round_sphere(), SPHERE_POINTS[1],
                            flip_sign=True)
        assert data.scalar == pytest.approx(-12.0, abs=1e-6)

    def test_sphere_with_finite_differences(self):
        """Order-4 stencils reproduce the sphere anchor."""
        options = DerivativeOptions(stencil_order=4, step=1e-2,
                                    finite_difference=True)
        data = curvature_at(round_sphere(), SPHERE_POINTS[1], options)
        assert data.scalar == pytest.approx(12.0, abs=1e-5)


class TestSymmetries:
    """Algebraic symmetries of R and W on a generic metric."""

    @pytest.fixture
    def data(self):
        """Curvature data of a generic trig torus."""
        return curvature_at(trig_torus(seed=1), [0.4, 1.3, 2.2, 5.0])

    def test_riemann_symmetries(self, data):
        """Antisymmetry, pair symmetry and first Bianchi hold."""
        defects = symmetry_defects(data.riemann)
        assert max(defects.values()) <= 1e-10

    def test_weyl_trace_free(self, data):
        """Every contraction of W vanishes."""
        assert_allclose(np.einsum("abad->bd", data.weyl), 0.0, atol=1e-10)

    def test_weyl_operator_symmetric_traceless(self, data):
        """W_op is symmetric with zero trace."""
        assert_allclose(data.w_op, data.w_op.T, atol=1e-12)
        assert np.trace(data.w_op) == pytest.approx(0.0, abs=1e-10)

    def test_generic_metric_not_conformally_flat(self, data):
        """The trigonometric torus carries Weyl curvature."""
        assert data.weyl_norm > 1e-3


class TestWeylDecompose:
    """Ricci decomposition of random algebraic curvature tensors."""

    @given(seed=seeds)
    @settings(max_examples=50, deadline=None, derandomize=True)
    def test_random_tensor_trace_free(self, seed):
        """W is trace-free to 1e-12 and |W| >= 2 rho(W_op)."""
        r = random_curvature_tensor(np.random.default_rng(seed))
        data = CurvaturePointData.from_riemann(r)
        parts = weyl_decompose(data)
        assert_allclose(np.einsum("abad->bd", parts.weyl), 0.0, atol=1e-12)
        rho = np.max(np.abs(np.linalg.eigvalsh(parts.op)))
        assert parts.norm >= 2.0 * rho - 1e-12

    def test_norm_is_twice_frobenius(self):
        """|W|^2 in the tensor norm equals 4 ||W_op||_F^2."""
        r = random_curvature_tensor(np.random.default_rng(11))
        parts = weyl_decompose(CurvaturePointData.from_riemann(r))
        assert parts.norm == pytest.approx(
            2.0 * np.linalg.norm(parts.op), rel=1e-12)

    def test_constant_curvature_has_no_weyl(self):
        """W = 0 for any constant-curvature tensor."""
        data = CurvaturePointData.from_riemann(
            constant_curvature_tensor(-0.7))
        assert data.weyl_norm == pytest.approx(0.0, abs=1e-14)


class TestLambda2Operator:
    """R_op, W_op and Q = (s/6) I - W_op."""

    def test_sphere_operator_is_identity(self):
        """R_op = I for the unit sphere; Q = 2 I."""
        data = curvature_at(round_sphere(), SPHERE_POINTS[1])
        ops = lambda2_operator(data)
        assert_allclose(ops.r_op, np.eye(6), atol=1e-8)
        assert_allclose(ops.q_eigenvalues, np.full(6, 2.0), atol=1e-8)

    def test_operator_entries_are_components(self):
        """<Op(e_a ^ e_b), e_c ^ e_d> = T_abcd."""
        r = random_curvature_tensor(np.random.default_rng(5))
        op = bivector_operator(r)
        for i, (a, b) in enumerate(PAIRS):
            for j, (c, d) in enumerate(PAIRS):
                assert op[i, j] == r[a, b, c, d]

    @given(seed=seeds)
    @settings(max_examples=100, deadline=None, derandomize=True)
    def test_q_eigenvalues_bounded_by_sigma(self, seed):
        """Every eigenvalue of Q is at most s/6 + |W|."""
        r = random_curvature_tensor(np.random.default_rng(seed))
        data = CurvaturePointData.from_riemann(r)
        q = lambda2_operator(data).q_eigenvalues
        assert q[-1] <= data.sigma() + 1e-12
        assert np.all(np.diff(q) >= 0.0)


class TestScaling:
    """Behaviour under constant and non-constant conformal changes."""

    def test_constant_rescaling(self):
        """c^2 g scales R, s and |W| by c^-2."""
        m = trig_torus(seed=2)
        x = [0.5, 1.5, 2.5, 3.5]
        c = 3.0
        base = curvature_at(m, x)
        scaled = curvature_at(
            ConformalMetric.from_factor(m, ScalarField.constant(c),
                                        power=2.0), x)
        assert scaled.scalar == pytest.approx(base.scalar / c ** 2,
                                              rel=1e-8)
        assert scaled.weyl_norm == pytest.approx(base.weyl_norm / c ** 2,
                                                 rel=1e-8)
        assert_allclose(scaled.r_op, base.r_op / c ** 2, atol=1e-10)

    def test_weyl_pointwise_conformal_invariance(self):
        """|W_{f^2 g}| = f^-2 |W_g| for a non-constant f."""
        m = trig_torus(seed=4)
        report = conformal_scale_check(
            m, ScalarField.exp_sin(axis=1, amplitude=0.3),
            [0.2, 0.9, 1.7, 4.1],
        )
        assert report.predicted > 0.0
        assert report.gap <= 1e-6


class TestLaplacian:
    """Coordinate Laplace-Beltrami operator."""

    def test_flat_laplacian_of_sine(self):
        """Delta (1 + eps sin x1) = -eps sin x1 on the flat torus."""
        x = [0.7, 0.0, 0.0, 0.0]
        value = laplacian(flat_torus(), x, ScalarField.one_plus_sin(0, 0.1))
        assert value == pytest.approx(-0.1 * np.sin(0.7), rel=1e-12)

    def test_constants_are_harmonic(self):
        """Delta of a constant vanishes on any metric."""
        value = laplacian(trig_torus(), [1.0, 2.0, 3.0, 4.0],
                          ScalarField.constant(2.0))
        assert value == pytest.approx(0.0, abs=1e-14)
