"""Tests for metric-core: charts, metric fields, frames and quadrature."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nicurv.geometry.catalog import flat_torus, hyperbolic_product
from nicurv.geometry.metric import (
    Axis,
    Chart,
    ConstantMetric,
    DerivativeOptions,
    GeometryError,
    NotPositiveDefinite,
    OutOfDomain,
    SampledMetric,
    StencilOutOfDomain,
    WarpedMetric,
    WarpedRegion,
    WarpProfile,
    integrate_density,
    metric_at,
    metric_derivatives,
    orthonormal_frame,
    randomized_spd,
    tensor_grid,
)


def cusp_chart_3d(lo=-1.0, hi=2.0):
    """Build a 3D cusp chart over [lo, hi] x T^2."""
    return Chart((
        Axis("t", lo, hi),
        Axis("x", 0.0, 1.0, periodic=True),
        Axis("y", 0.0, 1.0, periodic=True),
    ))


class TestChart:
    """Chart validation and coordinate wrapping."""

    def test_periodic_coordinates_wrap(self):
        """Periodic axes wrap into [lo, hi)."""
        chart = Chart.torus(period=1.0)
        assert_allclose(chart.wrap([1.25, -0.25, 3.0, 0.5]),
                        [0.25, 0.75, 0.0, 0.5], atol=1e-15)

    def test_interval_coordinate_outside_raises(self):
        """A point past an interval end is rejected."""
        with pytest.raises(OutOfDomain):
            cusp_chart_3d().wrap([2.5, 0.0, 0.0])

    def test_dimension_must_be_3_or_4(self):
        """Two axes are not a supported chart."""
        with pytest.raises(GeometryError):
            Chart((Axis("a", 0, 1), Axis("b", 0, 1)))

    def test_empty_axis_rejected(self):
        """The upper end must exceed the lower."""
        with pytest.raises(GeometryError):
            Chart((Axis("t", 1, 1), Axis("x", 0, 1), Axis("y", 0, 1)))


class TestMetricAt:
    """Point evaluation of metric components."""

    def test_euclidean_is_identity(self):
        """The flat metric is the identity everywhere."""
        assert_allclose(metric_at(flat_torus(), [0.1, 2.0, 3.0, 4.0]),
                        np.eye(4))

    def test_unit_cusp_at_t1(self):
        """dt^2 + e^(-2t) g_e at t = 1 is diag(1, e^-2, e^-2)."""
        m = WarpedMetric(cusp_chart_3d(), WarpProfile.exponential(1.0))
        assert_allclose(metric_at(m, [1.0, 0.3, 0.7]),
                        np.diag([1.0, math.exp(-2.0), math.exp(-2.0)]),
                        rtol=1e-14)

    def test_scaled_cusp_at_origin(self):
        """c^2 g_H with c = 2 at t = 0 is diag(1, 4, 4)."""
        m = WarpedMetric(cusp_chart_3d(), WarpProfile.exponential(2.0))
        assert_allclose(metric_at(m, [0.0, 0.0, 0.0]), np.diag([1, 4, 4]),
                        rtol=1e-14)

    def test_not_positive_definite_raises(self):
        """An indefinite constant matrix is reported, not returned."""
        m = ConstantMetric(Chart.torus(), np.diag([1.0, 1.0, 1.0, -1.0]))
        with pytest.raises(NotPositiveDefinite):
            metric_at(m, [0, 0, 0, 0])

    def test_sampled_interpolation_matches_nodes(self):
        """Multilinear interpolation is exact at grid nodes."""
        base = WarpedMetric(cusp_chart_3d(), WarpProfile.exponential(1.0))
        sampled = SampledMetric.from_metric(base, (31, 4, 4))
        node = sampled.grid_node((10, 1, 2))
        assert_allclose(metric_at(sampled, node), metric_at(base, node),
                        rtol=1e-13)


class TestMetricDerivatives:
    """Analytic and finite-difference metric jets."""

    def test_flat_metric_has_no_derivatives(self):
        """Both derivative orders vanish for constant components."""
        jet = metric_derivatives(flat_torus(), [1.0, 2.0, 3.0, 4.0])
        assert np.all(jet.first == 0.0)
        assert np.all(jet.second == 0.0)

    def test_cusp_first_derivative(self):
        """d_t g_22 = -2 at t = 0 for dt^2 + e^(-2t) g_e."""
        m = WarpedMetric(cusp_chart_3d(), WarpProfile.exponential(1.0))
        jet = metric_derivatives(m, [0.0, 0.5, 0.5], order=1)
        assert jet.first[0, 1, 1] == pytest.approx(-2.0, rel=1e-14)
        assert jet.second is None

    def test_sampled_cusp_first_derivative(self):
        """Grid spacing 1e-2 recovers d_t g_22 = -2 to O(h^2)."""
        m = WarpedMetric(cusp_chart_3d(-1.0, 1.0),
                         WarpProfile.exponential(1.0))
        sampled = SampledMetric.from_metric(m, (201, 4, 4))
        jet = metric_derivatives(sampled, [0.0, 0.0, 0.0])
        assert jet.first[0, 1, 1] == pytest.approx(-2.0, abs=1e-3)

    def test_sampled_metric_off_grid_raises(self):
        """Sampled metrics are differentiated on grid nodes only."""
        m = WarpedMetric(cusp_chart_3d(-1.0, 1.0),
                         WarpProfile.exponential(1.0))
        sampled = SampledMetric.from_metric(m, (21, 4, 4))
        with pytest.raises(StencilOutOfDomain):
            metric_derivatives(sampled, [0.013, 0.0, 0.0])

    def test_stencil_leaving_chart_raises(self):
        """A stencil reaching past an interval end is an error."""
        m = WarpedMetric(cusp_chart_3d(0.0, 1.0),
                         WarpProfile.exponential(1.0))
        with pytest.raises(StencilOutOfDomain):
            metric_derivatives(
                m, [0.0, 0.5, 0.5],
                options=DerivativeOptions(finite_difference=True),
            )

    @pytest.mark.parametrize("order,steps", [
        (2, (0.1, 0.05, 0.025)),
        (4, (0.2, 0.1, 0.05)),
    ])
    def test_convergence_order(self, order, steps):
        """Finite differences converge at the nominal stencil order."""
        m = hyperbolic_product()
        x = [0.3, 0.2, 0.4, 1.0]
        exact = metric_derivatives(m, x).second[0, 0, 1, 1]
        errors = []
        for h in steps:
            options = DerivativeOptions(stencil_order=order, step=h,
                                        finite_difference=True)
            fd = metric_derivatives(m, x, options=options).second
            errors.append(abs(fd[0, 0, 1, 1] - exact))
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert slope == pytest.approx(order, rel=0.1)

    def test_richardson_improves_order_two(self):
        """Richardson extrapolation beats the plain order-2 stencil."""
        m = hyperbolic_product()
        x = [0.3, 0.2, 0.4, 1.0]
        exact = metric_derivatives(m, x).second
        plain = DerivativeOptions(step=0.05, finite_difference=True)
        rich = DerivativeOptions(step=0.05, finite_difference=True,
                                 richardson=True)
        err_plain = np.max(np.abs(
            metric_derivatives(m, x, options=plain).second - exact))
        err_rich = np.max(np.abs(
            metric_derivatives(m, x, options=rich).second - exact))
        assert err_rich < 0.1 * err_plain


class TestOrthonormalFrame:
    """Gram-Schmidt frames in axis order."""

    def test_identity_metric(self):
        """The coordinate basis is already orthonormal."""
        assert_allclose(orthonormal_frame(flat_torus(), [0, 0, 0, 0]),
                        np.eye(4), atol=1e-15)

    def test_diagonal_metric(self):
        """diag(1, 4, 4, 1) gives scalings (1, 1/2, 1/2, 1)."""
        m = flat_torus(np.diag([1.0, 4.0, 4.0, 1.0]))
        assert_allclose(orthonormal_frame(m, [0, 0, 0, 0]),
                        np.diag([1.0, 0.5, 0.5, 1.0]), atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_spd_gram_is_identity(self, seed):
        """F^T g F = I to 1e-12 for random SPD metrics."""
        g = randomized_spd(np.random.default_rng(seed))
        frame = orthonormal_frame(flat_torus(g), [0, 0, 0, 0])
        assert_allclose(frame.T @ g @ frame, np.eye(4), atol=1e-12)
        assert_allclose(frame, np.triu(frame), atol=1e-15)


class TestIntegrateDensity:
    """Riemannian quadrature on charts and warped regions."""

    def test_unit_flat_torus_volume(self):
        """Constant 1 over the unit flat 4-torus integrates to 1."""
        m = flat_torus(chart=Chart.torus(period=1.0))
        value = integrate_density(m, lambda x: 1.0, nodes=3)
        assert value == pytest.approx(1.0, rel=1e-14)

    def test_cusp_volume(self):
        """Vol([0, T] x T^2, g_H) = (1 - e^(-2T)) / 2."""
        T = 3.0
        region = WarpedRegion(WarpProfile.exponential(1.0), (0.0, T))
        value = integrate_density(region, np.ones_like, nodes=10001)
        assert value == pytest.approx(0.5 * (1.0 - math.exp(-2.0 * T)),
                                      rel=1e-8)

    @pytest.mark.parametrize("c", [2.0, 8.0])
    def test_scaled_cusp_scalar_integral(self, c):
        """Scalar total over [0, T] x T^2 of c^2 g_H is -3c (1 - e^(-2T/c))."""
        T = 5.0
        region = WarpedRegion(WarpProfile.exponential(c), (0.0, T))
        value = integrate_density(
            region, lambda t: np.full_like(t, -6.0 / c ** 2), nodes=10001
        )
        expected = -3.0 * c * (1.0 - math.exp(-2.0 * T / c))
        assert value == pytest.approx(expected, rel=1e-8)

    def test_chart_integral_on_sub_interval(self):
        """A sub-interval of a cusp chart matches the warped closed form."""
        m = WarpedMetric(cusp_chart_3d(0.0, 2.0),
                         WarpProfile.exponential(1.0))
        value = integrate_density(m, lambda x: 1.0,
                                  region=[(0.0, 1.0), None, None],
                                  nodes=[401, 2, 2])
        assert value == pytest.approx(0.5 * (1.0 - math.exp(-2.0)),
                                      rel=1e-9)


class TestTensorGrid:
    """Regular grid points."""

    def test_periodic_axes_exclude_endpoint(self):
        """Four nodes on a circle of period 1 sit at multiples of 1/4."""
        pts = tensor_grid(Chart.torus(period=1.0), (4, 1, 1, 1))
        assert_allclose([p[0] for p in pts], [0.0, 0.25, 0.5, 0.75])

    def test_lexicographic_order(self):
        """The last axis runs fastest."""
        pts = tensor_grid(Chart.torus(period=1.0), (2, 1, 1, 2))
        assert_allclose([p[3] for p in pts], [0.0, 0.5, 0.0, 0.5])
        assert_allclose([p[0] for p in pts], [0.0, 0.0, 0.5, 0.5])
