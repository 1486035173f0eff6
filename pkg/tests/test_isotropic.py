"""Tests for isotropic curvature, the NIC verdict and sigma fields."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nicurv.geometry.catalog import (
    flat_torus,
    hyperbolic_product,
    kahler_product,
    round_sphere,
)
from nicurv.geometry.curvature import (
    CurvaturePointData,
    constant_curvature_tensor,
    curvature_at,
)
from nicurv.geometry.isotropic import (
    FrameNotOrthonormal,
    IsotropicPlane,
    RoutesDisagree,
    SearchBudget,
    Verdict,
    batched_isotropic,
    classify,
    constant_curvature_data,
    coordinate_ascent,
    criterion_crosscheck,
    extremal_isotropic,
    haar_frames,
    isotropic_curvature,
    isotropic_curvature_complex,
    isotropic_curvature_real,
    random_curvature_tensor,
    sigma_field,
)
from nicurv.geometry.metric import Axis, Chart

SMALL = SearchBudget(64, 16)
seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_plane(rng):
    """Draw one Haar-random isotropic plane."""
    return IsotropicPlane(haar_frames(rng, 1)[0])


class TestIsotropicPlane:
    """Orthonormal frames and isotropy of v, w."""

    def test_haar_frames_orthonormal(self):
        """Every sampled frame is orthogonal."""
        frames = haar_frames(np.random.default_rng(0), 50)
        for f in frames:
            assert_allclose(f.T @ f, np.eye(4), atol=1e-12)

    def test_isotropy_by_construction(self):
        """<v,v> = <w,w> = <v,w> = 0 under the bilinear extension."""
        plane = random_plane(np.random.default_rng(1))
        assert plane.isotropy_defect() <= 1e-12

    def test_non_orthonormal_frame_rejected(self):
        """A scaled frame raises FrameNotOrthonormal."""
        with pytest.raises(FrameNotOrthonormal):
            IsotropicPlane(2.0 * np.eye(4))

    def test_wrong_shape_rejected(self):
        """Frames must be 4x4."""
        with pytest.raises(FrameNotOrthonormal):
            IsotropicPlane(np.eye(3))

    def test_from_coordinates(self):
        """Coordinate vectors of an orthonormal frame map to the frame."""
        data = curvature_at(flat_torus(np.diag([4.0, 1.0, 1.0, 1.0])),
                            [0, 0, 0, 0])
        plane = IsotropicPlane.from_coordinates(data.frame, data)
        assert_allclose(plane.frame, np.eye(4), atol=1e-14)


class TestIsotropicCurvature:
    """The two evaluation routes and the anchor values."""

    def test_flat_is_zero(self):
        """Any plane of a flat metric has K = 0."""
        data = curvature_at(flat_torus(), [0, 0, 0, 0])
        plane = random_plane(np.random.default_rng(2))
        assert isotropic_curvature(data, plane) == pytest.approx(0.0,
                                                                 abs=1e-14)

    def test_sphere_is_four(self):
        """Every isotropic plane of S^4 has K = 4."""
        data = curvature_at(round_sphere(), [0.3, -0.2, 0.5, 0.1])
        rng = np.random.default_rng(3)
        for _ in range(20):
            assert isotropic_curvature(data, random_plane(rng)) == \
                pytest.approx(4.0, abs=1e-8)

    def test_hyperbolic_product_is_minus_two(self):
        """Every frame of H^3 x S^1 gives K = -2."""
        data = curvature_at(hyperbolic_product(), [0.1, 0.2, 0.3, 0.4])
        frames = haar_frames(np.random.default_rng(4), 1000)
        assert_allclose(batched_isotropic(data.r_op, frames), -2.0,
                        atol=1e-8)

    @given(seed=seeds)
    @settings(max_examples=50, deadline=None, derandomize=True)
    def test_routes_agree_on_random_pairs(self, seed):
        """Complex and real routes agree to 1e-10."""
        rng = np.random.default_rng(seed)
        data = CurvaturePointData.from_riemann(random_curvature_tensor(rng))
        plane = random_plane(rng)
        assert isotropic_curvature_complex(data, plane) == \
            pytest.approx(isotropic_curvature_real(data, plane), abs=1e-10)

    def test_bianchi_violation_raises(self):
        """A pure R_0123 tensor splits the two routes."""
        r = np.zeros((4, 4, 4, 4))
        for idx in [(0, 1, 2, 3), (1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)]:
            r[idx] = 1.0
        for idx in [(1, 0, 2, 3), (0, 1, 3, 2), (3, 2, 0, 1), (2, 3, 1, 0)]:
            r[idx] = -1.0
        data = CurvaturePointData.from_riemann(r)
        plane = IsotropicPlane(np.eye(4))
        assert isotropic_curvature_real(data, plane) == pytest.approx(-2.0)
        with pytest.raises(RoutesDisagree, match="routes disagree"):
            isotropic_curvature(data, plane)

    @given(seed=seeds)
    @settings(max_examples=25, deadline=None, derandomize=True)
    def test_batched_matches_single(self, seed):
        """The batched evaluator reproduces plane-by-plane values."""
        rng = np.random.default_rng(seed)
        data = CurvaturePointData.from_riemann(random_curvature_tensor(rng))
        frames = haar_frames(rng, 10)
        expected = [isotropic_curvature_complex(data, IsotropicPlane(f))
                    for f in frames]
        assert_allclose(batched_isotropic(data.r_op, frames), expected,
                        atol=1e-12)

    @given(seed=seeds, theta=st.floats(-math.pi, math.pi))
    @settings(max_examples=50, deadline=None, derandomize=True)
    def test_phase_rotation_invariance(self, seed, theta):
        """e^(i theta) v spans the same plane: K is unchanged."""
        rng = np.random.default_rng(seed)
        data = CurvaturePointData.from_riemann(random_curvature_tensor(rng))
        frame = haar_frames(rng, 1)[0]
        rotated = frame.copy()
        c, s = math.cos(theta), math.sin(theta)
        rotated[:, 0] = c * frame[:, 0] - s * frame[:, 1]
        rotated[:, 1] = s * frame[:, 0] + c * frame[:, 1]
        assert isotropic_curvature(data, IsotropicPlane(rotated)) == \
            pytest.approx(isotropic_curvature(data, IsotropicPlane(frame)),
                          abs=1e-10)

    @given(seed=seeds)
    @settings(max_examples=50, deadline=None, derandomize=True)
    def test_swap_v_and_w_invariance(self, seed):
        """Exchanging the roles of v and w leaves K unchanged."""
        rng = np.random.default_rng(seed)
        data = CurvaturePointData.from_riemann(random_curvature_tensor(rng))
        frame = haar_frames(rng, 1)[0]
        swapped = frame[:, [2, 3, 0, 1]]
        assert isotropic_curvature(data, IsotropicPlane(swapped)) == \
            pytest.approx(isotropic_curvature(data, IsotropicPlane(frame)),
                          abs=1e-10)


class TestSearch:
    """Coordinate ascent and the extremal search."""

    @given(seed=seeds)
    @settings(max_examples=25, deadline=None, derandomize=True)
    def test_ascent_never_decreases(self, seed):
        """Coordinate ascent improves on its starting frame."""
        rng = np.random.default_rng(seed)
        data = CurvaturePointData.from_riemann(random_curvature_tensor(rng))
        frame = haar_frames(rng, 1)[0]
        start = batched_isotropic(data.r_op, frame[None])[0]
        best, end = coordinate_ascent(data.r_op, frame, 8)
        assert best >= start - 1e-12
        assert_allclose(end.T @ end, np.eye(4), atol=1e-10)

    @pytest.mark.parametrize("seed", range(5))
    def test_search_reaches_spectral_extremes(self, seed):
        """k_max = 2 q_max and k_min = 2 q_min on random tensors."""
        r = random_curvature_tensor(np.random.default_rng([seed, 99]))
        v = extremal_isotropic(CurvaturePointData.from_riemann(r), SMALL,
                               seed=seed)
        assert v.k_min <= v.k_max
        assert v.search_gap <= 1e-6

    def test_seed_and_index_determine_result(self):
        """Identical (seed, index) streams give identical results."""
        data = CurvaturePointData.from_riemann(
            random_curvature_tensor(np.random.default_rng(12)))
        a = extremal_isotropic(data, SMALL, seed=3, index=4)
        b = extremal_isotropic(data, SMALL, seed=3, index=4)
        assert (a.k_min, a.k_max) == (b.k_min, b.k_max)

    def test_budget_doubles(self):
        """The reported budget is at least the doubled starting budget."""
        v = extremal_isotropic(constant_curvature_data(1.0), SMALL)
        assert v.budget.samples >= 2 * SMALL.samples
        assert v.stable


class TestVerdict:
    """NIC / PIC / INDEFINITE classification and the anchors."""

    @pytest.mark.parametrize("k_min,k_max,expected", [
        (-3.0, -1.0, Verdict.NIC),
        (1.0, 2.0, Verdict.PIC),
        (-1.0, 1.0, Verdict.INDEFINITE),
        (-1.0, -1e-12, Verdict.INDEFINITE),
        (1e-12, 1.0, Verdict.INDEFINITE),
    ])
    def test_classify(self, k_min, k_max, expected):
        """Values within the tolerance band count as zero."""
        assert classify(k_min, k_max) is expected

    def test_sphere_is_pic(self):
        """S^4: k_min = 4, verdict PIC."""
        data = curvature_at(round_sphere(), [0.1, 0.2, 0.3, 0.4])
        v = extremal_isotropic(data, SMALL)
        assert v.k_min == pytest.approx(4.0, abs=1e-6)
        assert v.verdict is Verdict.PIC

    def test_hyperbolic_product_is_nic(self):
        """H^3 x S^1: k_max = -2, sigma = -1, q_max = -1, NIC."""
        data = curvature_at(hyperbolic_product(), [0.5, 0.1, 0.2, 0.3])
        v = extremal_isotropic(data, SMALL)
        assert v.k_max == pytest.approx(-2.0, abs=1e-6)
        assert v.sigma == pytest.approx(-1.0, abs=1e-6)
        assert v.q_max == pytest.approx(-1.0, abs=1e-6)
        assert v.verdict is Verdict.NIC

    def test_kahler_never_nic(self):
        """A Kaehler product attains k_max = 0."""
        data = curvature_at(kahler_product(), [0.3, 0.2, -0.4, 0.7])
        v = extremal_isotropic(data, SMALL)
        assert v.k_max == pytest.approx(0.0, abs=1e-6)
        assert v.verdict is not Verdict.NIC

    @pytest.mark.parametrize("kappa", [-2.0, -0.5, 0.5, 3.0])
    def test_scaling_keeps_verdict(self, kappa):
        """K scales with the curvature; the verdict only sees its sign."""
        v = extremal_isotropic(constant_curvature_data(kappa), SMALL)
        assert v.k_max == pytest.approx(4.0 * kappa, rel=1e-8)
        assert v.verdict is (Verdict.NIC if kappa < 0 else Verdict.PIC)

    @given(seed=seeds)
    @settings(max_examples=30, deadline=None, derandomize=True)
    def test_sigma_negative_implies_nic(self, seed):
        """Negative sigma forces k_max < 0."""
        rng = np.random.default_rng(seed)
        r = random_curvature_tensor(rng) + constant_curvature_tensor(-2.0)
        v = extremal_isotropic(CurvaturePointData.from_riemann(r), SMALL)
        if v.sigma < 0.0:
            assert v.k_max < 0.0
        assert v.q_max <= v.sigma + 1e-12


class TestSigmaField:
    """sigma_mu = mu s + |W| on quadrature grids."""

    @pytest.fixture
    def cusp(self):
        """Cusp region of H^3 x S^1."""
        chart = Chart((
            Axis("t", 0.0, 1.0),
            Axis("x", 0.0, 1.0, periodic=True),
            Axis("y", 0.0, 1.0, periodic=True),
            Axis("theta", 0.0, 1.0, periodic=True),
        ))
        return hyperbolic_product(chart=chart)

    def test_flat_is_zero(self):
        """sigma_mu vanishes on a flat torus for any mu."""
        field = sigma_field(flat_torus(), 0.7, nodes=2)
        assert_allclose(field.values, 0.0, atol=1e-14)
        assert field.integral == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("mu,expected", [(1.0 / 6.0, -1.0), (1.0, -6.0)])
    def test_hyperbolic_product(self, cusp, mu, expected):
        """sigma_mu = -6 mu on H^3 x S^1."""
        field = sigma_field(cusp, mu, region=[(0.2, 0.8), None, None, None],
                            nodes=[9, 2, 2, 2])
        assert_allclose(field.values, expected, atol=1e-8)
        volume = 0.5 * (math.exp(-0.4) - math.exp(-1.6))
        assert field.integral == pytest.approx(expected * volume, rel=1e-4)

    def test_mu_must_be_positive(self, cusp):
        """A non-positive mu is rejected."""
        with pytest.raises(Exception, match="mu must be positive"):
            sigma_field(cusp, 0.0)


class TestCriterionCrosscheck:
    """The spectral criterion against the frame search."""

    def test_constant_curvature_full_agreement(self):
        """W = 0: both criteria reduce to the sign of s."""
        tensors = [constant_curvature_data(k).riemann
                   for k in (-1.0, -0.2, 0.4, 2.0)]
        report = criterion_crosscheck(len(tensors), 0, SMALL, tensors)
        assert report.agreement_rate == 1.0
        assert report.agreement == ((2, 0), (0, 2))
        assert not report.counterexamples

    def test_random_tensors_sufficiency(self):
        """Sufficiency sigma < 0 => k_max < 0 holds on every tensor."""
        report = criterion_crosscheck(40, seed=1, budget=SMALL)
        assert report.count == 40
        assert not report.sufficiency_failures
        assert sum(map(sum, report.agreement)) == 40
        assert report.max_search_gap <= 1e-6

    @pytest.mark.slow
    def test_ten_thousand_tensors(self):
        """Sufficiency on 10^4 random tensors."""
        report = criterion_crosscheck(10_000, seed=0, budget=SMALL)
        assert not report.sufficiency_failures
