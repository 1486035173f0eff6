"""
Pointwise geometry suites (NC1xx): curvature anchors, algebraic
symmetries, the Q bound and the isotropic-curvature checks.
"""
from __future__ import annotations

import numpy as np

from nicurv.checks.base import BaseSuite, SuiteContext, SuiteResult
from nicurv.geometry.catalog import (
    flat_torus,
    hyperbolic_product,
    kahler_product,
    round_sphere,
    trig_torus,
)
from nicurv.geometry.curvature import (
    CurvaturePointData,
    conformal_scale_check,
    curvature_at,
    lambda2_operator,
    symmetry_defects,
)
from nicurv.geometry.isotropic import (
    IsotropicPlane,
    SearchBudget,
    Verdict,
    criterion_crosscheck,
    extremal_isotropic,
    haar_frames,
    isotropic_curvature_complex,
    isotropic_curvature_real,
    random_curvature_tensor,
)
from nicurv.geometry.metric import (
    Axis,
    Chart,
    DerivativeOptions,
    ScalarField,
    WarpedMetric,
    WarpProfile,
    randomized_spd,
)

SPHERE_POINTS = ([0.0, 0.0, 0.0, 0.0], [0.3, -0.2, 0.5, 0.1],
                 [1.0, 1.0, -1.0, 0.5])
CUSP_POINTS = ([0.0, 0.1, 0.2, 0.3], [-1.3, 0.7, 0.4, 5.0],
               [1.5, 0.25, 0.9, 2.0])
# the anchors need only a cheap search
ANCHOR_BUDGET = SearchBudget(64, 16)


def _anchor(points, metric, s_expected: float, flip: bool
            ) -> tuple[float, float]:
    s_err = w_max = 0.0
    for x in points:
        data = curvature_at(metric, x, flip_sign=flip)
        s_err = max(s_err, abs(data.scalar - s_expected))
        w_max = max(w_max, data.weyl_norm)
    return s_err, w_max


class SphereAnchor(BaseSuite):
    """Scalar curvature 12 and vanishing Weyl on the round sphere."""

    code = "NC101"
    name = "sphere-anchor"
    description = "unit S^4: s = 12 within 1e-6, |W| <= 1e-8"

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Evaluate s and |W| at a few sphere points."""
        s_err, w = _anchor(SPHERE_POINTS, round_sphere(), 12.0,
                           ctx.flip_sign)
        return self.result(s_err <= 1e-6 and w <= 1e-8, s_err,
                           f"max |s - 12| = {s_err:.3e}, max |W| = {w:.3e}")


class HyperbolicAnchor(BaseSuite):
    """Scalar curvature -6 and vanishing Weyl on H^3 x S^1."""

    code = "NC102"
    name = "hyperbolic-anchor"
    description = "unit H^3 x S^1: s = -6 within 1e-6, |W| <= 1e-8"

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Evaluate s and |W| at a few points of the product."""
        s_err, w = _anchor(CUSP_POINTS, hyperbolic_product(), -6.0,
                           ctx.flip_sign)
        return self.result(s_err <= 1e-6 and w <= 1e-8, s_err,
                           f"max |s + 6| = {s_err:.3e}, max |W| = {w:.3e}")


class FlatAnchor(BaseSuite):
    """Constant metrics on the torus are flat."""

    code = "NC103"
    name = "flat-anchor"
    description = "constant metrics on T^4: every curvature entry <= 1e-10"

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Take the largest curvature entry under both derivative modes."""
        rng = np.random.default_rng([ctx.seed, 103])
        worst = 0.0
        for options in (DerivativeOptions(),
                        DerivativeOptions(stencil_order=4,
                                          finite_difference=True)):
            m = flat_torus(randomized_spd(rng))
            data = curvature_at(m, rng.uniform(0.0, 6.0, 4), options,
                                flip_sign=ctx.flip_sign)
            worst = max(worst, float(np.max(np.abs(data.riemann))))
        return self.result(worst <= 1e-10, worst,
                           f"max |R_abcd| = {worst:.3e}")


class CurvatureSymmetries(BaseSuite):
    """Algebraic symmetries of the engine Riemann tensor."""

    code = "NC104"
    name = "curvature-symmetries"
    description = ("antisymmetry, pair symmetry and first Bianchi on a "
                   "generic torus metric, relative 1e-10")

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Take the worst symmetry defect at random points of a trig torus."""
        rng = np.random.default_rng([ctx.seed, 104])
        m = trig_torus(seed=ctx.seed)
        worst = 0.0
        for _ in range(5):
            data = curvature_at(m, rng.uniform(0.0, 2.0 * np.pi, 4))
            scale = max(1.0, float(np.max(np.abs(data.riemann))))
            worst = max(worst,
                        max(symmetry_defects(data.riemann).values()) / scale)
        return self.result(worst <= 1e-10, worst,
                           f"largest relative defect {worst:.3e}")


class WeylTraceless(BaseSuite):
    """The Weyl part is totally trace-free."""

    code = "NC105"
    name = "weyl-traceless"
    description = "every trace of W vanishes to 1e-10 (relative)"

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Take the largest relative Weyl trace."""
        rng = np.random.default_rng([ctx.seed, 105])
        m = trig_torus(seed=ctx.seed)
        worst = 0.0
        for _ in range(5):
            data = curvature_at(m, rng.uniform(0.0, 2.0 * np.pi, 4))
            scale = max(1.0, float(np.max(np.abs(data.riemann))))
            trace = np.einsum("abad->bd", data.weyl)
            worst = max(worst, float(np.max(np.abs(trace))) / scale)
        return self.result(worst <= 1e-10, worst,
                           f"max |W^a_bad| = {worst:.3e}")


class QBound(BaseSuite):
    """The spectral bound q_max <= sigma."""

    code = "NC106"
    name = "q-bound"
    description = "q_max <= sigma = s/6 + |W| on random curvature tensors"

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Take the largest excess of q_max over sigma."""
        worst = -np.inf
        for i in range(200):
            r = random_curvature_tensor(np.random.default_rng([ctx.seed, i]))
            data = CurvaturePointData.from_riemann(r)
            q_max = lambda2_operator(data).q_eigenvalues[-1]
            worst = max(worst, q_max - data.sigma())
        return self.result(worst <= 1e-12, worst,
                           f"max (q_max - sigma) = {worst:.3e}")


class IsotropicRoutes(BaseSuite):
    """Complex and real isotropic curvature agree."""

    code = "NC107"
    name = "isotropic-routes"
    description = ("complex and real isotropic curvature formulas agree "
                   "to 1e-10 on 1000 random (tensor, frame) pairs")

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Compare both routes on random tensors and frames."""
        rng = np.random.default_rng([ctx.seed, 107])
        frames = haar_frames(rng, 1000)
        worst = 0.0
        for frame in frames:
            data = CurvaturePointData.from_riemann(
                random_curvature_tensor(rng)
            )
            plane = IsotropicPlane(frame)
            scale = max(1.0, float(np.max(np.abs(data.r_op))))
            gap = abs(isotropic_curvature_complex(data, plane)
                      - isotropic_curvature_real(data, plane)) / scale
            worst = max(worst, gap)
        return self.result(worst <= 1e-10, worst,
                           f"max route gap {worst:.3e}")


class IsotropicAnchors(BaseSuite):
    """Isotropic curvature extremes on the sphere and H^3 x S^1."""

    code = "NC108"
    name = "isotropic-anchors"
    description = ("S^4: k = 4, PIC; H^3 x S^1: k_max = -2, sigma = -1, "
                   "NIC (1e-6)")

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Search both anchors and compare with the closed forms."""
        sphere = extremal_isotropic(
            curvature_at(round_sphere(), SPHERE_POINTS[1],
                         flip_sign=ctx.flip_sign),
            ANCHOR_BUDGET, ctx.seed,
        )
        cusp = extremal_isotropic(
            curvature_at(hyperbolic_product(), CUSP_POINTS[1],
                         flip_sign=ctx.flip_sign),
            ANCHOR_BUDGET, ctx.seed,
        )
        err = max(abs(sphere.k_min - 4.0), abs(sphere.k_max - 4.0),
                  abs(cusp.k_max + 2.0), abs(cusp.sigma + 1.0))
        ok = (err <= 1e-6 and sphere.verdict is Verdict.PIC
              and cusp.verdict is Verdict.NIC)
        return self.result(ok, err,
                           f"S^4 {sphere.verdict.value}, "
                           f"H^3xS^1 {cusp.verdict.value}")


class KahlerAnchor(BaseSuite):
    """A Kaehler product is never NIC."""

    code = "NC109"
    name = "kahler-anchor"
    description = "H^2 x H^2 (Kaehler): k_max >= -1e-6, never NIC"

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Search H^2 x H^2 and check k_max is not negative."""
        verdict = extremal_isotropic(
            curvature_at(kahler_product(), [0.3, 0.2, -0.4, 0.7],
                         flip_sign=ctx.flip_sign),
            ANCHOR_BUDGET, ctx.seed,
        )
        ok = verdict.k_max >= -1e-6 and verdict.verdict is not Verdict.NIC
        return self.result(ok, verdict.k_max,
                           f"k_max = {verdict.k_max:.3e} "
                           f"({verdict.verdict.value})")


class CriterionCrosscheck(BaseSuite):
    """Negative sigma implies NIC on random tensors."""

    code = "NC110"
    name = "criterion-crosscheck"
    description = ("sigma < 0 implies k_max < 0 on random tensors; the "
                   "spectral agreement rate is reported")

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Run the criterion cross-check and count violations."""
        report = criterion_crosscheck(ctx.search.crosscheck, ctx.seed,
                                      budget=ANCHOR_BUDGET)
        detail = (f"agreement {report.agreement_rate:.4f} over "
                  f"{report.count} tensors, "
                  f"{len(report.counterexamples)} disagreements, "
                  f"search gap {report.max_search_gap:.2e}")
        return self.result(not report.sufficiency_failures,
                           report.agreement_rate, detail)


class WeylScaling(BaseSuite):
    """Conformal scaling of the Weyl norm."""

    code = "NC111"
    name = "weyl-scaling"
    description = "|W_{f^2 g}| = f^-2 |W_g| on a warped metric (1e-6)"

    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Compare |W| of a warped metric with the rescaled original."""
        rng = np.random.default_rng([ctx.seed, 111])
        profile = WarpProfile.trigonometric([0.3, -0.2], [0.4, 1.1])
        chart = Chart((
            Axis("t", 0.0, 2.0 * np.pi, periodic=True),
            Axis("x", 0.0, 1.0, periodic=True),
            Axis("y", 0.0, 1.0, periodic=True),
            Axis("theta", 0.0, 1.0, periodic=True),
        ))
        m = WarpedMetric(chart, profile)
        f = ScalarField.exp_sin(axis=0, amplitude=0.3)
        worst = 0.0
        for _ in range(4):
            x = rng.uniform(0.0, 1.0, 4) * [2.0 * np.pi, 1.0, 1.0, 1.0]
            worst = max(worst, conformal_scale_check(m, f, x).gap)
        return self.result(worst <= 1e-6, worst,
                           f"max relative gap {worst:.3e}")


SUITES: list[BaseSuite] = [
    SphereAnchor(),
    HyperbolicAnchor(),
    FlatAnchor(),
    CurvatureSymmetries(),
    WeylTraceless(),
    QBound(),
    IsotropicRoutes(),
    IsotropicAnchors(),
    KahlerAnchor(),
    CriterionCrosscheck(),
    WeylScaling(),
]
