"""
The glued warped family g_c and the integral functional F(g_c).

g_c is assembled from three pieces:
  - bulk:  c^2 g_H + dtheta^2 on N_{a(c)} x S^1 (constant s = -6/c^2,
           conformally flat, so it enters only through closed forms)
  - band:  k_c + dtheta^2 = dt^2 + f_c(t)^2 g_e + dtheta^2 on
           [a(c), a(c) + 1] x T^2 x S^1, integrated with the curvature
           engine
  - cap:   a fixed c-independent extension carrying input constants

f_c(t) = phi(t - a) c e^{-t/c} + 1 - phi(t - a) moves the scaled cusp
profile onto the flat profile 1 inside the band.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from nicurv import NicurvError
from nicurv.geometry.curvature import curvature_at
from nicurv.geometry.metric import (
    DEFAULT_OPTIONS,
    Axis,
    Chart,
    DerivativeOptions,
    GeometryError,
    MetricField,
    WarpedMetric,
    WarpedRegion,
    WarpProfile,
    integrate_density,
    simpson_rule,
)
from nicurv.utils import ordered_map

logger = logging.getLogger(__name__)

# c must exceed this for 1/2 < c e^{-t/c} on the band
C_MIN = 1.0 / math.log(2.0)
# slack for the closed bounds (c e^{-a/c} = 1 exactly for a = c log c)
_BAND_SLACK = 1e-12


class BoundViolated(NicurvError):
    """Raised when the band estimate 1/2 < c e^{-t/c} fails."""


# ---------------------------------------------------------------------------
# Bump function
# ---------------------------------------------------------------------------


def _h_jet(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """h(x) = exp(-1/x) for x > 0 (else 0) with h' and h''."""
    x = np.asarray(x, dtype=float)
    pos = x > 0.0
    safe = np.where(pos, x, 1.0)
    h = np.where(pos, np.exp(-1.0 / safe), 0.0)
    dh = h / safe ** 2
    ddh = h * (1.0 / safe ** 4 - 2.0 / safe ** 3)
    return h, dh, ddh


@dataclass(frozen=True)
class BumpFunction:
    """
    Smooth step phi(t) = h(1/2 - t) / (h(1/2 - t) + h(t)).

    phi = 1 for t <= 0, phi = 0 for t >= 1/2, monotone in between, with
    |phi'| <= 8 (attained at t = 1/4) and |phi''| < 100.
    """

    def __call__(self, t):
        """Evaluate phi at t."""
        return self.derivatives(t)[0]

    def derivatives(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (phi, phi', phi'') at t (scalar or array)."""
        t = np.asarray(t, dtype=float)
        a, da, dda = _h_jet(0.5 - t)
        # d/dt h(1/2 - t) = -h'(1/2 - t)
        da = -da
        b, db, ddb = _h_jet(t)
        s = a + b
        ds = da + db
        num = da * b - a * db
        dnum = dda * b - a * ddb
        return a / s, num / s ** 2, (dnum * s - 2.0 * num * ds) / s ** 3

    def bounds(self, samples: int = 20001) -> tuple[float, float]:
        """Measure (max |phi'|, max |phi''|) on [0, 1/2]."""
        t = np.linspace(0.0, 0.5, samples)
        _, d1, d2 = self.derivatives(t)
        return float(np.max(np.abs(d1))), float(np.max(np.abs(d2)))


class FlatBump(BumpFunction):
    """Bump with phi identically 0, so the band is the flat product."""

    def derivatives(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return zeros for phi and both derivatives."""
        z = np.zeros_like(np.asarray(t, dtype=float))
        return z, z, z


# ---------------------------------------------------------------------------
# Glued family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GluedFamily:
    """
    One member g_c of the glued family with its geometry constants.

    Attributes:
        c: scale parameter (> 1 / log 2 unless `check` is False)
        vol0: hyperbolic volume of the compact core N_0
        area: area of the flat cusp torus (T^2, g_e)
        ell: length of the circle factor
        s_cap, w_cap: integrals of s and |W| over the cap region
        cap_volume: volume of the cap region
        variant: "log" for a(c) = c log c, "half" for c log(c / 2)
        bump: the transition function phi
    """

    c: float
    vol0: float = 1.0
    area: float = 1.0
    ell: float = 1.0
    s_cap: float = 0.0
    w_cap: float = 0.0
    cap_volume: float = 1.0
    variant: str = "log"
    bump: BumpFunction = field(default_factory=BumpFunction)
    check: bool = True

    def __post_init__(self) -> None:
        """Check constants, variant and the lower bound on c."""
        if self.variant not in ("log", "half"):
            raise GeometryError(
                f"a(c) variant must be 'log' or 'half', got {self.variant!r}"
            )
        for name in ("vol0", "area", "ell", "cap_volume"):
            if getattr(self, name) <= 0.0:
                raise GeometryError(f"{name} must be positive")
        if self.check and not self.c > C_MIN:
            raise BoundViolated(
                f"c={self.c!r} must exceed 1/log 2 = {C_MIN:.12g}"
            )

    @property
    def a(self) -> float:
        """Start of the band: c log c, or c log(c / 2) for the half variant."""
        if self.variant == "half":
            return self.c * math.log(self.c / 2.0)
        return self.c * math.log(self.c)

    def with_c(self, c: float) -> GluedFamily:
        """Copy of this family at another c."""
        return dataclasses.replace(self, c=c)

    def profile(self) -> WarpProfile:
        """f_c as a warp profile with exact derivatives."""
        return WarpProfile(
            f=lambda t: warp_fc(self, t)[0],
            df=lambda t: warp_fc(self, t)[1],
            ddf=lambda t: warp_fc(self, t)[2],
            t_domain=(0.0, math.inf),
            label=f"f_c(c={self.c})",
        )

    def band_chart(self, pad: float = 0.5) -> Chart:
        """Chart [0, a + 1 + pad] x T^2 x S^1 of the band metric."""
        side = math.sqrt(self.area)
        return Chart((
            Axis("t", 0.0, self.a + 1.0 + pad),
            Axis("x", 0.0, side, periodic=True),
            Axis("y", 0.0, side, periodic=True),
            Axis("theta", 0.0, self.ell, periodic=True),
        ))

    def band_metric(self, pad: float = 0.5,
                    chart: Optional[Chart] = None) -> WarpedMetric:
        """k_c + dtheta^2 on [0, a(c) + 1 + pad] x T^2 x S^1."""
        return WarpedMetric(chart or self.band_chart(pad), self.profile(),
                            label=f"glued(c={self.c})")


def warp_fc(fam: GluedFamily, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    (f_c, f_c', f_c'') at t (scalar or array).

    With E = c e^{-t/c}: f = phi (E - 1) + 1, f' = phi' (E - 1) + phi E',
    f'' = phi'' (E - 1) + 2 phi' E' + phi E'', phi evaluated at t - a(c).
    """
    t = np.asarray(t, dtype=float)
    c = fam.c
    decay = np.exp(-t / c)
    e, de, dde = c * decay, -decay, decay / c
    phi, dphi, ddphi = fam.bump.derivatives(t - fam.a)
    f = phi * (e - 1.0) + 1.0
    df = dphi * (e - 1.0) + phi * de
    ddf = ddphi * (e - 1.0) + 2.0 * dphi * de + phi * dde
    return f, df, ddf


class BandBound(NamedTuple):
    """Range of c e^{-t/c} over [a(c), a(c) + 1]."""

    c: float
    a: float
    lo: float
    hi: float
    holds: bool


def band_bound_check(fam: GluedFamily, samples: int = 1001) -> BandBound:
    """
    Measure c e^{-t/c} on the band and test 1/2 < lo, hi <= 1.

    The closed forms are lo = c e^{-(a+1)/c} and hi = c e^{-a/c}; the
    sampled range is reported. The upper bound is an equality at t = a(c)
    for the default a(c) and is tested with a 1e-12 slack.

    Raises:
        BoundViolated: if the lower bound fails (c <= 1/log 2)
    """
    t = np.linspace(fam.a, fam.a + 1.0, samples)
    values = fam.c * np.exp(-t / fam.c)
    lo, hi = float(values.min()), float(values.max())
    if not lo > 0.5 + _BAND_SLACK:
        raise BoundViolated(
            f"c={fam.c!r}: min of c e^(-t/c) on the band is {lo!r} <= 1/2"
        )
    holds = hi <= 1.0 + _BAND_SLACK
    if not holds:
        logger.warning("c=%g (%s): c e^(-t/c) reaches %.6g > 1 on the band",
                       fam.c, fam.variant, hi)
    return BandBound(fam.c, fam.a, lo, hi, holds)


def _c2_components(fam: GluedFamily, t) -> np.ndarray:
    f, df, ddf = warp_fc(fam, t)
    return np.stack([
        np.abs(f * f - 1.0),
        np.abs(2.0 * f * df),
        np.abs(2.0 * (df * df + f * ddf)),
    ])


def c2_distance_band(fam: GluedFamily, samples: int = 2001) -> float:
    """
    C^2 deviation of k_c from dt^2 + g_e on the band.

    sup over t in [a, a + 1] of max(|f^2 - 1|, |(f^2)'|, |(f^2)''|): dense
    sampling, then a bounded scalar refinement around the best sample of
    each component.
    """
    a = fam.a
    t = np.linspace(a, a + 1.0, samples)
    comps = _c2_components(fam, t)
    best = float(comps.max())
    step = t[1] - t[0]
    for k in range(3):
        i = int(np.argmax(comps[k]))
        lo, hi = max(a, t[i] - step), min(a + 1.0, t[i] + step)
        if hi <= lo:
            continue
        res = optimize.minimize_scalar(
            lambda s: -float(_c2_components(fam, s)[k]),
            bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return best


# ---------------------------------------------------------------------------
# Integrals and the functional F
# ---------------------------------------------------------------------------


def warped_curvature_samples(
    m: MetricField,
    ts: np.ndarray,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> tuple[np.ndarray, np.ndarray]:
    """s(t) and |W|(t) of a metric depending on t only (fiber point 0)."""
    s = np.empty(len(ts))
    w = np.empty(len(ts))
    rest = [ax.lo for ax in m.chart.axes[1:]]
    for i, t in enumerate(ts):
        data = curvature_at(m, [t, *rest], options)
        s[i], w[i] = data.scalar, data.weyl_norm
    return s, w


def bulk_integrals(fam: GluedFamily) -> tuple[float, float]:
    """
    Closed-form (int s dV, int |W| dV) over N_{a(c)} x S^1.

    s = -6 / c^2 on c^2 g_H + dtheta^2 and the volume is
    c^3 Vol(N_{a/c}, g_H) ell with Vol(N_tau) = Vol_0 + Area (1 -
    e^{-2 tau}) / 2; the product is conformally flat so |W| = 0.
    """
    c = fam.c
    vol = fam.vol0 + 0.5 * fam.area * (1.0 - math.exp(-2.0 * fam.a / c))
    return -6.0 * c * fam.ell * vol, 0.0


def band_integrals(
    fam: GluedFamily,
    nodes: int = 2001,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> tuple[float, float]:
    """(int s dV, int |W| dV) over [a, a + 1] x T^2 x S^1 via the engine."""
    m = fam.band_metric()
    rule = simpson_rule(fam.a, fam.a + 1.0, nodes)
    s, w = warped_curvature_samples(m, rule.nodes, options)
    region = WarpedRegion(fam.profile(), (fam.a, fam.a + 1.0),
                          fiber_dim=2, fiber_measure=fam.area * fam.ell)
    # same Simpson nodes as the samples
    i_s = integrate_density(region, lambda t: s, nodes=len(rule.nodes))
    i_w = integrate_density(region, lambda t: w, nodes=len(rule.nodes))
    return i_s, i_w


class FRow(NamedTuple):
    """One row of the glue sweep."""

    c: float
    a_c: float
    I_bulk_s: float
    I_band_s: float
    I_cap_s: float
    I_bulk_w: float
    I_band_w: float
    I_cap_w: float
    F: float
    c2_band_distance: float


def _f_row(fam: GluedFamily, mu: float, nodes: int,
           options: DerivativeOptions) -> FRow:
    bulk_s, bulk_w = bulk_integrals(fam)
    band_s, band_w = band_integrals(fam, nodes, options)
    total = (
        mu * (bulk_s + band_s + fam.s_cap)
        + (bulk_w + band_w + fam.w_cap)
    )
    row = FRow(fam.c, fam.a, bulk_s, band_s, fam.s_cap, bulk_w, band_w,
               fam.w_cap, total, c2_distance_band(fam))
    logger.info("c=%g: F=%.6g (band s=%.4g, |W|=%.4g)",
                fam.c, total, band_s, band_w)
    return row


def functional_F(
    fam: GluedFamily,
    cs: Iterable[float],
    mu: float = 1.0 / 6.0,
    nodes: int = 2001,
    options: DerivativeOptions = DEFAULT_OPTIONS,
    jobs: int = 1,
) -> list[FRow]:
    """
    F(g_c) = mu int s dV + int |W| dV, split by region, for each c.

    Rows come back ordered by c ascending whatever `jobs` is.
    """
    if mu <= 0.0:
        raise GeometryError(f"mu must be positive, got {mu}")
    members = [fam.with_c(float(c)) for c in sorted(set(cs))]
    return ordered_map(lambda f: _f_row(f, mu, nodes, options), members,
                       jobs)


def c_star(rows: Sequence[FRow]) -> Optional[float]:
    """
    Smallest swept c beyond which F stays negative, or None.

    None means F is non-negative at the largest swept c.
    """
    found = None
    for row in sorted(rows, key=lambda r: r.c):
        if row.F < 0.0:
            if found is None:
                found = row.c
        else:
            found = None
    return found


def refine_c_star(fam: GluedFamily, lo: float, hi: float,
                  mu: float = 1.0 / 6.0, nodes: int = 1001,
                  xtol: float = 1e-6) -> float:
    """Root of F(c) in [lo, hi] (F(lo) >= 0 > F(hi)) by Brent's method."""
    def objective(c: float) -> float:
        return _f_row(fam.with_c(c), mu, nodes, DEFAULT_OPTIONS).F

    return float(optimize.brentq(objective, lo, hi, xtol=xtol))


def sweep_grid(c_min: float, c_max: float, steps: int) -> np.ndarray:
    """Geometric grid of `steps` scale values from c_min to c_max."""
    if steps < 1 or c_min <= 0.0 or c_max < c_min:
        raise GeometryError(
            f"bad sweep range [{c_min}, {c_max}] with {steps} steps"
        )
    if steps == 1:
        return np.array([c_min])
    return np.geomspace(c_min, c_max, steps)


# ---------------------------------------------------------------------------
# Supplementary checks
# ---------------------------------------------------------------------------


class CuspScaling(NamedTuple):
    """Engine-integrated vs closed-form int s dV over N_{a(c)}."""

    c: float
    numeric: float
    closed_form: float
    rel_gap: float


def cusp_scaling_check(
    c: float,
    vol0: float = 1.0,
    area: float = 1.0,
    nodes: int = 4001,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> CuspScaling:
    """
    Compare int s dV over N_{a(c)} for c^2 g_H with -6 c Vol(N_{a(c)}, g_H).

    The truncated cusp [0, a(c)] x T^2 is integrated with engine values
    of s; the compact core contributes its closed form -6 c Vol_0.
    """
    fam = GluedFamily(c=c, vol0=vol0, area=area)
    a = fam.a
    side = math.sqrt(area)
    chart = Chart((
        Axis("t", 0.0, a),
        Axis("x", 0.0, side, periodic=True),
        Axis("y", 0.0, side, periodic=True),
    ))
    profile = WarpProfile.exponential(c)
    m = WarpedMetric(chart, profile, label=f"cusp(c={c})")
    rule = simpson_rule(0.0, a, nodes)
    s, _ = warped_curvature_samples(m, rule.nodes, options)
    cusp = integrate_density(
        WarpedRegion(profile, (0.0, a), fiber_dim=2, fiber_measure=area),
        lambda t: s, nodes=len(rule.nodes),
    )
    numeric = -6.0 * c * vol0 + cusp
    closed = -6.0 * c * (vol0 + 0.5 * area * (1.0 - math.exp(-2.0 * a / c)))
    return CuspScaling(c, numeric, closed, abs(numeric - closed) / abs(closed))


class NoGoReport(NamedTuple):
    """Both sides of int s dV = 2 ell Area int f'^2 dt."""

    integral_s: float
    predicted: float
    rel_gap: float


def random_periodic_profile(rng: np.random.Generator, modes: int = 3,
                            scale: float = 0.3,
                            period: float = 2.0 * math.pi) -> WarpProfile:
    """Positive trigonometric profile with random amplitudes and phases."""
    return WarpProfile.trigonometric(
        rng.uniform(-scale, scale, modes),
        rng.uniform(0.0, 2.0 * math.pi, modes),
        period,
    )


def no_go_identity(
    profile: WarpProfile,
    area: float = 1.0,
    ell: float = 1.0,
    nodes: int = 2001,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> NoGoReport:
    """
    Integrate s dV of dt^2 + f^2 g_e + dtheta^2 over one period of f.

    Integration by parts gives 2 ell Area int f'^2 dt >= 0, so a periodic
    warp alone can never make the total scalar curvature negative.
    """
    period = profile.t_domain[1] - profile.t_domain[0]
    side = math.sqrt(area)
    chart = Chart((
        Axis("t", profile.t_domain[0], profile.t_domain[1], periodic=True),
        Axis("x", 0.0, side, periodic=True),
        Axis("y", 0.0, side, periodic=True),
        Axis("theta", 0.0, ell, periodic=True),
    ))
    m = WarpedMetric(chart, profile, label="periodic warp")
    lo = profile.t_domain[0]
    rule = simpson_rule(lo, lo + period, nodes)
    s, _ = warped_curvature_samples(m, rule.nodes, options)
    region = WarpedRegion(profile, (lo, lo + period), fiber_dim=2,
                          fiber_measure=area * ell)
    integral = integrate_density(region, lambda t: s, nodes=len(rule.nodes))
    _, df, _ = profile.derivatives(rule.nodes)
    predicted = 2.0 * ell * area * float(rule.reduce(df * df))
    scale = max(abs(predicted), 1e-300)
    return NoGoReport(integral, predicted, abs(integral - predicted) / scale)
