"""
Charts, metric fields and the numerical plumbing under every curvature
formula.

A metric is consumed through three primitives:
  - metric_at: components g_ij(x), checked symmetric and positive definite
  - metric_derivatives: first/second partials, analytic when the metric
    provides them, otherwise central finite differences (order 2 or 4,
    optional Richardson extrapolation)
  - orthonormal_frame: Gram-Schmidt on the coordinate basis in axis order

Sampled metrics interpolate componentwise (multilinear) in metric_at, but
derivatives are only ever taken on grid-aligned stencils.

Integration (integrate_density) uses composite Simpson on interval axes
and the rectangle rule on full periodic axes; numpy's pairwise summation
keeps results independent of how the grid is partitioned.
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, linalg

from nicurv import NicurvError

logger = logging.getLogger(__name__)

# Relative symmetry tolerance for evaluated components.
_SYMMETRY_TOL = 1e-12
# Snap tolerance (in grid spacings) for grid-aligned stencils.
_ALIGN_TOL = 1e-8


class GeometryError(NicurvError):
    """Base class for geometric evaluation failures."""


class OutOfDomain(GeometryError):
    """Raised when a point lies outside a non-periodic chart interval."""


class NotPositiveDefinite(GeometryError):
    """Raised when metric components are not symmetric positive definite."""


class StencilOutOfDomain(GeometryError):
    """Raised when a finite-difference stencil leaves the chart."""


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    """One chart coordinate: an interval or a circle of length hi - lo."""

    name: str
    lo: float
    hi: float
    periodic: bool = False

    @property
    def period(self) -> Optional[float]:
        """Period of a periodic axis, None for an interval."""
        return self.hi - self.lo if self.periodic else None

    @property
    def length(self) -> float:
        """Width hi - lo."""
        return self.hi - self.lo


@dataclass(frozen=True)
class Chart:
    """
    Product chart of interval and periodic axes.

    Invariants:
      - dim in {3, 4}, exactly dim axes
      - every axis has hi > lo (period > 0 for periodic axes)
    """

    axes: tuple[Axis, ...]

    def __post_init__(self) -> None:
        """Check the dimension and that every axis is non-empty."""
        if len(self.axes) not in (3, 4):
            raise GeometryError(
                f"chart dimension must be 3 or 4, got {len(self.axes)}"
            )
        for axis in self.axes:
            if not (axis.hi > axis.lo):
                kind = "period" if axis.periodic else "interval"
                raise GeometryError(
                    f"axis {axis.name!r}: empty {kind} [{axis.lo}, {axis.hi}]"
                )

    @property
    def dim(self) -> int:
        """Chart dimension."""
        return len(self.axes)

    @property
    def axis_names(self) -> tuple[str, ...]:
        """Coordinate names in axis order."""
        return tuple(a.name for a in self.axes)

    @classmethod
    def torus(
        cls,
        dim: int = 4,
        period: float = 2.0 * math.pi,
        names: Sequence[str] = ("x1", "x2", "x3", "x4"),
    ) -> Chart:
        """Periodic cube [0, period)^dim."""
        return cls(tuple(
            Axis(names[i], 0.0, period, periodic=True) for i in range(dim)
        ))

    def wrap(self, x: Sequence[float]) -> np.ndarray:
        """
        Wrap periodic coordinates into [lo, hi) and validate the rest.

        Raises:
            OutOfDomain: if a non-periodic coordinate lies outside its
                interval (a relative slack of 1e-12 is allowed)
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise GeometryError(
                f"point must have {self.dim} coordinates, got {x.shape}"
            )
        out = x.copy()
        for i, axis in enumerate(self.axes):
            if axis.periodic:
                out[i] = axis.lo + math.fmod(x[i] - axis.lo, axis.length)
                if out[i] < axis.lo:
                    out[i] += axis.length
            else:
                slack = 1e-12 * max(1.0, abs(axis.lo), abs(axis.hi))
                if x[i] < axis.lo - slack or x[i] > axis.hi + slack:
                    raise OutOfDomain(
                        f"{axis.name}={x[i]!r} outside "
                        f"[{axis.lo}, {axis.hi}]"
                    )
        return out


# ---------------------------------------------------------------------------
# Scalar fields and warp profiles
# ---------------------------------------------------------------------------


class ScalarJet(NamedTuple):
    """Value, gradient and Hessian of a scalar field at a point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray


@dataclass(frozen=True)
class ScalarField:
    """
    A smooth scalar function on a chart with analytic derivatives.

    `jet(x)` returns (value, gradient, Hessian) in coordinates.
    """

    jet_fn: Callable[[np.ndarray], ScalarJet]
    label: str = "scalar"

    def jet(self, x: np.ndarray) -> ScalarJet:
        """Return (value, gradient, Hessian) at x."""
        return self.jet_fn(np.asarray(x, dtype=float))

    def __call__(self, x: np.ndarray) -> float:
        """Evaluate the field at x."""
        return self.jet(x).value

    @classmethod
    def constant(cls, k: float, dim: int = 4) -> ScalarField:
        """Constant field k."""
        def jet(x: np.ndarray) -> ScalarJet:
            return ScalarJet(float(k), np.zeros(dim), np.zeros((dim, dim)))

        return cls(jet, label=f"constant({k})")

    @classmethod
    def exp_sin(cls, axis: int = 0, amplitude: float = 1.0,
                dim: int = 4) -> ScalarField:
        """f(x) = exp(amplitude * sin(x[axis]))."""
        def jet(x: np.ndarray) -> ScalarJet:
            s, c = math.sin(x[axis]), math.cos(x[axis])
            f = math.exp(amplitude * s)
            grad = np.zeros(dim)
            hess = np.zeros((dim, dim))
            grad[axis] = f * amplitude * c
            hess[axis, axis] = f * ((amplitude * c) ** 2 - amplitude * s)
            return ScalarJet(f, grad, hess)

        return cls(jet, label=f"exp({amplitude} sin x{axis + 1})")

    @classmethod
    def one_plus_sin(cls, axis: int = 0, eps: float = 0.1,
                     dim: int = 4) -> ScalarField:
        """u(x) = 1 + eps * sin(x[axis])."""
        def jet(x: np.ndarray) -> ScalarJet:
            grad = np.zeros(dim)
            hess = np.zeros((dim, dim))
            grad[axis] = eps * math.cos(x[axis])
            hess[axis, axis] = -eps * math.sin(x[axis])
            return ScalarJet(1.0 + eps * math.sin(x[axis]), grad, hess)

        return cls(jet, label=f"1 + {eps} sin x{axis + 1}")


ProfileFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class WarpProfile:
    """
    A positive warp function f(t) with first and second derivatives.

    Missing derivatives are derived by central differences of order
    `fd_order` (2 or 4) with step `fd_step`.
    """

    f: ProfileFn
    df: Optional[ProfileFn] = None
    ddf: Optional[ProfileFn] = None
    t_domain: tuple[float, float] = (0.0, math.inf)
    periodic: bool = False
    fd_order: int = 4
    fd_step: float = 1e-3
    label: str = "profile"

    def __call__(self, t):
        """Evaluate f at t."""
        return self.f(np.asarray(t, dtype=float))

    def derivatives(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (f, f', f'') at t (scalar or array)."""
        t = np.asarray(t, dtype=float)
        f = self.f(t)
        if np.any(f <= 0.0):
            raise NotPositiveDefinite(
                f"warp profile {self.label} is not positive at t={t!r}"
            )
        df = self.df(t) if self.df is not None else self._fd(t, 1)
        ddf = self.ddf(t) if self.ddf is not None else self._fd(t, 2)
        return f, df, ddf

    def _fd(self, t: np.ndarray, order: int) -> np.ndarray:
        offsets, weights = (_FIRST if order == 1 else _SECOND)[self.fd_order]
        h = self.fd_step
        acc = sum(w * self.f(t + o * h) for o, w in zip(offsets, weights))
        return acc / h ** order

    @classmethod
    def exponential(cls, c: float = 1.0) -> WarpProfile:
        """Return the scaled cusp profile c * exp(-t / c)."""
        return cls(
            f=lambda t: c * np.exp(-t / c),
            df=lambda t: -np.exp(-t / c),
            ddf=lambda t: np.exp(-t / c) / c,
            label=f"{c} exp(-t/{c})",
        )

    @classmethod
    def constant(cls, value: float = 1.0) -> WarpProfile:
        """Constant profile (a product metric)."""
        return cls(
            f=lambda t: np.full_like(np.asarray(t, dtype=float), value),
            df=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            ddf=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            label=f"constant({value})",
        )

    @classmethod
    def trigonometric(
        cls,
        amplitudes: Sequence[float],
        phases: Sequence[float],
        period: float = 2.0 * math.pi,
    ) -> WarpProfile:
        """
        Smooth periodic profile f = exp(sum_k a_k sin(k w t + b_k)).

        w = 2 pi / period, k = 1..len(amplitudes).
        """
        a = np.asarray(amplitudes, dtype=float)
        b = np.asarray(phases, dtype=float)
        k = np.arange(1, len(a) + 1, dtype=float) * (2.0 * math.pi / period)

        def parts(t):
            t = np.asarray(t, dtype=float)[..., None]
            arg = k * t + b
            p = np.sum(a * np.sin(arg), axis=-1)
            dp = np.sum(a * k * np.cos(arg), axis=-1)
            ddp = -np.sum(a * k * k * np.sin(arg), axis=-1)
            return np.exp(p), dp, ddp

        def f(t):
            return parts(t)[0]

        def df(t):
            e, dp, _ = parts(t)
            return e * dp

        def ddf(t):
            e, dp, ddp = parts(t)
            return e * (ddp + dp * dp)

        return cls(f=f, df=df, ddf=ddf, t_domain=(0.0, period),
                   periodic=True, label="trigonometric")


# ---------------------------------------------------------------------------
# Finite-difference stencils
# ---------------------------------------------------------------------------

# (offsets, weights) for unit spacing; divide by h (first) or h^2 (second).
_FIRST = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1 / 12, -8 / 12, 8 / 12, -1 / 12)),
}
_SECOND = {
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    4: ((-2, -1, 0, 1, 2),
        (-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12)),
}


@dataclass(frozen=True)
class DerivativeOptions:
    """
    How metric derivatives are obtained.

    Attributes:
        stencil_order: 2 (default) or 4
        step: finite-difference step for analytic metrics (sampled
            metrics always use their grid spacing)
        richardson: combine steps h and 2h to cancel the leading error
        finite_difference: ignore analytic derivative callbacks
    """

    stencil_order: int = 2
    step: float = 1e-3
    richardson: bool = False
    finite_difference: bool = False

    def __post_init__(self) -> None:
        """Check the stencil order and the step."""
        if self.stencil_order not in _FIRST:
            raise GeometryError(
                f"stencil order must be 2 or 4, got {self.stencil_order}"
            )
        if self.step <= 0.0:
            raise GeometryError(f"step must be positive, got {self.step}")


DEFAULT_OPTIONS = DerivativeOptions()
ORDER4 = DerivativeOptions(stencil_order=4)


Sampler = Callable[[tuple[int, ...]], np.ndarray]


def _stencil_jet(
    sample: Sampler,
    h: np.ndarray,
    order: int,
    stencil_order: int,
    scale: int = 1,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Central differences of a matrix-valued function.

    `sample(offset)` returns the value at x + offset * h (offset in
    integer grid units); `scale` stretches the stencil to step scale*h.
    """
    dim = len(h)
    center = sample((0,) * dim)
    first = np.zeros((dim,) + center.shape)

    def unit(axis: int, k: int) -> tuple[int, ...]:
        off = [0] * dim
        off[axis] = k * scale
        return tuple(off)

    o1, w1 = _FIRST[stencil_order]
    for k in range(dim):
        acc = sum(w * sample(unit(k, o)) for o, w in zip(o1, w1))
        first[k] = acc / (scale * h[k])
    if order == 1:
        return first, None

    second = np.zeros((dim, dim) + center.shape)
    o2, w2 = _SECOND[stencil_order]
    for k in range(dim):
        acc = sum(
            w * (center if o == 0 else sample(unit(k, o)))
            for o, w in zip(o2, w2)
        )
        second[k, k] = acc / (scale * h[k]) ** 2
        for m in range(k + 1, dim):
            acc = 0.0
            for oa, wa in zip(o1, w1):
                for ob, wb in zip(o1, w1):
                    off = [0] * dim
                    off[k] = oa * scale
                    off[m] = ob * scale
                    acc = acc + wa * wb * sample(tuple(off))
            second[k, m] = second[m, k] = acc / (scale * scale * h[k] * h[m])
    return first, second


# ---------------------------------------------------------------------------
# Metric fields
# ---------------------------------------------------------------------------


class MetricJet(NamedTuple):
    """Metric components with first and (optionally) second partials.

    first[k, i, j] = d_k g_ij, second[k, l, i, j] = d_k d_l g_ij.
    """

    g: np.ndarray
    first: np.ndarray
    second: Optional[np.ndarray]


class MetricField(ABC):
    """
    Abstract Riemannian metric on a chart.

    Subclasses implement `components`; those that know their derivatives
    in closed form also implement `exact_jet`.
    """

    def __init__(self, chart: Chart, label: str = "metric"):
        self.chart = chart
        self.label = label

    @property
    def dim(self) -> int:
        """Chart dimension."""
        return self.chart.dim

    @abstractmethod
    def components(self, x: np.ndarray) -> np.ndarray:
        """Metric matrix at an already wrapped point."""

    def exact_jet(self, x: np.ndarray) -> Optional[MetricJet]:
        """Closed-form jet (with second derivatives), or None."""
        return None

    def derived_jet(self, x: np.ndarray,
                    options: DerivativeOptions) -> Optional[MetricJet]:
        """Jet assembled from another metric's derivatives, or None."""
        return None

    def sampler(self, x: np.ndarray, h: np.ndarray) -> Sampler:
        """Stencil access around x with spacing h."""
        def sample(offset: tuple[int, ...]) -> np.ndarray:
            y = x + np.asarray(offset, dtype=float) * h
            try:
                y = self.chart.wrap(y)
            except OutOfDomain as e:
                raise StencilOutOfDomain(
                    f"stencil around {x.tolist()} leaves the chart: {e}"
                ) from e
            return self.components(y)

        return sample

    def stencil_spacing(self, options: DerivativeOptions) -> np.ndarray:
        """Step per axis used by the finite-difference stencils."""
        return np.full(self.dim, options.step)

    def __repr__(self) -> str:
        """Show the class, label and dimension."""
        return f"{type(self).__name__}({self.label!r}, dim={self.dim})"


def _check_spd(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > _SYMMETRY_TOL * scale:
        raise NotPositiveDefinite(f"metric not symmetric at {x.tolist()}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(
            f"metric not positive definite at {x.tolist()}"
        ) from e
    return g


def metric_at(m: MetricField, x: Sequence[float]) -> np.ndarray:
    """
    Evaluate g_ij(x).

    Raises:
        OutOfDomain: non-periodic coordinate outside its interval
        NotPositiveDefinite: components not SPD (for sampled metrics this
            signals a grid too coarse for the interpolation)
    """
    x = m.chart.wrap(x)
    return _check_spd(np.asarray(m.components(x), dtype=float), x)


def metric_derivatives(
    m: MetricField,
    x: Sequence[float],
    order: int = 2,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> MetricJet:
    """
    First (order=1) or first and second (order=2) partials of g at x.

    Analytic callbacks are used when present unless the options force
    finite differences; conformal changes then differentiate their base
    and apply the product rule. With `richardson`, stencils of step h and
    2h are combined as (2^p D(h) - D(2h)) / (2^p - 1), p = stencil order.

    Raises:
        StencilOutOfDomain: the stencil leaves a non-periodic axis
    """
    if order not in (1, 2):
        raise GeometryError(f"derivative order must be 1 or 2, got {order}")
    x = m.chart.wrap(x)
    if not options.finite_difference:
        jet = m.exact_jet(x)
        if jet is not None:
            _check_spd(jet.g, x)
            return MetricJet(jet.g, jet.first,
                             jet.second if order == 2 else None)
    jet = m.derived_jet(x, options)
    if jet is not None:
        _check_spd(jet.g, x)
        return MetricJet(jet.g, jet.first,
                         jet.second if order == 2 else None)

    h = m.stencil_spacing(options)
    sample = m.sampler(x, h)
    g = _check_spd(sample((0,) * m.dim), x)
    first, second = _stencil_jet(sample, h, order, options.stencil_order)
    if options.richardson:
        first2, second2 = _stencil_jet(
            sample, h, order, options.stencil_order, scale=2
        )
        p = 2 ** options.stencil_order
        first = (p * first - first2) / (p - 1)
        if second is not None:
            second = (p * second - second2) / (p - 1)
    return MetricJet(g, first, second)


def orthonormal_frame(m: MetricField, x: Sequence[float]) -> np.ndarray:
    """
    Orthonormal frame at x, columns e_a in coordinate components.

    Gram-Schmidt on the coordinate basis in axis order is the inverse
    transpose of the Cholesky factor g = L L^T, which is what is computed.
    """
    return frame_from_gram(metric_at(m, x))


def frame_from_gram(g: np.ndarray) -> np.ndarray:
    """Upper-triangular F with F^T g F = I (Gram-Schmidt in axis order)."""
    try:
        lower = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite("Gram matrix not positive definite") from e
    return linalg.solve_triangular(
        lower, np.eye(len(g)), lower=True
    ).T


class ConstantMetric(MetricField):
    """Metric with constant components (all derivatives vanish)."""

    def __init__(self, chart: Chart, matrix: np.ndarray,
                 label: str = "constant"):
        super().__init__(chart, label)
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (chart.dim, chart.dim):
            raise GeometryError(
                f"constant metric must be {chart.dim}x{chart.dim}"
            )

    def components(self, x: np.ndarray) -> np.ndarray:
        """Return the constant matrix."""
        return self.matrix.copy()

    def exact_jet(self, x: np.ndarray) -> MetricJet:
        """Return the matrix with vanishing derivatives."""
        d = self.dim
        return MetricJet(self.matrix.copy(), np.zeros((d, d, d)),
                         np.zeros((d, d, d, d)))


class AnalyticMetric(MetricField):
    """
    Metric given by a component function and optional derivative callbacks.

    `first(x)` must return d_k g_ij with shape (dim, dim, dim) and
    `second(x)` d_k d_l g_ij with shape (dim,) * 4. When `second` is
    missing, derivatives are obtained by finite differences of `func`.
    """

    def __init__(
        self,
        chart: Chart,
        func: Callable[[np.ndarray], np.ndarray],
        first: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        second: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        label: str = "analytic",
    ):
        super().__init__(chart, label)
        self.func = func
        self.first = first
        self.second = second

    def components(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the component function at x."""
        return np.asarray(self.func(x), dtype=float)

    def exact_jet(self, x: np.ndarray) -> Optional[MetricJet]:
        """Closed-form jet when both derivative callables are given."""
        if self.first is None or self.second is None:
            return None
        return MetricJet(self.components(x), np.asarray(self.first(x)),
                         np.asarray(self.second(x)))


Potential = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


class LogDiagonalMetric(MetricField):
    """
    Diagonal metric g_ii = exp(2 p_i(x)).

    `potential(x)` returns (p, dp, ddp) with dp[k, i] = d_k p_i and
    ddp[k, l, i] = d_k d_l p_i. Warped products, conformally flat charts
    and trigonometric torus metrics all take this form, so their
    derivatives are exact.
    """

    def __init__(self, chart: Chart, potential: Potential,
                 label: str = "log-diagonal"):
        super().__init__(chart, label)
        self.potential = potential

    def components(self, x: np.ndarray) -> np.ndarray:
        """Return diag(e^(2 p))."""
        p, _, _ = self.potential(x)
        return np.diag(np.exp(2.0 * np.asarray(p, dtype=float)))

    def exact_jet(self, x: np.ndarray) -> MetricJet:
        """Closed-form jet from the potential and its derivatives."""
        p, dp, ddp = self.potential(x)
        e = np.exp(2.0 * np.asarray(p, dtype=float))
        d = self.dim
        idx = np.arange(d)
        first = np.zeros((d, d, d))
        second = np.zeros((d, d, d, d))
        # d_k e^{2p} = 2 d_k p e^{2p}
        first[:, idx, idx] = 2.0 * dp * e
        # d_k d_l e^{2p} = (2 d_k d_l p + 4 d_k p d_l p) e^{2p}
        second[:, :, idx, idx] = (
            2.0 * ddp + 4.0 * dp[:, None, :] * dp[None, :, :]
        ) * e
        return MetricJet(np.diag(e), first, second)


class WarpedMetric(LogDiagonalMetric):
    """
    dt^2 + f(t)^2 (scale^2 g_flat) on the fiber axes, plus flat axes.

    Axis 0 is t; `fiber_axes` are the indices warped by f with constant
    factor `fiber_scale`; all other axes carry unit flat factors.
    """

    def __init__(
        self,
        chart: Chart,
        profile: WarpProfile,
        fiber_axes: Sequence[int] = (1, 2),
        fiber_scale: float = 1.0,
        label: Optional[str] = None,
    ):
        self.profile = profile
        self.fiber_axes = tuple(fiber_axes)
        self.fiber_scale = float(fiber_scale)
        log_scale = math.log(fiber_scale)
        dim = chart.dim
        mask = np.zeros(dim, dtype=bool)
        mask[list(self.fiber_axes)] = True

        def potential(x: np.ndarray):
            f, df, ddf = profile.derivatives(x[0])
            f, df, ddf = float(f), float(df), float(ddf)
            p = np.where(mask, math.log(f) + log_scale, 0.0)
            dp = np.zeros((dim, dim))
            ddp = np.zeros((dim, dim, dim))
            dp[0, mask] = df / f
            ddp[0, 0, mask] = ddf / f - (df / f) ** 2
            return p, dp, ddp

        super().__init__(chart, potential,
                         label=label or f"warped[{profile.label}]")


class ConformalMetric(MetricField):
    """
    The conformal change e^{2 psi} g of a base metric.

    `psi` is a ScalarField; derivatives combine the base jet (exact or
    finite-difference) with psi's analytic jet by the product rule.
    """

    def __init__(self, base: MetricField, psi: ScalarField,
                 label: Optional[str] = None):
        super().__init__(base.chart, label or f"exp(2 {psi.label}) {base}")
        self.base = base
        self.psi = psi

    @classmethod
    def from_factor(cls, base: MetricField, f: ScalarField,
                    power: float = 2.0) -> ConformalMetric:
        """Conformal metric f^power g (psi = (power / 2) log f)."""
        def jet(x: np.ndarray) -> ScalarJet:
            v, grad, hess = f.jet(x)
            if v <= 0.0:
                raise NotPositiveDefinite(
                    f"conformal factor {f.label} not positive at "
                    f"{x.tolist()}"
                )
            half = 0.5 * power
            g1 = grad / v
            return ScalarJet(half * math.log(v), half * g1,
                             half * (hess / v - np.outer(g1, g1)))

        return cls(base, ScalarField(jet, label=f"log {f.label}"))

    def components(self, x: np.ndarray) -> np.ndarray:
        """Return e^(2 psi) g."""
        return math.exp(2.0 * self.psi(x)) * self.base.components(x)

    def exact_jet(self, x: np.ndarray) -> Optional[MetricJet]:
        """Closed-form jet when the base metric has one."""
        base = self.base.exact_jet(x)
        if base is None:
            return None
        return self._combine(x, base)

    def derived_jet(self, x: np.ndarray,
                    options: DerivativeOptions) -> MetricJet:
        """Jet with the base metric differentiated numerically."""
        # base differentiated on its own stencils (grid-aligned if sampled)
        return self._combine(
            x, metric_derivatives(self.base, x, order=2, options=options)
        )

    def _combine(self, x: np.ndarray, base: MetricJet) -> MetricJet:
        psi, dpsi, ddpsi = self.psi.jet(x)
        e = math.exp(2.0 * psi)
        g, dg, ddg = base
        first = e * (2.0 * dpsi[:, None, None] * g + dg)
        second = e * (
            (4.0 * np.outer(dpsi, dpsi) + 2.0 * ddpsi)[:, :, None, None] * g
            + 2.0 * dpsi[:, None, None, None] * dg[None, :, :, :]
            + 2.0 * dpsi[None, :, None, None] * dg[:, None, :, :]
            + ddg
        )
        return MetricJet(e * g, first, second)


class SampledMetric(MetricField):
    """
    Metric sampled on a regular grid.

    Nodes sit at lo + i * h on every axis; periodic axes exclude the
    endpoint (h = period / n), interval axes include it
    (h = length / (n - 1)). `values` has shape (n_1, ..., n_d, d, d).
    """

    def __init__(self, chart: Chart, values: np.ndarray,
                 label: str = "sampled"):
        super().__init__(chart, label)
        values = np.asarray(values, dtype=float)
        d = chart.dim
        if values.ndim != d + 2 or values.shape[-2:] != (d, d):
            raise GeometryError(
                f"sampled metric needs shape (n_1..n_{d}, {d}, {d}), "
                f"got {values.shape}"
            )
        self.values = values
        self.shape = values.shape[:d]
        self.spacing = np.array([
            ax.length / (n if ax.periodic else n - 1)
            for ax, n in zip(chart.axes, self.shape)
        ])

    @classmethod
    def from_metric(cls, m: MetricField,
                    shape: Sequence[int]) -> SampledMetric:
        """Sample another metric on the grid of its chart."""
        axes = [
            ax.lo + np.arange(n) * ax.length / (n if ax.periodic else n - 1)
            for ax, n in zip(m.chart.axes, shape)
        ]
        values = np.empty(tuple(shape) + (m.dim, m.dim))
        for idx in np.ndindex(*shape):
            x = np.array([axes[k][i] for k, i in enumerate(idx)])
            values[idx] = m.components(x)
        return cls(m.chart, values, label=f"sampled[{m.label}]")

    def grid_node(self, index: Sequence[int]) -> np.ndarray:
        """Return the coordinates of a grid node."""
        return np.array([
            ax.lo + i * h
            for ax, i, h in zip(self.chart.axes, index, self.spacing)
        ])

    def components(self, x: np.ndarray) -> np.ndarray:
        """Interpolate the sampled components at x."""
        # componentwise multilinear interpolation
        base, frac = [], []
        for ax, n, h, xi in zip(self.chart.axes, self.shape, self.spacing, x):
            u = (xi - ax.lo) / h
            i0 = int(math.floor(u))
            if not ax.periodic:
                i0 = min(max(i0, 0), n - 2)
            base.append(i0)
            frac.append(u - i0)
        out = np.zeros((self.dim, self.dim))
        for corner in np.ndindex(*(2,) * self.dim):
            w = 1.0
            idx = []
            for k, bit in enumerate(corner):
                w *= frac[k] if bit else 1.0 - frac[k]
                idx.append(self._index(k, base[k] + bit))
            if w != 0.0:
                out += w * self.values[tuple(idx)]
        return out

    def _index(self, axis: int, i: int) -> int:
        n = self.shape[axis]
        if self.chart.axes[axis].periodic:
            return i % n
        if not 0 <= i < n:
            raise StencilOutOfDomain(
                f"grid index {i} outside axis {self.chart.axes[axis].name}"
            )
        return i

    def stencil_spacing(self, options: DerivativeOptions) -> np.ndarray:
        """Return the grid spacing."""
        return self.spacing

    def sampler(self, x: np.ndarray, h: np.ndarray) -> Sampler:
        """Sampler reading grid values at stencil offsets."""
        u = (x - np.array([ax.lo for ax in self.chart.axes])) / self.spacing
        center = np.rint(u)
        if np.any(np.abs(u - center) > _ALIGN_TOL):
            raise StencilOutOfDomain(
                f"point {x.tolist()} is not grid-aligned; sampled metrics "
                "are differentiated on grid nodes only"
            )
        center = center.astype(int)

        def sample(offset: tuple[int, ...]) -> np.ndarray:
            idx = tuple(
                self._index(k, int(c) + o)
                for k, (c, o) in enumerate(zip(center, offset))
            )
            return self.values[idx]

        return sample


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisRule:
    """
    Quadrature nodes on one axis.

    Periodic rules are rectangle rules (endpoint excluded, spacing h);
    the others are composite Simpson on an odd number of nodes.
    """

    nodes: np.ndarray
    periodic: bool = False

    def reduce(self, values: np.ndarray) -> np.ndarray:
        """Integrate over the last axis of `values`."""
        if self.periodic:
            h = self.nodes[1] - self.nodes[0] if len(self.nodes) > 1 else 0.0
            return np.sum(values, axis=-1) * h
        return integrate.simpson(values, x=self.nodes, axis=-1)


def axis_rule(axis: Axis, interval: Optional[tuple[float, float]],
              n: int) -> AxisRule:
    """
    Composite Simpson on an interval, rectangle rule on a full circle.

    `interval=None` means the whole axis; a periodic axis with an explicit
    sub-interval is treated as an interval.
    """
    if interval is None and axis.periodic:
        h = axis.length / n
        return AxisRule(axis.lo + h * np.arange(n), periodic=True)
    lo, hi = interval if interval is not None else (axis.lo, axis.hi)
    return simpson_rule(lo, hi, n)


def simpson_rule(lo: float, hi: float, n: int) -> AxisRule:
    """Composite Simpson on n equispaced nodes (n forced odd)."""
    if n < 3:
        raise GeometryError(f"Simpson needs at least 3 nodes, got {n}")
    if n % 2 == 0:
        n += 1
    return AxisRule(np.linspace(lo, hi, n))


@dataclass(frozen=True)
class WarpedRegion:
    """
    t-interval of a warped product with dV = f(t)^k dt * fiber_measure.

    fiber_measure is the product of the flat fiber volumes (torus area
    times circle length for the glued band).
    """

    profile: WarpProfile
    t_interval: tuple[float, float]
    fiber_dim: int = 2
    fiber_measure: float = 1.0


def integrate_density(
    source: MetricField | WarpedRegion,
    phi: Callable[[np.ndarray], float],
    region: Optional[Sequence[Optional[tuple[float, float]]]] = None,
    nodes: int | Sequence[int] = 1001,
) -> float:
    """
    Integrate a scalar density against the Riemannian volume.

    For a MetricField the integrand phi * sqrt(det g) is sampled on the
    tensor grid of per-axis rules and reduced one axis at a time;
    `region[k]` is a sub-interval or None for the whole axis. For a
    WarpedRegion, `phi` receives the t nodes (vectorized) and the result
    is fiber_measure * int phi f^k dt.

    Args:
        source: metric or warped region
        phi: density; called with a point (metric) or a t array (region)
        region: per-axis sub-intervals (metric only)
        nodes: nodes per axis (int applies to every axis)

    Returns:
        The integral.
    """
    if isinstance(source, WarpedRegion):
        n = nodes if isinstance(nodes, int) else nodes[0]
        rule = simpson_rule(*source.t_interval, n)
        f = source.profile(rule.nodes)
        values = np.asarray(phi(rule.nodes), dtype=float)
        return float(
            source.fiber_measure * rule.reduce(values * f ** source.fiber_dim)
        )

    chart = source.chart
    region = region if region is not None else [None] * chart.dim
    counts = [nodes] * chart.dim if isinstance(nodes, int) else list(nodes)
    rules = [
        axis_rule(ax, r, n) for ax, r, n in zip(chart.axes, region, counts)
    ]
    values = np.empty(tuple(len(r.nodes) for r in rules))
    for idx in np.ndindex(*values.shape):
        x = np.array([rules[k].nodes[i] for k, i in enumerate(idx)])
        g = metric_at(source, x)
        values[idx] = phi(x) * math.sqrt(np.linalg.det(g))
    return reduce_grid(values, rules)


def reduce_grid(values: np.ndarray, rules: Sequence[AxisRule]) -> float:
    """Integrate samples on a tensor grid, last axis first."""
    for rule in reversed(rules):
        values = rule.reduce(values)
    return float(values)


def tensor_grid(
    chart: Chart,
    counts: Sequence[int],
    region: Optional[Sequence[Optional[tuple[float, float]]]] = None,
) -> list[np.ndarray]:
    """
    List the points of a regular grid, last axis fastest.

    Periodic axes without a sub-interval exclude the endpoint; interval
    axes include both ends (a single node sits at the midpoint).
    """
    region = region if region is not None else [None] * chart.dim
    axes = []
    for ax, n, r in zip(chart.axes, counts, region):
        lo, hi = r if r is not None else (ax.lo, ax.hi)
        if n == 1:
            axes.append(np.array([0.5 * (lo + hi)]))
        elif ax.periodic and r is None:
            axes.append(lo + np.arange(n) * (hi - lo) / n)
        else:
            axes.append(np.linspace(lo, hi, n))
    return [np.array(p) for p in np.array(
        np.meshgrid(*axes, indexing="ij")
    ).reshape(chart.dim, -1).T]


def randomized_spd(rng: np.random.Generator, dim: int = 4,
                   conditioning: float = 10.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues in [1, conditioning]."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = rng.uniform(1.0, conditioning, dim)
    return q @ np.diag(eig) @ q.T


__all__ = [
    "Axis", "Chart", "ScalarField", "ScalarJet", "WarpProfile",
    "DerivativeOptions", "DEFAULT_OPTIONS", "ORDER4", "MetricJet",
    "MetricField", "ConstantMetric", "AnalyticMetric", "LogDiagonalMetric",
    "WarpedMetric", "ConformalMetric", "SampledMetric", "WarpedRegion",
    "metric_at", "metric_derivatives", "orthonormal_frame", "frame_from_gram",
    "integrate_density", "axis_rule", "simpson_rule", "tensor_grid",
    "reduce_grid", "randomized_spd", "GeometryError", "OutOfDomain",
    "NotPositiveDefinite", "StencilOutOfDomain",
]
