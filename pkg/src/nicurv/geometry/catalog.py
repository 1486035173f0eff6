"""
Named built-in metrics and the config-document builder.

Built-ins (kind in parentheses):
  constant            (analytic) constant SPD matrix, flat 4-torus default
  sphere              (analytic) unit round S^4 in stereographic coordinates
  hyperbolic_product  (analytic) dt^2 + e^{-2t}(dx^2 + dy^2) + dtheta^2
  kahler              (analytic) product of two curvature -1 planes
  trig_torus          (analytic) diag(exp(2 p_i)), p_i trigonometric on T^4
  exp_warp            (warped)   dt^2 + c^2 e^{-2t/c} g_e (+ dtheta^2)
  glued               (warped)   the band metric k_c + dtheta^2

Any analytic or warped built-in can be wrapped as kind "sampled", which
samples it on a regular grid of its chart.
"""
from __future__ import annotations

import logging
import math
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from nicurv.geometry.metric import (
    Axis,
    Chart,
    ConstantMetric,
    GeometryError,
    LogDiagonalMetric,
    MetricField,
    SampledMetric,
    WarpedMetric,
    WarpProfile,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def flat_torus(matrix: Optional[np.ndarray] = None,
               chart: Optional[Chart] = None) -> ConstantMetric:
    """Constant metric on the torus (Euclidean when `matrix` is None)."""
    chart = chart or Chart.torus()
    matrix = np.eye(chart.dim) if matrix is None else np.asarray(matrix)
    return ConstantMetric(chart, matrix, label="constant")


def round_sphere(radius: float = 2.0,
                 chart: Optional[Chart] = None) -> LogDiagonalMetric:
    """
    Round S^4 through stereographic projection: g = 4 / (1 + |x|^2)^2 dx^2.

    The chart is the cube [-radius, radius]^4.
    """
    chart = chart or Chart(tuple(
        Axis(f"x{i + 1}", -radius, radius) for i in range(4)
    ))
    dim = chart.dim

    def potential(x: np.ndarray):
        q = 1.0 + float(x @ x)
        p = np.full(dim, math.log(2.0) - math.log(q))
        dp = np.repeat((-2.0 * x / q)[:, None], dim, axis=1)
        hess = -2.0 * np.eye(dim) / q + 4.0 * np.outer(x, x) / q ** 2
        ddp = np.repeat(hess[:, :, None], dim, axis=2)
        return p, dp, ddp

    return LogDiagonalMetric(chart, potential, label="sphere")


def hyperbolic_product(t_range: tuple[float, float] = (-2.0, 2.0),
                       torus_side: float = 1.0,
                       circle: float = TWO_PI,
                       chart: Optional[Chart] = None) -> LogDiagonalMetric:
    """Cusp model of H^3 times a circle: every H^3 sectional is -1."""
    chart = chart or Chart((
        Axis("t", *t_range),
        Axis("x", 0.0, torus_side, periodic=True),
        Axis("y", 0.0, torus_side, periodic=True),
        Axis("theta", 0.0, circle, periodic=True),
    ))
    mask = np.array([0.0, 1.0, 1.0, 0.0])

    def potential(x: np.ndarray):
        dp = np.zeros((4, 4))
        dp[0] = -mask
        return -x[0] * mask, dp, np.zeros((4, 4, 4))

    return LogDiagonalMetric(chart, potential, label="hyperbolic_product")


def kahler_product(t_range: tuple[float, float] = (-2.0, 2.0),
                   side: float = 1.0,
                   chart: Optional[Chart] = None) -> LogDiagonalMetric:
    """
    (dt1^2 + e^{-2 t1} dx1^2) + (dt2^2 + e^{-2 t2} dx2^2).

    Both factors have curvature -1; the product is Kaehler, so some
    isotropic plane always has zero curvature.
    """
    chart = chart or Chart((
        Axis("t1", *t_range),
        Axis("x1", 0.0, side, periodic=True),
        Axis("t2", *t_range),
        Axis("x2", 0.0, side, periodic=True),
    ))

    def potential(x: np.ndarray):
        p = np.array([0.0, -x[0], 0.0, -x[2]])
        dp = np.zeros((4, 4))
        dp[0, 1] = -1.0
        dp[2, 3] = -1.0
        return p, dp, np.zeros((4, 4, 4))

    return LogDiagonalMetric(chart, potential, label="kahler")


def trig_torus(
    amplitude: float = 0.2,
    seed: int = 0,
    amplitudes: Optional[Sequence[Sequence[float]]] = None,
    phases: Optional[Sequence[Sequence[float]]] = None,
    chart: Optional[Chart] = None,
) -> LogDiagonalMetric:
    """
    g_ii = exp(2 p_i), p_i(x) = sum_j A_ij sin(x_j + phi_ij) on T^4.

    A and phi default to seeded draws (A uniform in [-amplitude,
    amplitude]); generic draws are not conformally flat.
    """
    chart = chart or Chart.torus()
    dim = chart.dim
    rng = np.random.default_rng(seed)
    a = (np.asarray(amplitudes, dtype=float) if amplitudes is not None
         else rng.uniform(-amplitude, amplitude, (dim, dim)))
    phi = (np.asarray(phases, dtype=float) if phases is not None
           else rng.uniform(0.0, TWO_PI, (dim, dim)))
    if a.shape != (dim, dim) or phi.shape != (dim, dim):
        raise GeometryError(f"trig_torus coefficients must be {dim}x{dim}")
    idx = np.arange(dim)

    def potential(x: np.ndarray):
        arg = x[None, :] + phi
        p = np.sum(a * np.sin(arg), axis=1)
        dp = (a * np.cos(arg)).T
        ddp = np.zeros((dim, dim, dim))
        ddp[idx, idx, :] = -(a * np.sin(arg)).T
        return p, dp, ddp

    return LogDiagonalMetric(chart, potential, label=f"trig_torus[{seed}]")


def cusp_chart(t_max: float, area: float = 1.0,
               circle: Optional[float] = None) -> Chart:
    """[0, t_max] x square torus of the given area (x circle)."""
    side = math.sqrt(area)
    axes = [
        Axis("t", 0.0, t_max),
        Axis("x", 0.0, side, periodic=True),
        Axis("y", 0.0, side, periodic=True),
    ]
    if circle is not None:
        axes.append(Axis("theta", 0.0, circle, periodic=True))
    return Chart(tuple(axes))


def exp_warp(c: float = 1.0, t_max: float = 4.0, area: float = 1.0,
             circle: Optional[float] = None,
             chart: Optional[Chart] = None) -> WarpedMetric:
    """Return the scaled cusp c^2 g_H = dt^2 + c^2 e^{-2t/c} g_e."""
    chart = chart or cusp_chart(t_max, area, circle)
    return WarpedMetric(chart, WarpProfile.exponential(c),
                        label=f"exp_warp({c})")


def glued_band(c: float = 8.0, variant: str = "log", area: float = 1.0,
               ell: float = 1.0, pad: float = 0.5,
               chart: Optional[Chart] = None) -> WarpedMetric:
    """k_c + dtheta^2 over [0, a(c) + 1 + pad]."""
    from nicurv.geometry.gluing import GluedFamily

    fam = GluedFamily(c=c, area=area, ell=ell, variant=variant)
    return fam.band_metric(pad=pad, chart=chart)


Factory = Callable[..., MetricField]

BUILTINS: dict[str, tuple[str, Factory]] = {
    "constant": ("analytic", flat_torus),
    "sphere": ("analytic", round_sphere),
    "hyperbolic_product": ("analytic", hyperbolic_product),
    "kahler": ("analytic", kahler_product),
    "trig_torus": ("analytic", trig_torus),
    "exp_warp": ("warped", exp_warp),
    "glued": ("warped", glued_band),
}


def chart_from_config(section: Mapping[str, Any]) -> Chart:
    """
    Chart from {"axes": [{"name", "lo", "hi", "periodic"}, ...]}.

    Raises:
        GeometryError: on missing or malformed axis entries
    """
    axes = section.get("axes")
    if not isinstance(axes, list):
        raise GeometryError("chart section needs an 'axes' list")
    out = []
    for i, entry in enumerate(axes):
        unknown = set(entry) - {"name", "lo", "hi", "periodic"}
        if unknown:
            raise GeometryError(
                f"chart axis {i}: unknown keys {sorted(unknown)}"
            )
        try:
            out.append(Axis(
                str(entry.get("name", f"x{i + 1}")),
                float(entry["lo"]),
                float(entry["hi"]),
                bool(entry.get("periodic", False)),
            ))
        except KeyError as e:
            raise GeometryError(f"chart axis {i}: missing {e}") from e
    return Chart(tuple(out))


def build_metric(
    kind: str,
    builtin: str,
    params: Optional[Mapping[str, Any]] = None,
    chart: Optional[Chart] = None,
    shape: Optional[Sequence[int]] = None,
) -> MetricField:
    """
    Instantiate a named built-in.

    Args:
        kind: "analytic", "warped" or "sampled"
        builtin: key of BUILTINS
        params: keyword arguments of the built-in factory
        chart: optional chart replacing the built-in default
        shape: grid shape, required for kind "sampled"

    Raises:
        GeometryError: unknown built-in, kind mismatch or bad parameters
    """
    if builtin not in BUILTINS:
        raise GeometryError(
            f"unknown metric built-in {builtin!r}; "
            f"choose from {sorted(BUILTINS)}"
        )
    native, factory = BUILTINS[builtin]
    if kind not in ("analytic", "warped", "sampled"):
        raise GeometryError(f"unknown metric kind {kind!r}")
    if kind != "sampled" and kind != native:
        raise GeometryError(
            f"built-in {builtin!r} is {native!r}, not {kind!r}"
        )
    try:
        m = factory(chart=chart, **dict(params or {}))
    except TypeError as e:
        raise GeometryError(f"bad parameters for {builtin!r}: {e}") from e
    if kind == "sampled":
        if shape is None:
            raise GeometryError("sampled metrics need a grid 'shape'")
        logger.info("sampling %s on grid %s", m.label, list(shape))
        m = SampledMetric.from_metric(m, shape)
    return m
