"""
Pointwise curvature of a metric field.

Conventions (fixed by the sphere and hyperbolic anchors):
  R^a_bcd = d_c G^a_db - d_d G^a_cb + G^a_ce G^e_db - G^a_de G^e_cb
  R_abcd  = g_ae R^e_bcd, so the sectional curvature is K(e1, e2) = R_1212
  Ric_bd  = sum_a R_abad,  s = trace(Ric)

Every tensor in CurvaturePointData is expressed in the orthonormal frame
from metric-core. Operators on bivectors use the basis
e1^e2, e1^e3, e1^e4, e2^e3, e2^e4, e3^e4 with matrix entries
<T(e_a^e_b), e_c^e_d> = T_abcd, which makes |T|^2 = 4 |T_op|_F^2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from nicurv.geometry.metric import (
    DEFAULT_OPTIONS,
    ConformalMetric,
    DerivativeOptions,
    MetricField,
    MetricJet,
    ScalarField,
    frame_from_gram,
    metric_derivatives,
)

logger = logging.getLogger(__name__)


def bivector_pairs(dim: int) -> list[tuple[int, int]]:
    """Index pairs (a, b), a < b, in the fixed bivector order."""
    return list(combinations(range(dim), 2))


PAIRS = bivector_pairs(4)


def kulkarni_nomizu(h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """(h . k)_abcd = h_ac k_bd + h_bd k_ac - h_ad k_bc - h_bc k_ad."""
    return (
        np.einsum("ac,bd->abcd", h, k)
        + np.einsum("bd,ac->abcd", h, k)
        - np.einsum("ad,bc->abcd", h, k)
        - np.einsum("bc,ad->abcd", h, k)
    )


def bivector_operator(tensor: np.ndarray) -> np.ndarray:
    """Matrix of a 4-tensor with curvature symmetries on bivectors."""
    pairs = bivector_pairs(tensor.shape[0])
    a, b = np.array(pairs).T
    return tensor[a[:, None], b[:, None], a[None, :], b[None, :]]


class WeylParts(NamedTuple):
    """Weyl tensor, its full tensor norm and its bivector operator."""

    weyl: np.ndarray
    norm: float
    op: np.ndarray


class Lambda2Operators(NamedTuple):
    """Curvature, Weyl and criterion operators on bivectors."""

    r_op: np.ndarray
    w_op: np.ndarray
    q: np.ndarray
    q_eigenvalues: np.ndarray


def _weyl_parts(riemann: np.ndarray, ricci: np.ndarray,
                scalar: float) -> WeylParts:
    n = riemann.shape[0]
    eye = np.eye(n)
    weyl = (
        riemann
        - kulkarni_nomizu(ricci, eye) / (n - 2)
        + scalar / (2.0 * (n - 1) * (n - 2)) * kulkarni_nomizu(eye, eye)
    )
    norm = float(math.sqrt(np.sum(weyl * weyl)))
    return WeylParts(weyl, norm, bivector_operator(weyl))


@dataclass(frozen=True)
class CurvaturePointData:
    """
    Complete orthonormal-frame curvature record at one point.

    Attributes:
        point: chart coordinates (None for purely algebraic tensors)
        frame: columns are the orthonormal frame in coordinates
        riemann: R_abcd in the frame
        ricci: Ric_ab
        scalar: s
        weyl: W_abcd
        weyl_norm: |W| as an element of the fourth tensor power
        r_op, w_op: bivector operators of R and W
    """

    point: np.ndarray | None
    frame: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    weyl: np.ndarray
    weyl_norm: float
    r_op: np.ndarray
    w_op: np.ndarray

    @property
    def dim(self) -> int:
        """Manifold dimension."""
        return self.riemann.shape[0]

    @classmethod
    def from_riemann(
        cls,
        riemann: np.ndarray,
        frame: np.ndarray | None = None,
        point: np.ndarray | None = None,
    ) -> CurvaturePointData:
        """Build the full record from frame components R_abcd."""
        riemann = np.asarray(riemann, dtype=float)
        n = riemann.shape[0]
        ricci = np.einsum("abad->bd", riemann)
        scalar = float(np.trace(ricci))
        weyl, norm, w_op = _weyl_parts(riemann, ricci, scalar)
        return cls(
            point=point,
            frame=np.eye(n) if frame is None else frame,
            riemann=riemann,
            ricci=ricci,
            scalar=scalar,
            weyl=weyl,
            weyl_norm=norm,
            r_op=bivector_operator(riemann),
            w_op=w_op,
        )

    def sectional(self, a: int, b: int) -> float:
        """Sectional curvature of the frame plane e_a ^ e_b."""
        return float(self.riemann[a, b, a, b])

    def sigma(self, mu: float = 1.0 / 6.0) -> float:
        """Return the modified scalar curvature mu * s + |W|."""
        return mu * self.scalar + self.weyl_norm


def christoffel(jet: MetricJet) -> tuple[np.ndarray, np.ndarray]:
    """
    Christoffel symbols and their first partials from a metric jet.

    Returns (gamma, dgamma) with gamma[k, i, j] = G^k_ij and
    dgamma[m, k, i, j] = d_m G^k_ij. The partials come from the second
    derivatives of g, never from differencing gamma itself.
    """
    g, dg, ddg = jet
    ginv = np.linalg.inv(g)
    # G_lij = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    lower = 0.5 * (
        np.einsum("ijl->lij", dg)
        + np.einsum("jil->lij", dg)
        - dg
    )
    gamma = np.einsum("kl,lij->kij", ginv, lower)
    if ddg is None:
        return gamma, None

    dlower = 0.5 * (
        np.einsum("mijl->mlij", ddg)
        + np.einsum("mjil->mlij", ddg)
        - ddg
    )
    # d_m g^kl = -(g^-1 d_m g g^-1)^kl
    dginv = -np.einsum("ka,mab,bl->mkl", ginv, dg, ginv)
    dgamma = (
        np.einsum("mkl,lij->mkij", dginv, lower)
        + np.einsum("kl,mlij->mkij", ginv, dlower)
    )
    return gamma, dgamma


def riemann_coordinates(jet: MetricJet) -> np.ndarray:
    """Fully covariant R_abcd in coordinates."""
    gamma, dgamma = christoffel(jet)
    r_up = (
        np.einsum("cadb->abcd", dgamma)
        - np.einsum("dacb->abcd", dgamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )
    return np.einsum("ae,ebcd->abcd", jet.g, r_up)


def to_frame(tensor: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Express a covariant 4-tensor in the columns of `frame`."""
    return np.einsum("ijkl,ia,jb,kc,ld->abcd", tensor,
                     frame, frame, frame, frame)


def curvature_at(
    m: MetricField,
    x: Sequence[float],
    options: DerivativeOptions = DEFAULT_OPTIONS,
    flip_sign: bool = False,
) -> CurvaturePointData:
    """
    Curvature hierarchy of m at x in the Gram-Schmidt orthonormal frame.

    `flip_sign` negates the Riemann tensor; it exists only as a negative
    control for the verify suites.

    Raises:
        OutOfDomain, StencilOutOfDomain, NotPositiveDefinite: from
            metric-core
    """
    x = m.chart.wrap(x)
    jet = metric_derivatives(m, x, order=2, options=options)
    frame = frame_from_gram(jet.g)
    riemann = to_frame(riemann_coordinates(jet), frame)
    if flip_sign:
        riemann = -riemann
    data = CurvaturePointData.from_riemann(riemann, frame=frame, point=x)
    logger.debug("curvature at %s: s=%.6g |W|=%.3g",
                 x.tolist(), data.scalar, data.weyl_norm)
    return data


def weyl_decompose(data: CurvaturePointData) -> WeylParts:
    """
    Weyl part of the Riemann tensor via the Ricci decomposition.

    W = R - Ric.g / (n - 2) + s g.g / (2 (n - 1)(n - 2)) with . the
    Kulkarni-Nomizu product; the norm is sqrt(sum W_abcd^2).
    """
    return _weyl_parts(data.riemann, data.ricci, data.scalar)


def lambda2_operator(data: CurvaturePointData) -> Lambda2Operators:
    """R_op, W_op and Q = (s/6) I - W_op, with Q's eigenvalues ascending."""
    r_op = bivector_operator(data.riemann)
    w_op = bivector_operator(data.weyl)
    q = data.scalar / 6.0 * np.eye(len(w_op)) - w_op
    return Lambda2Operators(r_op, w_op, q, np.linalg.eigvalsh(q))


def laplacian(
    m: MetricField,
    x: Sequence[float],
    u: ScalarField,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> float:
    """Delta_g u = g^ij (d_i d_j u - G^k_ij d_k u) (analysts' sign)."""
    x = m.chart.wrap(x)
    jet = metric_derivatives(m, x, order=1, options=options)
    gamma, _ = christoffel(jet)
    _, grad, hess = u.jet(x)
    ginv = np.linalg.inv(jet.g)
    return float(np.einsum(
        "ij,ij->", ginv, hess - np.einsum("kij,k->ij", gamma, grad)
    ))


class ScaleReport(NamedTuple):
    """Both sides of |W_{f^2 g}|_{f^2 g} = f^-2 |W_g|_g at a point."""

    scaled_norm: float
    predicted: float
    gap: float


def conformal_scale_check(
    m: MetricField,
    f: ScalarField,
    x: Sequence[float],
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> ScaleReport:
    """
    Compare |W| of f^2 g with f^-2 |W_g| at x.

    The gap is relative to the predicted value; when both sides vanish
    (conformally flat input) it is the absolute difference.
    """
    base = curvature_at(m, x, options)
    scaled = curvature_at(ConformalMetric.from_factor(m, f, power=2.0),
                          x, options)
    predicted = base.weyl_norm / f(m.chart.wrap(x)) ** 2
    diff = abs(scaled.weyl_norm - predicted)
    gap = diff / predicted if predicted > 1e-300 else diff
    return ScaleReport(scaled.weyl_norm, predicted, gap)


def constant_curvature_tensor(kappa: float, dim: int = 4) -> np.ndarray:
    """Return kappa (delta_ac delta_bd - delta_ad delta_bc)."""
    return 0.5 * kappa * kulkarni_nomizu(np.eye(dim), np.eye(dim))


def symmetry_defects(riemann: np.ndarray) -> dict[str, float]:
    """Largest violations of the algebraic curvature symmetries."""
    return {
        "antisym_first": float(np.max(np.abs(
            riemann + np.einsum("bacd->abcd", riemann)))),
        "antisym_last": float(np.max(np.abs(
            riemann + np.einsum("abdc->abcd", riemann)))),
        "pair_swap": float(np.max(np.abs(
            riemann - np.einsum("cdab->abcd", riemann)))),
        "bianchi": float(np.max(np.abs(
            riemann
            + np.einsum("acdb->abcd", riemann)
            + np.einsum("adbc->abcd", riemann)))),
    }
