"""
Isotropic curvature, the NIC/PIC verdict and sigma_mu.

For an orthonormal frame e1..e4 the complex vectors v = e1 + i e2 and
w = e3 + i e4 span an isotropic 2-plane, and

    K = <R(v ^ w), conj(v) ^ conj(w)> = a^T R a + b^T R b

with a = e1^e3 - e2^e4 and b = e1^e4 + e2^e3 (both in one of the
half-spaces of bivectors). Hence the extremes of K over all isotropic
planes are 2 q_max and 2 q_min, q the eigenvalues of Q = (s/6) I - W.

Extremes are searched by Haar-random frames plus exact Jacobi coordinate
ascent: rotating two frame vectors by theta makes K a pure
a0 + a1 cos 2 theta + b1 sin 2 theta, maximized in closed form.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from nicurv import NicurvError
from nicurv.geometry.curvature import (
    CurvaturePointData,
    bivector_pairs,
    constant_curvature_tensor,
    curvature_at,
    lambda2_operator,
    to_frame,
)
from nicurv.geometry.metric import (
    DEFAULT_OPTIONS,
    DerivativeOptions,
    MetricField,
    integrate_density,
)

logger = logging.getLogger(__name__)

_ORTHO_TOL = 1e-12
# budget doublings before a search is reported as unstable
_MAX_DOUBLINGS = 3
_STABLE_TOL = 1e-8
# best sampled frames handed to coordinate ascent
_ASCENT_STARTS = 8
_GIVENS = [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1), (2, 3)]


class FrameNotOrthonormal(NicurvError):
    """Raised when an isotropic plane is built from a non-orthonormal frame."""


class RoutesDisagree(NicurvError):
    """Complex and real isotropic curvature differ beyond tolerance."""


class Verdict(str, enum.Enum):
    """Sign classification of isotropic curvature."""

    NIC = "NIC"
    PIC = "PIC"
    INDEFINITE = "INDEFINITE"


@dataclass(frozen=True)
class IsotropicPlane:
    """
    Isotropic plane spanned by v = e1 + i e2, w = e3 + i e4.

    `frame` columns are e1..e4 in the orthonormal frame of the curvature
    data (so orthonormality is Euclidean).
    """

    frame: np.ndarray

    def __post_init__(self) -> None:
        """Check the frame is a 4 x 4 orthogonal matrix."""
        frame = np.asarray(self.frame, dtype=float)
        if frame.shape != (4, 4):
            raise FrameNotOrthonormal(f"frame must be 4x4, got {frame.shape}")
        defect = float(np.max(np.abs(frame.T @ frame - np.eye(4))))
        if defect > _ORTHO_TOL:
            raise FrameNotOrthonormal(
                f"frame Gram matrix deviates from I by {defect:.3e}"
            )
        object.__setattr__(self, "frame", frame)

    @classmethod
    def from_coordinates(cls, vectors: np.ndarray,
                         data: CurvaturePointData) -> IsotropicPlane:
        """Plane from coordinate-basis vectors (columns) at data's point."""
        return cls(np.linalg.solve(data.frame, np.asarray(vectors, float)))

    @property
    def v(self) -> np.ndarray:
        """Isotropic vector e1 + i e2."""
        return self.frame[:, 0] + 1j * self.frame[:, 1]

    @property
    def w(self) -> np.ndarray:
        """Isotropic vector e3 + i e4."""
        return self.frame[:, 2] + 1j * self.frame[:, 3]

    def isotropy_defect(self) -> float:
        """Largest of |<v,v>|, |<w,w>|, |<v,w>| (bilinear extension)."""
        v, w = self.v, self.w
        return float(max(abs(v @ v), abs(w @ w), abs(v @ w)))


def _wedge(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bivector components of u ^ v (batched over leading axes)."""
    a, b = np.array(bivector_pairs(u.shape[-1])).T
    return u[..., a] * v[..., b] - u[..., b] * v[..., a]


def isotropic_curvature_complex(data: CurvaturePointData,
                                plane: IsotropicPlane) -> float:
    """K by complex arithmetic on the bivector X = v ^ w."""
    x = _wedge(plane.v, plane.w)
    return float(np.real(x @ data.r_op @ np.conj(x)))


def isotropic_curvature_real(data: CurvaturePointData,
                             plane: IsotropicPlane) -> float:
    """K = R1313 + R1414 + R2323 + R2424 - 2 R1234 in the plane's frame."""
    r = to_frame(data.riemann, plane.frame)
    return float(r[0, 2, 0, 2] + r[0, 3, 0, 3] + r[1, 2, 1, 2]
                 + r[1, 3, 1, 3] - 2.0 * r[0, 1, 2, 3])


def isotropic_curvature(data: CurvaturePointData, plane: IsotropicPlane,
                        tol: float = 1e-10) -> float:
    """
    Isotropic curvature <R(v ^ w), conj(v) ^ conj(w)>.

    Both the complex and the real expansion are evaluated. They agree
    for every algebraic curvature tensor, so a gap beyond `tol` (relative
    to the curvature scale) means the tensor fails the first Bianchi
    identity.

    Raises:
        RoutesDisagree: if the two routes differ by more than `tol`
    """
    k_complex = isotropic_curvature_complex(data, plane)
    k_real = isotropic_curvature_real(data, plane)
    scale = max(1.0, float(np.max(np.abs(data.r_op))))
    gap = abs(k_complex - k_real)
    if gap > tol * scale:
        raise RoutesDisagree(
            f"isotropic curvature routes disagree: complex {k_complex!r}, "
            f"real {k_real!r} (gap {gap:.3e} > {tol * scale:.3e})"
        )
    return k_complex


def batched_isotropic(r_op: np.ndarray, frames: np.ndarray) -> np.ndarray:
    """K for a stack of frames (N, 4, 4) via a^T R a + b^T R b."""
    e = np.swapaxes(frames, -1, -2)
    a = _wedge(e[..., 0, :], e[..., 2, :]) - _wedge(e[..., 1, :], e[..., 3, :])
    b = _wedge(e[..., 0, :], e[..., 3, :]) + _wedge(e[..., 1, :], e[..., 2, :])
    return (np.einsum("...i,ij,...j->...", a, r_op, a)
            + np.einsum("...i,ij,...j->...", b, r_op, b))


def haar_frames(rng: np.random.Generator, count: int) -> np.ndarray:
    """Haar-distributed orthogonal 4x4 matrices (QR with sign fix)."""
    q, r = np.linalg.qr(rng.standard_normal((count, 4, 4)))
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0.0] = 1.0
    return q * signs[:, None, :]


def _rotate(frame: np.ndarray, i: int, j: int, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    out = frame.copy()
    out[:, i] = c * frame[:, i] + s * frame[:, j]
    out[:, j] = -s * frame[:, i] + c * frame[:, j]
    return out


def coordinate_ascent(r_op: np.ndarray, frame: np.ndarray, sweeps: int,
                      maximize: bool = True) -> tuple[float, np.ndarray]:
    """
    Exact Jacobi sweeps over the Givens planes of the frame.

    Returns the final value of K and the frame. Stops early once a sweep
    improves by less than 1e-15 relative.
    """
    sign = 1.0 if maximize else -1.0
    best = float(batched_isotropic(r_op, frame[None])[0])
    for _ in range(sweeps):
        start = best
        for i, j in _GIVENS:
            trial = np.stack([_rotate(frame, i, j, t)
                              for t in (0.0, 0.5 * math.pi, 0.25 * math.pi)])
            k0, k90, k45 = batched_isotropic(r_op, trial)
            a0 = 0.5 * (k0 + k90)
            a1 = 0.5 * (k0 - k90)
            b1 = k45 - a0
            theta = 0.5 * math.atan2(sign * b1, sign * a1)
            candidate = _rotate(frame, i, j, theta)
            value = float(batched_isotropic(r_op, candidate[None])[0])
            if sign * (value - best) > 0.0:
                frame, best = candidate, value
        if sign * (best - start) <= 1e-15 * max(1.0, abs(best)):
            break
    return best, frame


@dataclass(frozen=True)
class SearchBudget:
    """Random frames and coordinate-ascent sweeps for one search."""

    samples: int = 512
    refinements: int = 64

    def doubled(self) -> SearchBudget:
        """Return a budget with twice the samples and refinements."""
        return SearchBudget(2 * self.samples, 2 * self.refinements)


def _search(r_op: np.ndarray, rng: np.random.Generator,
            budget: SearchBudget) -> tuple[float, float]:
    frames = haar_frames(rng, budget.samples)
    values = batched_isotropic(r_op, frames)
    k_max, k_min = float(values.max()), float(values.min())
    # rotations keep orientation, so each component gets its own starts
    half = max(1, _ASCENT_STARTS // 2)
    positive = np.linalg.det(frames) > 0.0
    for mask in (positive, ~positive):
        idx = np.flatnonzero(mask)
        if not idx.size:
            continue
        order = idx[np.argsort(values[idx])]
        for i in order[-half:]:
            k, _ = coordinate_ascent(r_op, frames[i], budget.refinements)
            k_max = max(k_max, k)
        for i in order[:half]:
            k, _ = coordinate_ascent(r_op, frames[i], budget.refinements,
                                     maximize=False)
            k_min = min(k_min, k)
    return k_min, k_max


@dataclass(frozen=True)
class IsotropicVerdict:
    """
    Extremal isotropic curvatures at a point and the resulting verdict.

    k_min/k_max come from the frame search; k_min_exact/k_max_exact are
    2 q_min / 2 q_max from the spectrum of Q.
    """

    k_min: float
    k_max: float
    sigma: float
    q_max: float
    verdict: Verdict
    k_min_exact: float = math.nan
    k_max_exact: float = math.nan
    budget: SearchBudget = field(default_factory=SearchBudget)
    stable: bool = True

    @property
    def search_gap(self) -> float:
        """Largest distance of the searched extremes from the spectral ones."""
        return max(abs(self.k_max - self.k_max_exact),
                   abs(self.k_min - self.k_min_exact))


def classify(k_min: float, k_max: float, scale: float = 1.0,
             tol: float = 1e-8) -> Verdict:
    """
    NIC iff k_max < 0, PIC iff k_min > 0.

    Values within tol * max(1, scale) of zero count as zero; the band
    matches the stability tolerance of the search.
    """
    eps = tol * max(1.0, scale)
    if k_max < -eps:
        return Verdict.NIC
    if k_min > eps:
        return Verdict.PIC
    return Verdict.INDEFINITE


def extremal_isotropic(
    data: CurvaturePointData,
    budget: SearchBudget = SearchBudget(),
    seed: int = 0,
    index: int = 0,
) -> IsotropicVerdict:
    """
    Extremal isotropic curvatures by random frames plus coordinate ascent.

    The stream default_rng([seed, index]) drives the search, so results
    do not depend on evaluation order. The budget doubles until k_max and
    k_min move by less than 1e-8.
    """
    r_op = data.r_op
    ops = lambda2_operator(data)
    q = ops.q_eigenvalues
    rng = np.random.default_rng([seed, index])
    k_min, k_max = _search(r_op, rng, budget)
    stable = False
    for _ in range(_MAX_DOUBLINGS):
        budget = budget.doubled()
        n_min, n_max = _search(r_op, rng, budget)
        moved = max(abs(n_max - k_max), abs(n_min - k_min))
        k_min, k_max = min(k_min, n_min), max(k_max, n_max)
        if moved <= _STABLE_TOL:
            stable = True
            break
    if not stable:
        logger.warning("isotropic search at index %d not stable within %.0e "
                       "after %d doublings", index, _STABLE_TOL,
                       _MAX_DOUBLINGS)
    scale = float(np.max(np.abs(r_op))) if r_op.size else 1.0
    return IsotropicVerdict(
        k_min=k_min,
        k_max=k_max,
        sigma=data.sigma(1.0 / 6.0),
        q_max=float(q[-1]),
        verdict=classify(k_min, k_max, scale),
        k_min_exact=2.0 * float(q[0]),
        k_max_exact=2.0 * float(q[-1]),
        budget=budget,
        stable=stable,
    )


# ---------------------------------------------------------------------------
# sigma_mu fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmaField:
    """sigma_mu = mu s + |W| at quadrature nodes, with its integral."""

    points: np.ndarray
    values: np.ndarray
    integral: float
    mu: float


def sigma_field(
    m: MetricField,
    mu: float,
    region: Optional[Sequence[Optional[tuple[float, float]]]] = None,
    nodes: int | Sequence[int] = 5,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> SigmaField:
    """Pointwise sigma_mu on the quadrature grid and its volume integral."""
    if mu <= 0.0:
        raise NicurvError(f"mu must be positive, got {mu}")
    points: list[np.ndarray] = []
    values: list[float] = []

    def phi(x: np.ndarray) -> float:
        value = curvature_at(m, x, options).sigma(mu)
        points.append(x.copy())
        values.append(value)
        return value

    integral = integrate_density(m, phi, region, nodes)
    return SigmaField(np.array(points), np.array(values), integral, mu)


# ---------------------------------------------------------------------------
# Random algebraic curvature tensors
# ---------------------------------------------------------------------------


def tensor_from_operator(op: np.ndarray) -> np.ndarray:
    """4-tensor with pair symmetries whose bivector matrix is `op`."""
    n = 4 if len(op) == 6 else 3
    t = np.zeros((n,) * 4)
    pairs = bivector_pairs(n)
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            value = op[i, j]
            t[a, b, c, d] = value
            t[b, a, c, d] = -value
            t[a, b, d, c] = -value
            t[b, a, d, c] = value
    return t


def bianchi_projection(t: np.ndarray) -> np.ndarray:
    """Remove the totally antisymmetric part: R = T - b(T)."""
    cyclic = (t + np.einsum("acdb->abcd", t)
              + np.einsum("adbc->abcd", t)) / 3.0
    return t - cyclic


def random_curvature_tensor(rng: np.random.Generator,
                            scale: float = 1.0) -> np.ndarray:
    """Random algebraic curvature tensor in dimension 4."""
    m = rng.standard_normal((6, 6)) * scale
    return bianchi_projection(tensor_from_operator(0.5 * (m + m.T)))


@dataclass(frozen=True)
class CrosscheckReport:
    """
    Search sign of k_max against the spectral sign of q_max.

    agreement[i][j] counts tensors with (k_max < 0) == bool(1 - i) and
    (q_max < 0) == bool(1 - j); `counterexamples` holds the index and
    tensor of every disagreement, `sufficiency_failures` those with
    sigma < 0 but k_max >= 0.
    """

    count: int
    seed: int
    agreement: tuple[tuple[int, int], tuple[int, int]]
    counterexamples: list[tuple[int, np.ndarray]]
    sufficiency_failures: list[tuple[int, np.ndarray]]
    max_search_gap: float

    @property
    def agreement_rate(self) -> float:
        """Fraction of tensors where the two criteria agree."""
        agree = self.agreement[0][0] + self.agreement[1][1]
        return agree / self.count if self.count else 1.0


def criterion_crosscheck(
    count: int,
    seed: int,
    budget: SearchBudget = SearchBudget(64, 16),
    tensors: Optional[Sequence[np.ndarray]] = None,
) -> CrosscheckReport:
    """
    Compare the frame-search verdict with the spectral criterion.

    Tensor i is drawn from default_rng([seed, i]) unless `tensors` is
    given. Disagreements are collected, never raised.
    """
    table = [[0, 0], [0, 0]]
    counterexamples: list[tuple[int, np.ndarray]] = []
    failures: list[tuple[int, np.ndarray]] = []
    worst = 0.0
    total = len(tensors) if tensors is not None else count
    for i in range(total):
        r = (tensors[i] if tensors is not None
             else random_curvature_tensor(np.random.default_rng([seed, i])))
        data = CurvaturePointData.from_riemann(r)
        verdict = extremal_isotropic(data, budget, seed=seed, index=i)
        worst = max(worst, verdict.search_gap)
        k_neg = verdict.k_max < 0.0
        q_neg = verdict.q_max < 0.0
        table[0 if k_neg else 1][0 if q_neg else 1] += 1
        if k_neg != q_neg:
            counterexamples.append((i, r))
            logger.warning("criterion disagreement at tensor %d (seed %d): "
                           "k_max=%.3e q_max=%.3e", i, seed,
                           verdict.k_max, verdict.q_max)
        if verdict.sigma < 0.0 and not k_neg:
            failures.append((i, r))
    return CrosscheckReport(
        count=total,
        seed=seed,
        agreement=((table[0][0], table[0][1]), (table[1][0], table[1][1])),
        counterexamples=counterexamples,
        sufficiency_failures=failures,
        max_search_gap=worst,
    )


def constant_curvature_data(kappa: float) -> CurvaturePointData:
    """Curvature record of a constant-curvature tensor (W = 0)."""
    return CurvaturePointData.from_riemann(constant_curvature_tensor(kappa))


def check_point(
    m: MetricField,
    x: Sequence[float],
    budget: SearchBudget = SearchBudget(),
    seed: int = 0,
    index: int = 0,
    options: DerivativeOptions = DEFAULT_OPTIONS,
    flip_sign: bool = False,
) -> tuple[CurvaturePointData, IsotropicVerdict]:
    """Curvature plus isotropic verdict at one grid point."""
    data = curvature_at(m, x, options, flip_sign=flip_sign)
    return data, extremal_isotropic(data, budget, seed, index)


__all__ = [
    "IsotropicPlane", "IsotropicVerdict", "Verdict", "SearchBudget",
    "FrameNotOrthonormal", "RoutesDisagree", "isotropic_curvature",
    "extremal_isotropic",
    "sigma_field", "criterion_crosscheck", "random_curvature_tensor",
    "haar_frames", "batched_isotropic",
]
