"""
Conformal deformation by the lowest eigenfunction of L_mu.

L_mu = -mu kappa Delta + sigma_mu with kappa = 4(n - 1)/(n - 2) and
sigma_mu = mu s + |W|. Under g~ = u^{4/(n-2)} g,

    sigma~ = u^{-4/(n-2)} sigma - mu kappa u^{-(n+2)/(n-2)} Delta u

so L_mu u = lambda u gives sigma~ = lambda u^{-4/(n-2)}, negative
wherever lambda is. mu = 1 is the plain scalar-curvature law.

The closed glued manifold is reduced to a chain of finite-volume cells
in the profile coordinate t, with lumped end nodes for the hyperbolic
core and the cap. The discrete operator is

    (L u)_i = -(D / V_i) sum_j w_ij (u_j - u_i) + sigma_i u_i,  D = mu kappa

self-adjoint for the V-weighted inner product; it is solved in the
symmetric form V^{1/2} L V^{-1/2}, which is tridiagonal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, linalg

from nicurv import NicurvError
from nicurv.geometry.curvature import curvature_at, laplacian
from nicurv.geometry.gluing import GluedFamily, warped_curvature_samples
from nicurv.geometry.metric import (
    DEFAULT_OPTIONS,
    ConformalMetric,
    DerivativeOptions,
    MetricField,
    ScalarField,
    WarpedRegion,
    integrate_density,
    tensor_grid,
)

logger = logging.getLogger(__name__)


class DegenerateCell(NicurvError):
    """Raised when a cell volume or face weight is not positive."""


class NoConvergence(NicurvError):
    """Raised when inverse iteration exhausts its iteration budget."""


class NegativeComponent(NicurvError):
    """Raised when the converged lowest mode changes sign."""


class NonPositiveU(NicurvError):
    """Raised when a conformal factor is not strictly positive."""


def kappa(n: int = 4) -> float:
    """Conformal Laplacian constant 4 (n - 1) / (n - 2)."""
    return 4.0 * (n - 1) / (n - 2)


class LumpedNode(NamedTuple):
    """
    An end node carrying a whole region.

    Holds its volume, sigma and the fiber density of the interface it is
    attached through.
    """

    volume: float
    sigma: float
    interface_density: float
    label: str


@dataclass(frozen=True)
class ProfileManifold:
    """
    Chain of nodes along the profile coordinate.

    Attributes:
        t: node positions (lumped nodes sit at the chain ends)
        volumes: V_i > 0
        sigma: sigma_mu at each node (cell averages for interval cells)
        weights: face weights w_{i,i+1} > 0, one per adjacent pair
        kinds: "bulk", "cell" or "cap" per node
        mu: weight of s in sigma_mu (the operator uses D = mu kappa)
        n_dim: manifold dimension
    """

    t: np.ndarray
    volumes: np.ndarray
    sigma: np.ndarray
    weights: np.ndarray
    kinds: tuple[str, ...]
    mu: float = 1.0
    n_dim: int = 4

    def __post_init__(self) -> None:
        """Check array lengths, positive volumes and positive weights."""
        n = len(self.volumes)
        if len(self.sigma) != n or len(self.t) != n or len(self.kinds) != n:
            raise DegenerateCell("node arrays have inconsistent lengths")
        if len(self.weights) != n - 1:
            raise DegenerateCell(
                f"a chain of {n} nodes needs {n - 1} weights, "
                f"got {len(self.weights)}"
            )
        bad = np.flatnonzero(~(self.volumes > 0.0))
        if bad.size:
            raise DegenerateCell(
                f"node {int(bad[0])} has volume {self.volumes[bad[0]]!r}"
            )
        bad = np.flatnonzero(~(self.weights > 0.0))
        if bad.size:
            raise DegenerateCell(
                f"face {int(bad[0])} has weight {self.weights[bad[0]]!r}"
            )

    def __len__(self) -> int:
        """Return the number of nodes."""
        return len(self.volumes)

    @property
    def diffusion(self) -> float:
        """Coefficient mu kappa of the Laplacian in L."""
        return self.mu * kappa(self.n_dim)

    @property
    def total_volume(self) -> float:
        """Sum of the node volumes."""
        return float(np.sum(self.volumes))

    @property
    def total_sigma(self) -> float:
        """The discrete F = sum sigma_i V_i."""
        return float(np.sum(self.sigma * self.volumes))

    def rayleigh_constant(self) -> float:
        """<L 1, 1>_V / <1, 1>_V = F / Vol, an upper bound for lambda."""
        return self.total_sigma / self.total_volume

    @classmethod
    def from_profile(
        cls,
        density: Callable[[np.ndarray], np.ndarray],
        sigma: Callable[[np.ndarray], np.ndarray],
        interval: tuple[float, float],
        cells: int,
        mu: float = 1.0,
        left: Optional[LumpedNode] = None,
        right: Optional[LumpedNode] = None,
        subnodes: int = 5,
        n_dim: int = 4,
    ) -> ProfileManifold:
        """
        Finite-volume chain of `cells` equal cells over `interval`.

        V_i and sigma_i are Simpson cell averages against the fiber
        density; interior faces weigh density(face) / dt, faces to lumped
        end nodes interface_density / (dt / 2). Without lumped nodes the
        chain carries natural (Neumann) ends.
        """
        lo, hi = interval
        if cells < 1 or not hi > lo:
            raise DegenerateCell(f"bad profile grid {interval} x {cells}")
        if subnodes % 2 == 0:
            subnodes += 1
        edges = np.linspace(lo, hi, cells + 1)
        dt = edges[1] - edges[0]
        sub = edges[:-1, None] + np.linspace(0.0, dt, subnodes)[None, :]
        rho = np.asarray(density(sub.ravel()), dtype=float).reshape(sub.shape)
        sig = np.asarray(sigma(sub.ravel()), dtype=float).reshape(sub.shape)
        vols = integrate.simpson(rho, x=sub, axis=-1)
        sigmas = integrate.simpson(sig * rho, x=sub, axis=-1) / vols
        faces = np.asarray(density(edges[1:-1]), dtype=float) / dt

        t = list(0.5 * (edges[:-1] + edges[1:]))
        volumes, sig_nodes, weights = list(vols), list(sigmas), list(faces)
        kinds = ["cell"] * cells
        if left is not None:
            t.insert(0, lo)
            volumes.insert(0, left.volume)
            sig_nodes.insert(0, left.sigma)
            weights.insert(0, left.interface_density / (0.5 * dt))
            kinds.insert(0, left.label)
        if right is not None:
            t.append(hi)
            volumes.append(right.volume)
            sig_nodes.append(right.sigma)
            weights.append(right.interface_density / (0.5 * dt))
            kinds.append(right.label)
        return cls(np.array(t), np.array(volumes), np.array(sig_nodes),
                   np.array(weights), tuple(kinds), mu=mu, n_dim=n_dim)


class ProfileOperator(NamedTuple):
    """Discrete L_mu with its symmetric tridiagonal form (diag, off)."""

    pm: ProfileManifold
    diag: np.ndarray
    off: np.ndarray

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """(Delta u)_i = (1 / V_i) sum_j w_ij (u_j - u_i)."""
        w = self.pm.weights
        flux = w * np.diff(u)
        out = np.zeros_like(u, dtype=float)
        out[:-1] += flux
        out[1:] -= flux
        return out / self.pm.volumes

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Apply L to a nodal function."""
        u = np.asarray(u, dtype=float)
        return -self.pm.diffusion * self.laplacian(u) + self.pm.sigma * u

    def symmetric(self) -> np.ndarray:
        """Symmetrised matrix V^(1/2) L V^(-1/2)."""
        return (np.diag(self.diag) + np.diag(self.off, 1)
                + np.diag(self.off, -1))

    def dense(self) -> np.ndarray:
        """L itself (not symmetric unless all V_i are equal)."""
        root = np.sqrt(self.pm.volumes)
        return self.symmetric() * (1.0 / root)[:, None] * root[None, :]


def assemble_L(pm: ProfileManifold) -> ProfileOperator:
    """
    Assemble L_mu on a profile manifold.

    Symmetric form: d_i = D (w_{i-1} + w_i) / V_i + sigma_i and
    e_i = -D w_i / sqrt(V_i V_{i+1}).
    """
    d = pm.diffusion
    w = pm.weights
    v = pm.volumes
    flux = np.zeros(len(v))
    flux[:-1] += w
    flux[1:] += w
    diag = d * flux / v + pm.sigma
    off = -d * w / np.sqrt(v[:-1] * v[1:])
    return ProfileOperator(pm, diag, off)


class EigenSolution(NamedTuple):
    """Lowest eigenpair of L_mu with ||u||_2 = 1 and u > 0."""

    lam: float
    u: np.ndarray
    residual: float
    iterations: int


def sturm_count(diag: np.ndarray, off: np.ndarray, shift: float) -> int:
    """Count eigenvalues below `shift` (negative LDL^T pivots)."""
    count = 0
    prev = 0.0
    for i, d in enumerate(diag):
        coupling = off[i - 1] ** 2 if i else 0.0
        pivot = (d - shift) - (coupling / prev if i else 0.0)
        if pivot == 0.0:
            pivot = -1e-300
        if pivot < 0.0:
            count += 1
        prev = pivot
    return count


def gershgorin_lower(diag: np.ndarray, off: np.ndarray) -> float:
    """Gershgorin lower bound for a symmetric tridiagonal matrix."""
    radius = np.zeros(len(diag))
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    return float(np.min(diag - radius))


def _u_from_y(y: np.ndarray, volumes: np.ndarray) -> np.ndarray:
    u = y / np.sqrt(volumes)
    return u / np.linalg.norm(u)


def lowest_eigenpair(
    op: ProfileOperator,
    tol: float = 1e-10,
    max_iter: int = 500,
    polish: int = 2,
) -> EigenSolution:
    """
    Lowest eigenpair by shifted inverse iteration.

    The shift starts below the Gershgorin bound and moves up to
    (Rayleigh quotient - residual) whenever a Sturm count proves it is
    still below the spectrum, so every banded solve is positive
    definite. Converged when ||L u - lambda u||_2 <= tol with
    ||u||_2 = 1; `polish` extra iterations follow.

    Raises:
        NoConvergence: residual above tol after max_iter iterations
        NegativeComponent: the converged mode changes sign
    """
    diag, off = op.diag, op.off
    volumes = op.pm.volumes
    n = len(diag)
    lower = gershgorin_lower(diag, off)
    shift = lower - max(1.0, abs(lower)) * 1e-3
    band = np.zeros((3, n))
    band[0, 1:] = off
    band[2, :-1] = off
    y = np.sqrt(volumes)
    y = y / np.linalg.norm(y)

    def step(y: np.ndarray, shift: float) -> np.ndarray:
        band[1] = diag - shift
        z = linalg.solve_banded((1, 1), band, y)
        return z / np.linalg.norm(z)

    def sym_apply(y: np.ndarray) -> np.ndarray:
        out = diag * y
        out[:-1] += off * y[1:]
        out[1:] += off * y[:-1]
        return out

    def measure(y: np.ndarray) -> tuple[float, np.ndarray, float]:
        lam = float(y @ sym_apply(y))
        u = _u_from_y(y, volumes)
        return lam, u, float(np.linalg.norm(op.apply(u) - lam * u))

    lam, u, residual = measure(y)
    iterations = 0
    while residual > tol:
        if iterations >= max_iter:
            raise NoConvergence(
                f"inverse iteration: residual {residual:.3e} > {tol:.1e} "
                f"after {max_iter} iterations"
            )
        y = step(y, shift)
        iterations += 1
        lam, u, residual = measure(y)
        candidate = lam - float(np.linalg.norm(sym_apply(y) - lam * y))
        if candidate > shift and sturm_count(diag, off, candidate) == 0:
            logger.debug("iteration %d: shift %.12g -> %.12g",
                         iterations, shift, candidate)
            shift = candidate
    for _ in range(polish):
        trial = step(y, shift)
        t_lam, t_u, t_res = measure(trial)
        if t_res > residual:
            break
        y, lam, u, residual = trial, t_lam, t_u, t_res

    if u.sum() < 0.0:
        u = -u
    if np.any(u <= 0.0):
        i = int(np.argmin(u))
        raise NegativeComponent(
            f"lowest mode has u[{i}] = {u[i]!r} ({op.pm.kinds[i]} node)"
        )
    logger.info("lowest eigenpair: lambda=%.12g residual=%.2e (%d its)",
                lam, residual, iterations)
    return EigenSolution(lam, u, residual, iterations)


class Spectrum(NamedTuple):
    """Lowest eigenvalues and eigenfunctions (u-space, unit 2-norm)."""

    values: np.ndarray
    modes: np.ndarray


def profile_spectrum(op: ProfileOperator, count: int = 2) -> Spectrum:
    """Direct tridiagonal eigen-decomposition of the `count` lowest modes."""
    count = min(count, len(op.diag))
    values, vectors = linalg.eigh_tridiagonal(
        op.diag, op.off, select="i", select_range=(0, count - 1)
    )
    modes = np.empty((count, len(op.diag)))
    for k in range(count):
        u = _u_from_y(vectors[:, k], op.pm.volumes)
        modes[k] = -u if u.sum() < 0.0 else u
    return Spectrum(values, modes)


class Deformation(NamedTuple):
    """sigma~ at every node by the transformation law and by lambda."""

    u: np.ndarray
    sigma_law: np.ndarray
    sigma_eigen: np.ndarray
    gap: float

    @property
    def sigma_max(self) -> float:
        """Largest deformed sigma over the nodes."""
        return float(np.max(self.sigma_law))


def conformal_deform(pm: ProfileManifold, sol: EigenSolution,
                     op: Optional[ProfileOperator] = None) -> Deformation:
    """
    sigma~ of u^{4/(n-2)} g computed two ways.

    u is first rescaled to max 1. Way A applies the transformation law
    with the discrete Laplacian, way B is lambda u^{-4/(n-2)}; the gap is
    max |A - B| / max |B|.

    Raises:
        NonPositiveU: if u has a non-positive entry
    """
    if np.any(sol.u <= 0.0):
        i = int(np.argmin(sol.u))
        raise NonPositiveU(f"u[{i}] = {sol.u[i]!r} is not positive")
    if sol.residual > 1e-10:
        logger.warning("eigen residual %.2e exceeds 1e-10; the two forms "
                       "of sigma~ will differ accordingly", sol.residual)
    op = op or assemble_L(pm)
    n = pm.n_dim
    u = sol.u / np.max(sol.u)
    conf = u ** (-4.0 / (n - 2))
    law = (conf * pm.sigma
           - pm.diffusion * u ** (-(n + 2.0) / (n - 2)) * op.laplacian(u))
    eigen = sol.lam * conf
    scale = max(float(np.max(np.abs(eigen))), 1e-300)
    gap = float(np.max(np.abs(law - eigen))) / scale
    return Deformation(u, law, eigen, gap)


# ---------------------------------------------------------------------------
# Glued profile
# ---------------------------------------------------------------------------


def glued_profile(
    fam: GluedFamily,
    cells: int = 256,
    mu: float = 1.0 / 6.0,
    pad: float = 0.5,
    subnodes: int = 5,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> ProfileManifold:
    """
    Profile reduction of the closed glued manifold (g_c, c = fam.c).

    Cells cover [0, a(c) + 1 + pad] with fiber density f_c^2 Area ell;
    sigma_mu is exact on the cusp (-6 mu / c^2) and the flat end (0) and
    comes from the curvature engine inside the transition. The compact
    core is a lumped node of volume Vol_0 c^3 ell at t = 0, the cap a
    lumped node of volume cap_volume at the far end.
    """
    if cells < 64:
        raise DegenerateCell(f"glued profile needs >= 64 cells, got {cells}")
    c, a = fam.c, fam.a
    fiber = fam.area * fam.ell
    sigma_cusp = -6.0 * mu / c ** 2
    m = fam.band_metric(pad=pad)

    def density(t: np.ndarray) -> np.ndarray:
        return warp_density(fam, t)

    def sigma(t: np.ndarray) -> np.ndarray:
        out = np.zeros_like(t)
        cusp = t <= a
        band = (t > a) & (t < a + 0.5)
        out[cusp] = sigma_cusp
        if np.any(band):
            s, w = warped_curvature_samples(m, t[band], options)
            out[band] = mu * s + w
        return out

    bulk = LumpedNode(fam.vol0 * c ** 3 * fam.ell, sigma_cusp,
                      c ** 2 * fiber, "bulk")
    cap = LumpedNode(fam.cap_volume,
                     (mu * fam.s_cap + fam.w_cap) / fam.cap_volume,
                     fiber, "cap")
    pm = ProfileManifold.from_profile(
        density, sigma, (0.0, a + 1.0 + pad), cells, mu=mu,
        left=bulk, right=cap, subnodes=subnodes,
    )
    logger.info("glued profile c=%g: %d nodes, Vol=%.6g, F=%.6g",
                c, len(pm), pm.total_volume, pm.total_sigma)
    return pm


def warp_density(fam: GluedFamily, t: np.ndarray) -> np.ndarray:
    """Fiber volume density f_c(t)^2 Area ell."""
    f = fam.profile()(t)
    return f * f * fam.area * fam.ell


def glued_volume(fam: GluedFamily, pad: float = 0.5,
                 nodes: int = 10001) -> float:
    """Total volume of the glued model by direct quadrature."""
    region = WarpedRegion(fam.profile(), (0.0, fam.a + 1.0 + pad),
                          fiber_dim=2, fiber_measure=fam.area * fam.ell)
    cells = integrate_density(region, lambda t: np.ones_like(t), nodes=nodes)
    return fam.vol0 * fam.c ** 3 * fam.ell + cells + fam.cap_volume


# ---------------------------------------------------------------------------
# Full-dimensional transformation law
# ---------------------------------------------------------------------------


class LawReport(NamedTuple):
    """Both sides of the transformation law at each grid point."""

    points: np.ndarray
    direct: np.ndarray
    predicted: np.ndarray
    max_gap: float


def transformation_law_check(
    m: MetricField,
    u: ScalarField,
    points: Optional[Sequence[np.ndarray]] = None,
    counts: Sequence[int] = (4, 4, 4, 4),
    mu: float = 1.0,
    options: DerivativeOptions = DEFAULT_OPTIONS,
) -> LawReport:
    """
    sigma_mu of u^{4/(n-2)} g by the engine against the transformation law.

    Evaluated on `points` or on a regular grid with `counts` nodes per
    axis. The gap is max |direct - predicted| / max |predicted|, or the
    absolute difference when the predicted field vanishes.
    """
    n = m.dim
    deformed = ConformalMetric.from_factor(m, u, power=4.0 / (n - 2))
    pts = list(points) if points is not None else tensor_grid(m.chart, counts)
    direct = np.empty(len(pts))
    predicted = np.empty(len(pts))
    for i, x in enumerate(pts):
        x = m.chart.wrap(x)
        value = u(x)
        if value <= 0.0:
            raise NonPositiveU(f"u({x.tolist()}) = {value!r}")
        base = curvature_at(m, x, options)
        direct[i] = curvature_at(deformed, x, options).sigma(mu)
        predicted[i] = (
            value ** (-4.0 / (n - 2)) * base.sigma(mu)
            - mu * kappa(n) * value ** (-(n + 2.0) / (n - 2))
            * laplacian(m, x, u, options)
        )
    diff = float(np.max(np.abs(direct - predicted)))
    scale = float(np.max(np.abs(predicted)))
    gap = diff / scale if scale > 1e-12 else diff
    logger.info("transformation law on %d points: gap %.3e", len(pts), gap)
    return LawReport(np.array(pts), direct, predicted, gap)


def lambda_upper_bound_holds(pm: ProfileManifold, sol: EigenSolution,
                             slack: float = 1e-12) -> bool:
    """Check lambda <= F / Vol (constant test function)."""
    bound = pm.rayleigh_constant()
    return sol.lam <= bound + slack * max(1.0, abs(bound))


class GluedSolution(NamedTuple):
    """Profile, operator, lowest eigenpair and deformation at one c."""

    pm: ProfileManifold
    op: ProfileOperator
    sol: EigenSolution
    deformation: Deformation


def solve_glued(
    fam: GluedFamily,
    cells: int = 256,
    mu: float = 1.0 / 6.0,
    pad: float = 0.5,
    subnodes: int = 5,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> GluedSolution:
    """
    glued_profile -> assemble_L -> lowest_eigenpair -> conformal_deform.

    Raises:
        DegenerateCell, NoConvergence, NegativeComponent, NonPositiveU
    """
    pm = glued_profile(fam, cells=cells, mu=mu, pad=pad, subnodes=subnodes)
    op = assemble_L(pm)
    sol = lowest_eigenpair(op, tol=tol, max_iter=max_iter)
    logger.info("c=%g: lambda=%.12g after %d iterations (residual %.2e)",
                fam.c, sol.lam, sol.iterations, sol.residual)
    return GluedSolution(pm, op, sol, conformal_deform(pm, sol, op))
