"""
Command runner: executes one configured command and returns its exit code.

Commands:
  curvature-report  per-point s, |W|, sigma and the spectrum of Q
  isotropic-check   per-point extremal isotropic curvatures and verdict
  glue-sweep        the functional F over a geometric c grid
  conformal-solve   lowest eigenpair of L_mu on the glued profile at c
  verify            every NC suite
  pipeline          glue-sweep -> c* -> conformal-solve at 2 c*

Exit code semantics:
  0 = success
  1 = configuration error (and any failed verify suite)
  2 = isotropic-check: not NIC at some grid point
      pipeline: F never negative on the sweep
  3 = eigensolver failure
  4 = sigma~ >= 0 at some node
"""
from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from nicurv.checks import ALL_SUITES, SuiteContext, run_suites
from nicurv.config import ConfigError, RunConfig
from nicurv.geometry.catalog import build_metric, chart_from_config
from nicurv.geometry.conformal import (
    DegenerateCell,
    GluedSolution,
    NegativeComponent,
    NoConvergence,
    NonPositiveU,
    solve_glued,
)
from nicurv.geometry.curvature import curvature_at, lambda2_operator
from nicurv.geometry.gluing import (
    BoundViolated,
    FRow,
    c_star,
    functional_F,
    sweep_grid,
)
from nicurv.geometry.isotropic import SearchBudget, Verdict, check_point
from nicurv.geometry.metric import GeometryError, MetricField
from nicurv.reporter import Reporter
from nicurv.utils import ordered_map, report_points

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY_FAILED = 1
EXIT_NOT_NIC = 2
EXIT_F_NONNEGATIVE = 2
EXIT_EIGENSOLVER = 3
EXIT_SIGMA_NONNEGATIVE = 4

NODE_COLUMNS = ("t", "V", "sigma", "u", "sigma_tilde", "kind")


class Engine:
    """
    Runs one configured command.

    Usage:
        engine = Engine(cfg)
        exit_code = engine.run()
        sys.exit(exit_code)
    """

    def __init__(self, cfg: RunConfig, reporter: Reporter | None = None):
        self.cfg = cfg
        self.reporter = reporter or Reporter()
        self._commands: dict[str, Callable[[], int]] = {
            "curvature-report": self.curvature_report,
            "isotropic-check": self.isotropic_check,
            "glue-sweep": self.glue_sweep,
            "conformal-solve": self.conformal_solve,
            "verify": self.verify,
            "pipeline": self.pipeline,
        }

    def run(self) -> int:
        """Execute the command, write its artifact, print the summary."""
        command = self.cfg.command
        logger.info("running %s (seed %d, mu %.6g)", command, self.cfg.seed,
                    self.cfg.mu)
        code = self._commands[command]()
        self.reporter.emit(self.cfg.output)
        self.reporter.print(command)
        return code

    # -- pointwise commands ------------------------------------------------

    def _metric(self) -> MetricField:
        mc = self.cfg.metric
        try:
            chart = (chart_from_config(self.cfg.chart)
                     if self.cfg.chart is not None else None)
            return build_metric(mc.kind, mc.builtin, mc.params, chart,
                                mc.shape)
        except (GeometryError, BoundViolated) as e:
            raise ConfigError(f"metric: {e}") from e

    def _points(self, m: MetricField) -> list[np.ndarray]:
        grid = self.cfg.grid
        try:
            return report_points(m, grid.counts, grid.stencil_order,
                                 grid.richardson)
        except ValueError as e:
            raise ConfigError(f"grid: {e}") from e

    def _coordinate_columns(self, m: MetricField) -> list[str]:
        return [f"x{i + 1}" for i in range(m.dim)]

    def curvature_report(self) -> int:
        """Tabulate curvature invariants over the evaluation grid."""
        m = self._metric()
        options = self.cfg.grid.options
        rows = []
        n_pairs = m.dim * (m.dim - 1) // 2
        for x in self._points(m):
            data = curvature_at(m, x, options, flip_sign=self.cfg.flip_sign)
            q = lambda2_operator(data).q_eigenvalues
            rows.append([*x, data.scalar, data.weyl_norm,
                         data.sigma(self.cfg.mu), *q])
        columns = [*self._coordinate_columns(m), "s", "weyl_norm", "sigma",
                   *(f"q{i + 1}" for i in range(n_pairs))]
        self.reporter.set_table(columns, rows)
        return EXIT_OK

    def isotropic_check(self) -> int:
        """Classify the metric at every grid point as NIC, PIC or neither."""
        m = self._metric()
        if m.dim != 4:
            raise ConfigError("isotropic-check needs a 4-dimensional chart")
        cfg = self.cfg
        options = cfg.grid.options
        budget = SearchBudget(cfg.search.samples, cfg.search.refinements)
        points = self._points(m)

        def check(item: tuple[int, np.ndarray]):
            index, x = item
            return check_point(m, x, budget, cfg.seed, index, options,
                               flip_sign=cfg.flip_sign)

        rows = []
        bad = []
        for x, (data, v) in zip(points, ordered_map(
                check, list(enumerate(points)), cfg.jobs)):
            rows.append([*x, data.scalar, data.weyl_norm,
                         data.sigma(cfg.mu), v.k_min, v.k_max, v.q_max,
                         v.verdict.value])
            if v.verdict is not Verdict.NIC:
                bad.append((x, v))
            if not v.stable:
                logger.warning("search at %s did not stabilise", x.tolist())
        self.reporter.set_table(
            [*self._coordinate_columns(m), "s", "weyl_norm", "sigma_mu",
             "k_min", "k_max", "q_max", "verdict"],
            rows,
        )
        if bad:
            x, v = bad[0]
            self.reporter.add_failure(
                f"{len(bad)} of {len(points)} points not NIC; first at "
                f"{x.tolist()} with k_max = {v.k_max:.6g} ({v.verdict.value})"
            )
            return EXIT_NOT_NIC
        return EXIT_OK

    # -- construction commands ---------------------------------------------

    def _sweep(self) -> list[FRow]:
        cfg = self.cfg
        glue = cfg.glue
        try:
            cs = sweep_grid(glue.c_min, glue.c_max, glue.c_steps)
            return functional_F(glue.family(glue.c_max), cs, mu=cfg.mu,
                                nodes=glue.nodes, jobs=cfg.jobs)
        except (GeometryError, BoundViolated) as e:
            raise ConfigError(f"glue: {e}") from e

    def _sweep_table(self, rows: list[FRow]) -> None:
        self.reporter.set_table(FRow._fields, [tuple(r) for r in rows])

    def glue_sweep(self) -> int:
        """Tabulate F over the c sweep and record c*."""
        rows = self._sweep()
        self._sweep_table(rows)
        found = c_star(rows)
        self.reporter.set_record({"c_star": found})
        if found is None:
            logger.warning("F is non-negative at the largest swept c")
        return EXIT_OK

    def _solve(self, c: float) -> GluedSolution | int:
        cfg = self.cfg
        solver = cfg.solver
        try:
            fam = cfg.glue.family(c)
        except (GeometryError, BoundViolated) as e:
            raise ConfigError(f"glue: {e}") from e
        try:
            return solve_glued(
                fam, cells=solver.cells, mu=cfg.mu, pad=solver.pad,
                subnodes=solver.subnodes, tol=solver.tol,
                max_iter=solver.max_iter,
            )
        except (NoConvergence, NegativeComponent, NonPositiveU,
                DegenerateCell) as e:
            self.reporter.add_failure(
                f"eigensolver at c = {c:g}: {type(e).__name__}: {e}"
            )
            return EXIT_EIGENSOLVER

    def _solution_output(self, chain: GluedSolution, c: float,
                         extra: Optional[dict] = None) -> int:
        pm, sol, dfm = chain.pm, chain.sol, chain.deformation
        self.reporter.set_table(NODE_COLUMNS, [
            (t, v, s, u, st, kind)
            for t, v, s, u, st, kind in zip(pm.t, pm.volumes, pm.sigma,
                                            dfm.u, dfm.sigma_law, pm.kinds)
        ])
        record = {
            "c": c,
            "lambda": sol.lam,
            "F": pm.total_sigma,
            "vol": pm.total_volume,
            "residual": sol.residual,
            "iterations": sol.iterations,
            "min_u": float(np.min(dfm.u)),
            "max_u": float(np.max(dfm.u)),
            "sigma_tilde_max": dfm.sigma_max,
            "law_gap": dfm.gap,
        }
        record.update(extra or {})
        self.reporter.set_record(record)
        if dfm.sigma_max >= 0.0:
            i = int(np.argmax(dfm.sigma_law))
            self.reporter.add_failure(
                f"sigma~ = {dfm.sigma_law[i]:.6g} >= 0 at node {i} "
                f"({pm.kinds[i]}, t = {pm.t[i]:.6g}); lambda = {sol.lam:.6g}"
            )
            return EXIT_SIGMA_NONNEGATIVE
        return EXIT_OK

    def conformal_solve(self) -> int:
        """Solve the eigenproblem on the glued profile at glue.c."""
        c = self.cfg.glue.c
        chain = self._solve(c)
        if isinstance(chain, int):
            return chain
        return self._solution_output(chain, c)

    def pipeline(self) -> int:
        """Sweep, locate c*, then solve and check the chain at 2 c*."""
        rows = self._sweep()
        found = c_star(rows)
        if found is None:
            self._sweep_table(rows)
            self.reporter.set_record({"c_star": None, "status": "F >= 0"})
            last = rows[-1]
            self.reporter.add_failure(
                f"F never negative on [{rows[0].c:g}, {last.c:g}]; "
                f"F({last.c:g}) = {last.F:.6g}"
            )
            return EXIT_F_NONNEGATIVE
        c = 2.0 * found
        logger.info("c* = %g; solving at c = %g", found, c)
        chain = self._solve(c)
        if isinstance(chain, int):
            self._sweep_table(rows)
            self.reporter.set_record({"c_star": found, "c": c,
                                      "status": "eigensolver failure"})
            return chain
        sweep = [r._asdict() for r in rows]
        code = self._solution_output(
            chain, c, {"c_star": found, "sweep": sweep}
        )
        return code

    # -- verify ------------------------------------------------------------

    def verify(self) -> int:
        """Run the selected verify suites."""
        cfg = self.cfg
        known = {s.code for s in ALL_SUITES} | {s.name for s in ALL_SUITES}
        unknown = sorted(set(cfg.suites) - known)
        if unknown:
            raise ConfigError(f"unknown verify suites {unknown}")
        ctx = SuiteContext(seed=cfg.seed, mu=cfg.mu, flip_sign=cfg.flip_sign,
                           glue=cfg.glue, solver=cfg.solver,
                           search=cfg.search)
        self.reporter.add_results(run_suites(ctx, cfg.suites or None))
        return (EXIT_OK if self.reporter.is_clean()
                else EXIT_VERIFY_FAILED)


def run(cfg: RunConfig, reporter: Reporter | None = None) -> int:
    """Execute cfg.command; returns the Unix exit code."""
    return Engine(cfg, reporter).run()


def run_pipeline(cfg: RunConfig, reporter: Reporter | None = None) -> int:
    """
    End-to-end: sweep F, pick c*, solve at 2 c*, certify sigma~ < 0.

    Returns:
        0 certified, 2 F never negative, 3 eigensolver failure,
        4 sigma~ >= 0 somewhere
    """
    return Engine(cfg.model_copy(update={"command": "pipeline"}),
                  reporter).run()
