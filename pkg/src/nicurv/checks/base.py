"""
Suite framework for `nicurv verify`.

Every suite measures one property of the engine, compares the measured
value against a fixed threshold and returns a SuiteResult. Suites are
independent: a suite that raises is reported as failed with the
exception text, the others still run.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from nicurv.config import GlueConfig, SearchConfig, SolverConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuiteResult:
    """Outcome of one suite (satisfies reporter.ResultLike)."""

    code: str          # e.g. "NC101"
    name: str          # e.g. "sphere-anchor"
    passed: bool
    measured: float    # worst value seen, compared against the threshold
    detail: str = ""


@dataclass(frozen=True)
class SuiteContext:
    """
    Inputs shared by all suites.

    `flip_sign` negates every engine Riemann tensor; the anchors must
    then fail (negative control).
    """

    seed: int = 0
    mu: float = 1.0 / 6.0
    flip_sign: bool = False
    glue: GlueConfig = field(default_factory=GlueConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    search: SearchConfig = field(default_factory=SearchConfig)


class BaseSuite(ABC):
    """
    Abstract base class for verify suites.

    Subclasses provide `code`, `name`, `description` and `measure()`.
    """

    @property
    @abstractmethod
    def code(self) -> str:
        """Suite code (e.g. 'NC101')."""

    @property
    @abstractmethod
    def name(self) -> str:
        """Short kebab-case name."""

    @property
    @abstractmethod
    def description(self) -> str:
        """Human-readable statement of the checked property."""

    @abstractmethod
    def measure(self, ctx: SuiteContext) -> SuiteResult:
        """Run the measurement and decide pass/fail."""

    def result(self, passed: bool, measured: float,
               detail: str = "") -> SuiteResult:
        """Build a SuiteResult for this suite."""
        return SuiteResult(self.code, self.name, bool(passed),
                           float(measured), detail)

    def run(self, ctx: SuiteContext) -> SuiteResult:
        """measure(), turning any exception into a failed result."""
        logger.info("running %s %s", self.code, self.name)
        try:
            return self.measure(ctx)
        except Exception as e:
            logger.debug("%s raised", self.code, exc_info=True)
            return self.result(False, float("nan"),
                               f"{type(e).__name__}: {e}")
