"""
Verify suites.

Codes:
  NC1xx  pointwise geometry (anchors, symmetries, isotropic curvature)
  NC2xx  the glued construction and the conformal deformation
"""
from __future__ import annotations

from typing import Iterable, Optional

from nicurv.checks import construction, geometry
from nicurv.checks.base import BaseSuite, SuiteContext, SuiteResult

ALL_SUITES: list[BaseSuite] = [*geometry.SUITES, *construction.SUITES]


def run_suites(ctx: SuiteContext,
               select: Optional[Iterable[str]] = None) -> list[SuiteResult]:
    """Run every suite (or those whose code or name is in `select`)."""
    wanted = set(select) if select else None
    return [
        suite.run(ctx) for suite in ALL_SUITES
        if wanted is None or suite.code in wanted or suite.name in wanted
    ]


__all__ = [
    "ALL_SUITES", "BaseSuite", "SuiteContext", "SuiteResult", "run_suites",
]
