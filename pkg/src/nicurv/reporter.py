"""
Unified reporter: writes machine-readable artifacts and human summaries.

Artifacts (stdout or --output):
  csv   the command's table, 17 significant digits; a command record,
        if any, goes to a JSON sidecar next to the file
  json  {"record": {...}, "rows": [{column: value, ...}, ...]}

Summaries go to stderr:
  - verify results in compiler-like form: NC101 sphere-anchor PASS ...
  - failure lines with the offending node / point / c value
  - a colorised verdict line (TTY only), suppressed by --quiet

Exit code semantics of the reporter itself (commands add their own):
  0 = clean, 1 = failed results or failures recorded
"""
from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import dataclass
from typing import Any, Optional, Protocol, Sequence, runtime_checkable

from nicurv.config import OutputConfig
from nicurv.utils import (
    format_value,
    json_value,
    open_output,
    plural,
    sidecar_path,
)

logger = logging.getLogger(__name__)


@runtime_checkable
class ResultLike(Protocol):
    """
    Minimal protocol for suite results.

    Required attributes:
      - code: str      (e.g. "NC101")
      - name: str      (e.g. "sphere-anchor")
      - passed: bool
      - measured: float  (the value compared against the threshold)
      - detail: str
    """

    code: str
    name: str
    passed: bool
    measured: float
    detail: str


@dataclass(frozen=True)
class ResultSummary:
    """Aggregated statistics for the verdict line."""

    total: int
    failed: int
    failed_codes: tuple[str, ...]


RESULT_COLUMNS = ("code", "name", "passed", "measured", "detail")


class Reporter:
    """
    Collects a command's table, record, results and failures.

    Usage:
        reporter = Reporter()
        reporter.set_table(columns, rows)
        reporter.add_failure("sigma~ >= 0 at node 17")
        reporter.emit(cfg.output)
        reporter.print("pipeline")
    """

    def __init__(self, *, color: bool | None = None, quiet: bool = False):
        self._columns: tuple[str, ...] = ()
        self._rows: list[Sequence[Any]] = []
        self._record: Optional[dict[str, Any]] = None
        self._results: list[ResultLike] = []
        self._failures: list[str] = []
        self._errors: list[str] = []
        self._color = sys.stderr.isatty() if color is None else color
        self._quiet = quiet

    @property
    def quiet(self) -> bool:
        """Whether console output is suppressed."""
        return self._quiet

    def set_table(self, columns: Sequence[str],
                  rows: Sequence[Sequence[Any]]) -> None:
        """Set the result table, checking row widths."""
        for i, row in enumerate(rows):
            if len(row) != len(columns):
                raise ValueError(
                    f"row {i} has {len(row)} cells for {len(columns)} columns"
                )
        self._columns = tuple(columns)
        self._rows = [tuple(r) for r in rows]

    def set_record(self, record: dict[str, Any]) -> None:
        """Set the JSON record written beside the table."""
        self._record = dict(record)

    def add_result(self, result: ResultLike) -> None:
        """Append one suite result."""
        self._results.append(result)

    def add_results(self, results: Sequence[ResultLike]) -> None:
        """Append several suite results."""
        self._results.extend(results)

    def add_failure(self, message: str) -> None:
        """Register a command-level failure (counterexample, bad node...)."""
        self._failures.append(message)

    def add_error(self, message: str) -> None:
        """Register an internal error."""
        self._errors.append(message)

    @property
    def results(self) -> list[ResultLike]:
        """Suite results so far."""
        return list(self._results)

    @property
    def failures(self) -> list[str]:
        """Command-level failures so far."""
        return list(self._failures)

    def is_clean(self) -> bool:
        """Return True when nothing failed or errored."""
        return not (self._failures or self._errors
                    or any(not r.passed for r in self._results))

    def exit_code(self) -> int:
        """Exit code for the collected outcome (0 clean, 1 otherwise)."""
        return 0 if self.is_clean() else 1

    # -- artifacts ---------------------------------------------------------

    def _table(self) -> tuple[tuple[str, ...], list[Sequence[Any]]]:
        if self._columns or not self._results:
            return self._columns, self._rows
        rows = [(r.code, r.name, r.passed, r.measured, r.detail)
                for r in self._results]
        return RESULT_COLUMNS, rows

    def emit(self, output: OutputConfig) -> None:
        """Write the artifact in the configured format."""
        columns, rows = self._table()
        if output.format == "json":
            document: dict[str, Any] = {}
            if self._record is not None:
                document["record"] = json_value(self._record)
            document["rows"] = [
                {c: json_value(v) for c, v in zip(columns, row)}
                for row in rows
            ]
            with open_output(output.path) as stream:
                json.dump(document, stream, indent=2, allow_nan=False)
                stream.write("\n")
            return

        with open_output(output.path) as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
        if self._record is None:
            return
        if output.path is not None:
            side = sidecar_path(output.path)
            with open_output(side) as stream:
                json.dump(json_value(self._record), stream, indent=2,
                          allow_nan=False)
                stream.write("\n")
            logger.info("record written to %s", side)
        elif not self._quiet:
            for key, value in self._record.items():
                if not isinstance(value, (list, dict)):
                    print(f"{key} = {format_value(value)}", file=sys.stderr)

    # -- human summary -----------------------------------------------------

    def _generate_summary(self) -> ResultSummary:
        failed = [r.code for r in self._results if not r.passed]
        return ResultSummary(len(self._results), len(failed), tuple(failed))

    def _format_result(self, r: ResultLike) -> str:
        status = "PASS" if r.passed else "FAIL"
        if self._color:
            tone = "\033[1;32m" if r.passed else "\033[1;31m"
            return (f"\033[1;35m{r.code}\033[0m {r.name} {tone}{status}"
                    f"\033[0m \033[2m{format_value(r.measured)}  "
                    f"{r.detail}\033[0m")
        return (f"{r.code} {r.name} {status} "
                f"{format_value(r.measured)}  {r.detail}")

    def print(self, command: str) -> None:
        """Render results, failures and errors to stderr."""
        if not self._quiet:
            for r in self._results:
                print(self._format_result(r), file=sys.stderr)
        for message in self._failures:
            print(f"failure: {message}", file=sys.stderr)
        for message in self._errors:
            print(f"error: {message}", file=sys.stderr)
        if not self._quiet:
            self._print_summary(command)

    def _print_summary(self, command: str) -> None:
        if self._color:
            green, red, dim, reset = ("\033[1;32m", "\033[1;31m",
                                      "\033[2m", "\033[0m")
        else:
            green = red = dim = reset = ""

        if self.is_clean():
            detail = (f" ({plural(len(self._results), 'suite')} passed)"
                      if self._results else "")
            print(f"\n{green}✓{reset} nicurv {command}: ok{detail}",
                  file=sys.stderr)
            return

        summary = self._generate_summary()
        lines = []
        if summary.failed:
            lines.append(f"{summary.failed} of "
                         f"{plural(summary.total, 'suite')} failed: "
                         f"{', '.join(summary.failed_codes)}")
        if self._failures:
            lines.append(plural(len(self._failures), "failure"))
        if self._errors:
            lines.append(plural(len(self._errors), "runtime error"))
        print(f"\n{red}ⅹ{reset} nicurv {command}: failed", file=sys.stderr)
        for line in lines:
            print(f"{dim}{line}{reset}", file=sys.stderr)
