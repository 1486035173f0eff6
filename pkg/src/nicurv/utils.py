"""
Shared helpers: number formatting, output streams, ordered parallel maps
and the grid points pointwise reports are evaluated on.

Output conventions:
  - floats use 17 significant digits ('.' decimal, no separators), so
    CSV values round-trip exactly
  - non-finite floats are written as nan/inf in CSV and null in JSON
  - nothing time- or host-dependent is ever written, so identical
    configurations give byte-identical artifacts
"""
from __future__ import annotations

import contextlib
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import (
    Any,
    Callable,
    Iterable,
    Iterator,
    Optional,
    Sequence,
    TextIO,
)

import numpy as np

from nicurv.geometry.metric import MetricField, SampledMetric, tensor_grid


def format_value(value: Any) -> str:
    """CSV cell text for a scalar."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def json_value(value: Any) -> Any:
    """JSON-safe form of numpy scalars/arrays (non-finite -> None)."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.ndarray):
        return [json_value(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_value(v) for v in value]
    return value


@contextlib.contextmanager
def open_output(path: Optional[Path | str]) -> Iterator[TextIO]:
    """Stream for an artifact: the file at `path`, or stdout."""
    if path is None:
        yield sys.stdout
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as stream:
        yield stream


def sidecar_path(path: Path | str, suffix: str = ".json") -> Path:
    """`run.csv` -> `run.json` (companion record of a table artifact)."""
    path = Path(path)
    if path.suffix == suffix:
        return path.with_name(path.stem + ".record" + suffix)
    return path.with_suffix(suffix)


def ordered_map(fn: Callable[[Any], Any], items: Iterable[Any],
                jobs: int = 1) -> list[Any]:
    """map() over a thread pool; results keep the order of `items`."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def stencil_radius(stencil_order: int, richardson: bool = False) -> int:
    """Return how many points on each side of a node a stencil uses."""
    radius = 1 if stencil_order == 2 else 2
    return 2 * radius if richardson else radius


def report_points(m: MetricField, counts: Sequence[int],
                  stencil_order: int = 2,
                  richardson: bool = False) -> list[np.ndarray]:
    """
    Choose the points a pointwise report is evaluated on.

    Analytic metrics: cell midpoints on interval axes (stencils stay
    inside the chart), uniform nodes on periodic axes. Sampled metrics:
    evenly spread grid nodes, keeping the stencil radius away from the
    ends of interval axes.
    """
    chart = m.chart
    if len(counts) != chart.dim:
        raise ValueError(
            f"grid needs {chart.dim} counts for this chart, got {len(counts)}"
        )
    if isinstance(m, SampledMetric):
        r = stencil_radius(stencil_order, richardson)
        axes = []
        for ax, n, count in zip(chart.axes, m.shape, counts):
            lo, hi = (0, n - 1) if ax.periodic else (r, n - 1 - r)
            if hi < lo:
                raise ValueError(
                    f"axis {ax.name!r}: {n} samples leave no interior node"
                )
            if ax.periodic:
                idx = np.unique(np.arange(count) * n // max(count, 1))
            else:
                idx = np.unique(np.rint(np.linspace(lo, hi, count)))
            axes.append(idx.astype(int))
        return [m.grid_node(index)
                for index in np.array(np.meshgrid(*axes, indexing="ij"))
                .reshape(chart.dim, -1).T]
    region = []
    for ax, n in zip(chart.axes, counts):
        if ax.periodic:
            region.append(None)
        else:
            h = ax.length / n
            region.append((ax.lo + 0.5 * h, ax.hi - 0.5 * h))
    return tensor_grid(chart, counts, region)


def plural(count: int, word: str) -> str:
    """Format a count with a naively pluralised word."""
    return f"{count} {word}{'s' if count != 1 else ''}"
