"""
Run configuration: embedded defaults, strict JSON documents, CLI overrides.

Precedence (lowest first):
  1. Defaults below (no config file is required)
  2. JSON document given with --config
  3. Command-line flags

Document shape (every section optional, unknown keys rejected):

  {
    "seed": 0,
    "mu": 0.16666666666666666,
    "output": {"path": null, "format": "csv"},
    "chart": {"axes": [{"name": "t", "lo": 0, "hi": 1, "periodic": false}]},
    "metric": {"kind": "analytic", "builtin": "sphere", "params": {},
               "shape": null},
    "grid": {"counts": [3, 3, 3, 3], "stencil_order": 2, "step": 0.001,
             "richardson": false},
    "glue": {...}, "solver": {...}, "search": {...}
  }

See docs/config.md for every field.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Annotated, Any, Mapping, Optional

from pydantic import (
    AfterValidator,
    BaseModel,
    ConfigDict,
    Field,
    StrictBool,
    StrictInt,
    StrictStr,
    ValidationError,
    model_validator,
)

from nicurv import NicurvError
from nicurv.geometry.gluing import GluedFamily
from nicurv.geometry.metric import DerivativeOptions

logger = logging.getLogger(__name__)

COMMANDS = (
    "curvature-report",
    "isotropic-check",
    "glue-sweep",
    "conformal-solve",
    "verify",
    "pipeline",
)

# JSON integers are accepted where a number is expected; bools and
# strings are not
Number = Annotated[float, Field(strict=True), AfterValidator(float)]


class ConfigError(NicurvError):
    """Unknown key, wrong type or invalid value in a run configuration."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OutputConfig(_Section):
    """Where and how the result table is written."""

    path: Optional[StrictStr] = None
    format: StrictStr = "csv"


class MetricConfig(_Section):
    """A named built-in metric, optionally re-sampled on a grid."""

    kind: StrictStr = "analytic"
    builtin: StrictStr = "hyperbolic_product"
    params: dict[str, Any] = Field(default_factory=dict)
    shape: Optional[tuple[StrictInt, ...]] = None


class GridConfig(_Section):
    """Evaluation grid and derivative settings for pointwise reports."""

    counts: tuple[StrictInt, ...] = (3, 3, 3, 3)
    stencil_order: StrictInt = 2
    step: Number = 1e-3
    richardson: StrictBool = False

    @property
    def options(self) -> DerivativeOptions:
        """Derivative settings built from this section."""
        return DerivativeOptions(
            stencil_order=self.stencil_order,
            step=self.step,
            richardson=self.richardson,
        )


class GlueConfig(_Section):
    """Glued family constants and the c sweep."""

    c: Number = 8.0
    c_min: Number = 2.0
    c_max: Number = 512.0
    c_steps: StrictInt = 9
    vol0: Number = 1.0
    area: Number = 1.0
    ell: Number = 1.0
    s_cap: Number = 0.0
    w_cap: Number = 0.0
    cap_volume: Number = 1.0
    variant: StrictStr = "log"
    nodes: StrictInt = 2001

    def family(self, c: Optional[float] = None) -> GluedFamily:
        """Build the glued family member at c (self.c when omitted)."""
        return GluedFamily(
            c=self.c if c is None else c,
            vol0=self.vol0,
            area=self.area,
            ell=self.ell,
            s_cap=self.s_cap,
            w_cap=self.w_cap,
            cap_volume=self.cap_volume,
            variant=self.variant,
        )


class SolverConfig(_Section):
    """Profile resolution and eigensolver tolerances."""

    cells: StrictInt = 256
    pad: Number = 0.5
    subnodes: StrictInt = 5
    tol: Number = 1e-10
    max_iter: StrictInt = 500


class SearchConfig(_Section):
    """Isotropic frame search budget and cross-check size."""

    samples: StrictInt = 512
    refinements: StrictInt = 64
    crosscheck: StrictInt = 200


class RunConfig(_Section):
    """A complete, validated run configuration."""

    command: StrictStr = "pipeline"
    seed: StrictInt = 0
    mu: Number = 1.0 / 6.0
    jobs: StrictInt = 1
    flip_sign: StrictBool = False
    suites: tuple[StrictStr, ...] = ()
    output: OutputConfig = Field(default_factory=OutputConfig)
    chart: Optional[dict[str, Any]] = None
    metric: MetricConfig = Field(default_factory=MetricConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    glue: GlueConfig = Field(default_factory=GlueConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)

    @model_validator(mode="after")
    def _check_ranges(self) -> RunConfig:
        """Range checks across sections, all reported in one message."""
        glue, solver, search = self.glue, self.solver, self.search
        problems = []
        if self.command not in COMMANDS:
            problems.append(f"command must be one of {list(COMMANDS)}")
        if not self.mu > 0.0:
            problems.append(f"mu must be positive, got {self.mu}")
        if self.output.format not in ("csv", "json"):
            problems.append(f"output.format must be csv or json, "
                            f"got {self.output.format!r}")
        if not 0.0 < glue.c_min <= glue.c_max:
            problems.append(f"need 0 < glue.c_min <= glue.c_max, "
                            f"got [{glue.c_min}, {glue.c_max}]")
        if glue.c_steps < 1:
            problems.append("glue.c_steps must be >= 1")
        for name in ("vol0", "area", "ell", "cap_volume"):
            if not getattr(glue, name) > 0.0:
                problems.append(f"glue.{name} must be positive")
        if glue.variant not in ("log", "half"):
            problems.append(f"glue.variant must be log or half, "
                            f"got {glue.variant!r}")
        if glue.nodes < 3:
            problems.append("glue.nodes must be >= 3")
        if self.jobs < 1:
            problems.append("jobs must be >= 1")
        if not glue.c > 0.0:
            problems.append(f"glue.c must be positive, got {glue.c}")
        if solver.cells < 64:
            problems.append(
                f"solver.cells must be >= 64, got {solver.cells}")
        if not solver.tol > 0.0 or solver.max_iter < 1:
            problems.append("solver.tol must be positive, max_iter >= 1")
        if (search.samples < 1 or search.refinements < 0
                or search.crosscheck < 0):
            problems.append("search budget entries must be non-negative "
                            "(samples >= 1)")
        if any(n < 1 for n in self.grid.counts):
            problems.append("grid.counts entries must be >= 1")
        if self.grid.stencil_order not in (2, 4) or not self.grid.step > 0:
            problems.append(
                "grid.stencil_order must be 2 or 4, step positive")
        if problems:
            raise ValueError("; ".join(problems))
        return self


_SECTIONS = ("output", "metric", "grid", "glue", "solver", "search")


def _describe(exc: ValidationError) -> str:
    """One line per problem, unknown keys grouped by section."""
    unknown: dict[str, list[str]] = {}
    problems = []
    for err in exc.errors():
        loc = [str(part) for part in err["loc"]]
        if err["type"] == "extra_forbidden":
            where = ".".join(loc[:-1]) or "config"
            unknown.setdefault(where, []).append(loc[-1])
        elif err["type"] == "value_error" and not loc:
            problems.append(str(err["ctx"]["error"]))
        else:
            problems.append(f"{'.'.join(loc)}: {err['msg']}, "
                            f"got {err['input']!r}")
    keys = [f"{where}: unknown keys {sorted(names)}"
            for where, names in unknown.items()]
    return "; ".join(keys + problems)


def from_mapping(data: Mapping[str, Any],
                 base: Optional[RunConfig] = None) -> RunConfig:
    """
    Merge a parsed document into `base` (defaults if None) and validate.

    Sections merge key by key; every other value is replaced.

    Raises:
        ConfigError: unknown keys, bad types or out-of-range values
    """
    if not isinstance(data, Mapping):
        raise ConfigError(f"config: expected an object, got {data!r}")
    merged = (base or RunConfig()).model_dump()
    for key, value in data.items():
        if key in _SECTIONS and isinstance(value, Mapping):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e


def load_config(path: Path | str | None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Load defaults, then the JSON document at `path`, then `overrides`.

    Raises:
        ConfigError: unreadable file, invalid JSON, unknown keys, bad
            types or values
    """
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        cfg = from_mapping(document, cfg)
        logger.info("loaded config %s", path)
    if overrides:
        cfg = from_mapping(overrides, cfg)
    return cfg


def as_dict(cfg: RunConfig) -> dict[str, Any]:
    """JSON-ready form of a configuration (tuples become lists)."""
    return cfg.model_dump(mode="json")
