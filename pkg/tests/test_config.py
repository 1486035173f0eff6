"""Tests for run configuration loading and validation."""
import json

import pytest
from pydantic import ValidationError

from nicurv.config import (
    ConfigError,
    RunConfig,
    as_dict,
    from_mapping,
    load_config,
)
from nicurv.geometry.gluing import BoundViolated


@pytest.fixture
def write_config(tmp_path):
    """Return a writer placing a JSON document in tmp_path."""
    def write(document):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return write


class TestDefaults:
    """No file, no flags."""

    def test_defaults_need_no_file(self):
        """load_config(None) gives the embedded defaults."""
        cfg = load_config(None)
        assert cfg == RunConfig()
        assert cfg.mu == pytest.approx(1.0 / 6.0)
        assert cfg.glue.c_min == 2.0
        assert cfg.glue.c_max == 512.0
        assert cfg.solver.cells == 256

    def test_as_dict_is_json_ready(self):
        """Tuples become lists; the result round-trips through JSON."""
        d = as_dict(RunConfig())
        assert d["grid"]["counts"] == [3, 3, 3, 3]
        assert json.loads(json.dumps(d)) == d


class TestDocuments:
    """Strict JSON documents."""

    def test_partial_document_merges(self, write_config):
        """Only the given keys change."""
        cfg = load_config(write_config({"seed": 7, "glue": {"c": 16}}))
        assert cfg.seed == 7
        assert cfg.glue.c == 16.0
        assert isinstance(cfg.glue.c, float)
        assert cfg.glue.c_max == 512.0

    def test_unknown_top_level_key(self, write_config):
        """Typos are rejected, not ignored."""
        with pytest.raises(ConfigError, match="unknown keys"):
            load_config(write_config({"sed": 1}))

    def test_unknown_section_key(self, write_config):
        """Unknown keys inside a section name the section."""
        with pytest.raises(ConfigError, match=r"glue: unknown keys"):
            load_config(write_config({"glue": {"cmax": 3}}))

    @pytest.mark.parametrize("document", [
        {"seed": "zero"},
        {"seed": True},
        {"mu": "1/6"},
        {"grid": {"counts": 3}},
        {"grid": {"richardson": 1}},
        {"metric": {"params": []}},
    ])
    def test_type_errors(self, write_config, document):
        """Values are checked against the field types."""
        with pytest.raises(ConfigError):
            load_config(write_config(document))

    def test_type_error_names_the_field(self, write_config):
        """The message gives the dotted path and the offending value."""
        with pytest.raises(ConfigError,
                           match=r"glue\.c_max: .*got 'big'") as excinfo:
            load_config(write_config({"glue": {"c_max": "big"}}))
        assert isinstance(excinfo.value.__cause__, ValidationError)

    def test_invalid_json(self, tmp_path):
        """Malformed JSON is a configuration error."""
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        """An unreadable path is a configuration error."""
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.json")

    def test_optional_fields_accept_null(self):
        """A null clears an optional field."""
        cfg = from_mapping({"output": {"path": None},
                            "metric": {"shape": [8, 4, 4, 4]}})
        assert cfg.output.path is None
        assert cfg.metric.shape == (8, 4, 4, 4)

    def test_configs_are_frozen(self):
        """Assignment after validation is refused."""
        cfg = RunConfig()
        with pytest.raises(ValidationError):
            cfg.mu = 1.0
        with pytest.raises(ValidationError):
            cfg.glue.c = 4.0

    def test_glue_and_solver_are_hashable(self):
        """Equal sections hash equally (they key the eigen chain cache)."""
        a = load_config(None, {"glue": {"c": 12}})
        b = load_config(None, {"glue": {"c": 12.0}})
        assert hash(a.glue) == hash(b.glue)
        assert hash(a.solver) == hash(RunConfig().solver)

class TestPrecedence:
    """Precedence: defaults < document < overrides."""

    def test_overrides_win(self, write_config):
        """CLI-style overrides replace document values."""
        path = write_config({"mu": 0.5, "glue": {"c_max": 64, "vol0": 2}})
        cfg = load_config(path, {"mu": 1.0, "glue": {"c_max": 128}})
        assert cfg.mu == 1.0
        assert cfg.glue.c_max == 128.0
        assert cfg.glue.vol0 == 2.0

    def test_override_without_document(self):
        """Overrides apply on top of the defaults."""
        cfg = load_config(None, {"command": "verify",
                                 "suites": ["NC101"]})
        assert cfg.command == "verify"
        assert cfg.suites == ("NC101",)


class TestValidation:
    """Range checks."""

    @pytest.mark.parametrize("overrides,match", [
        ({"mu": 0.0}, "mu must be positive"),
        ({"command": "bogus"}, "command must be one of"),
        ({"output": {"format": "xml"}}, "output.format"),
        ({"glue": {"c_min": 8.0, "c_max": 4.0}}, "c_min <= glue.c_max"),
        ({"glue": {"vol0": -1.0}}, "glue.vol0 must be positive"),
        ({"glue": {"variant": "cubic"}}, "glue.variant"),
        ({"solver": {"cells": 32}}, "solver.cells must be >= 64"),
        ({"jobs": 0}, "jobs must be >= 1"),
        ({"grid": {"stencil_order": 3}}, "stencil_order"),
        ({"grid": {"counts": [2, 0, 2, 2]}}, "grid.counts"),
    ])
    def test_out_of_range(self, overrides, match):
        """Each invalid value is reported with its field name."""
        with pytest.raises(ConfigError, match=match):
            load_config(None, overrides)

    def test_problems_are_collected(self):
        """Several problems are reported in one message."""
        with pytest.raises(ConfigError) as excinfo:
            load_config(None, {"mu": -1.0, "jobs": 0})
        assert "mu" in str(excinfo.value)
        assert "jobs" in str(excinfo.value)


class TestGlueFamily:
    """GlueConfig.family builds glued family members."""

    def test_family_defaults_to_glue_c(self):
        """Without an argument the member sits at glue.c."""
        cfg = load_config(None, {"glue": {"c": 12.0, "area": 2.0}})
        fam = cfg.glue.family()
        assert fam.c == 12.0
        assert fam.area == 2.0

    def test_family_at_explicit_c(self):
        """An explicit c replaces glue.c."""
        assert RunConfig().glue.family(64.0).c == 64.0

    def test_family_below_threshold(self):
        """A family with c <= 1/log 2 is refused when built."""
        with pytest.raises(BoundViolated):
            RunConfig().glue.family(1.2)
