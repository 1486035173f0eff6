"""Black-box tests for the nicurv CLI.

These tests drive nicurv purely through its command-line interface and
check exit codes, artifacts and stderr the way a user would see them.
"""
import csv
import io
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import pytest

pytestmark = pytest.mark.integration

QUICK_SEARCH = ["--samples", "64", "--refinements", "16"]


def run_nicurv(args, cwd=None):
    """Run nicurv and return (exit_code, stdout, stderr)."""
    result = subprocess.run(
        [sys.executable, "-m", "nicurv"] + args,
        capture_output=True,
        text=True,
        cwd=cwd,
    )
    return result.returncode, result.stdout, result.stderr


class TestBasicCLI:
    """Help, version and argument handling."""

    def test_help_flag(self):
        """--help lists every command and the exit codes."""
        exit_code, stdout, _ = run_nicurv(["--help"])

        assert exit_code == 0
        assert "usage: nicurv" in stdout
        for command in ("curvature-report", "isotropic-check", "glue-sweep",
                        "conformal-solve", "verify", "pipeline"):
            assert command in stdout
        assert "Exit codes" in stdout

    def test_version_flag(self):
        """--version prints the package version."""
        exit_code, stdout, _ = run_nicurv(["--version"])

        assert exit_code == 0
        assert stdout.startswith("nicurv ")

    def test_command_required(self):
        """Running without a command is a usage error."""
        exit_code, _, stderr = run_nicurv([])

        assert exit_code == 2
        assert "usage" in stderr


class TestConfigErrors:
    """Invalid configurations exit 1 before any work is done."""

    def test_negative_mu(self):
        """A negative mu is a usage error."""
        exit_code, _, stderr = run_nicurv(["curvature-report", "--mu", "-1"])

        assert exit_code == 1
        assert "mu must be positive" in stderr

    def test_unknown_builtin(self):
        """Unknown built-in metrics are rejected."""
        exit_code, _, stderr = run_nicurv(
            ["curvature-report", "--builtin", "torus_of_doom"])

        assert exit_code == 1
        assert "unknown metric built-in" in stderr

    def test_unknown_config_key(self):
        """Misspelled config keys are rejected by name."""
        with tempfile.TemporaryDirectory() as tmpdir:
            config = Path(tmpdir) / "run.json"
            config.write_text(json.dumps({"glue": {"cmax": 4}}))

            exit_code, _, stderr = run_nicurv(
                ["glue-sweep", "--config", str(config)])

        assert exit_code == 1
        assert "unknown keys" in stderr

    def test_unknown_verify_suite(self):
        """Unknown suite codes fail before anything runs."""
        exit_code, _, stderr = run_nicurv(["verify", "NC999"])

        assert exit_code == 1
        assert "NC999" in stderr


class TestCurvatureReport:
    """Pointwise curvature tables."""

    def test_sphere_columns_and_values(self):
        """One row per point with s = 12 on the unit sphere."""
        exit_code, stdout, _ = run_nicurv(
            ["curvature-report", "--builtin", "sphere",
             "--counts", "2", "1", "1", "1"])

        assert exit_code == 0
        rows = list(csv.DictReader(io.StringIO(stdout)))
        assert list(rows[0]) == ["x1", "x2", "x3", "x4", "s", "weyl_norm",
                                 "sigma", "q1", "q2", "q3", "q4", "q5", "q6"]
        assert len(rows) == 2
        for row in rows:
            assert float(row["s"]) == pytest.approx(12.0, abs=1e-6)

    def test_json_format(self):
        """--format json writes row objects."""
        exit_code, stdout, _ = run_nicurv(
            ["curvature-report", "--builtin", "hyperbolic_product",
             "--counts", "1", "1", "1", "1", "--format", "json"])

        assert exit_code == 0
        document = json.loads(stdout)
        assert document["rows"][0]["s"] == pytest.approx(-6.0, abs=1e-6)

    def test_identical_runs_are_byte_identical(self):
        """Same configuration, same bytes."""
        with tempfile.TemporaryDirectory() as tmpdir:
            outputs = []
            for name in ("a.csv", "b.csv"):
                path = Path(tmpdir) / name
                exit_code, _, _ = run_nicurv(
                    ["curvature-report", "--builtin", "trig_torus",
                     "--counts", "2", "2", "1", "1",
                     "--output", str(path)])
                assert exit_code == 0
                outputs.append(path.read_bytes())

        assert outputs[0] == outputs[1]


class TestIsotropicCheck:
    """Exit 0 only when every point is NIC."""

    def test_hyperbolic_product_is_nic(self):
        """Every grid point of H^3 x S^1 is NIC."""
        exit_code, stdout, _ = run_nicurv(
            ["isotropic-check", "--builtin", "hyperbolic_product",
             "--counts", "2", "1", "1", "1", *QUICK_SEARCH])

        assert exit_code == 0
        rows = list(csv.DictReader(io.StringIO(stdout)))
        assert {row["verdict"] for row in rows} == {"NIC"}

    def test_sphere_is_not_nic(self):
        """The sphere is PIC; the failing point is named."""
        exit_code, stdout, stderr = run_nicurv(
            ["isotropic-check", "--builtin", "sphere",
             "--counts", "1", "1", "1", "1", *QUICK_SEARCH])

        assert exit_code == 2
        assert "PIC" in stdout
        assert "not NIC" in stderr


class TestConstruction:
    """glue-sweep, conformal-solve and pipeline exit codes."""

    def test_sweep_writes_rows_and_record(self):
        """The sweep table has one row per c and a c_star sidecar."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "sweep.csv"
            exit_code, _, _ = run_nicurv(
                ["glue-sweep", "--c-min", "4", "--c-max", "16",
                 "--c-steps", "3", "--output", str(path)])
            rows = list(csv.DictReader(io.StringIO(path.read_text())))
            record = json.loads((Path(tmpdir) / "sweep.json").read_text())

        assert exit_code == 0
        assert [float(r["c"]) for r in rows] == pytest.approx([4, 8, 16])
        assert "c_star" in record

    def test_adversarial_cap_never_negative(self):
        """A huge cap |W| keeps F >= 0: the pipeline exits 2."""
        exit_code, _, stderr = run_nicurv(
            ["pipeline", "--w-cap", "1e6", "--c-min", "2", "--c-max", "8",
             "--c-steps", "2"])

        assert exit_code == 2
        assert "F never negative" in stderr

    @pytest.mark.slow
    def test_pipeline_with_plain_scalar_curvature(self):
        """With mu = 1 the pipeline finds c* and certifies at 2 c*."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "pipeline.csv"
            exit_code, _, stderr = run_nicurv(
                ["pipeline", "--mu", "1", "--c-min", "2", "--c-max", "32",
                 "--c-steps", "5", "--cells", "128", "--output", str(path)])
            record = json.loads((Path(tmpdir) / "pipeline.json").read_text())

        assert exit_code == 0, stderr
        assert record["c_star"] is not None
        assert record["c"] == pytest.approx(2.0 * record["c_star"])
        assert record["lambda"] <= record["F"] / record["vol"] < 0.0
        assert record["sigma_tilde_max"] < 0.0

    @pytest.mark.slow
    def test_conformal_solve_certifies(self):
        """At c = 16 the solve exits 0 with negative sigma~."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "nodes.csv"
            exit_code, _, _ = run_nicurv(
                ["conformal-solve", "--c", "16", "--cells", "128",
                 "--output", str(path)])
            rows = list(csv.DictReader(io.StringIO(path.read_text())))
            record = json.loads((Path(tmpdir) / "nodes.json").read_text())

        assert exit_code == 0
        assert rows[0]["kind"] == "bulk"
        assert rows[-1]["kind"] == "cap"
        assert all(float(r["sigma_tilde"]) < 0.0 for r in rows)
        assert record["lambda"] < 0.0
        assert record["residual"] <= 1e-10


class TestVerify:
    """Selected suites and the negative control."""

    def test_selected_suites_pass(self):
        """Suites can be selected by code and by name."""
        exit_code, stdout, stderr = run_nicurv(
            ["verify", "NC101", "flat-anchor"])

        assert exit_code == 0
        assert "NC101" in stdout
        assert "NC103 flat-anchor PASS" in stderr

    def test_flip_sign_fails(self):
        """--flip-sign negates R: the sphere anchor must fail."""
        exit_code, _, stderr = run_nicurv(
            ["verify", "sphere-anchor", "--flip-sign"])

        assert exit_code == 1
        assert "NC101 sphere-anchor FAIL" in stderr
