"""
NTN Split Simulator - Integration Tests
Command-line runs through main(argv): exit codes, stdout and written artifacts
"""

import json

import pytest

from main import EXIT_ERROR, EXIT_OK, EXIT_VIOLATIONS, main
from tests.conftest import SCENARIO_DIR
from utils.report_io import read_feasibility_csv

GEO = str(SCENARIO_DIR / "geo_2a.json")
LEO_1B = str(SCENARIO_DIR / "leo_1b.json")


class TestSimulateCommand:
    """Test `simulate`."""

    def test_geo_feasible(self, out_dir, capsys):
        """A feasible run exits 0 and leaves an empty violations file."""
        code = main(["simulate", "--scenario", GEO, "--out", str(out_dir)])
        assert code == EXIT_OK
        assert (out_dir / "violations.csv").read_text().splitlines() == ["time_s,rule,subject,detail"]
        assert "availability" in capsys.readouterr().out

    def test_json_format(self, out_dir):
        """--format json writes feasibility.json; the summary names the scenario."""
        code = main(["simulate", "--scenario", GEO, "--out", str(out_dir), "--format", "json", "--seed", "9"])
        assert code == EXIT_OK
        assert (out_dir / "feasibility.json").exists()
        assert json.loads((out_dir / "summary.json").read_text())["scenario"] == "geo-2a"

    @pytest.mark.slow
    def test_fronthaul_over_isl_violates(self, out_dir):
        """Option 1b carries OFH over ISLs far beyond 500 us and exits 2."""
        code = main(["simulate", "--scenario", LEO_1B, "--out", str(out_dir)])
        assert code == EXIT_VIOLATIONS
        frame = read_feasibility_csv(out_dir / "feasibility.csv")
        ofh = frame[frame["interface_class"] == "OFH"]
        assert not ofh.empty
        assert (ofh[ofh["segment"] == "isl_path"]["verdict"] == "violation").all()
        assert "latency-budget" in (out_dir / "violations.csv").read_text()

    def test_missing_scenario(self, tmp_path, capsys):
        """An unreadable scenario exits 1 with a message on stderr."""
        code = main(["simulate", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
        assert code == EXIT_ERROR
        assert "error:" in capsys.readouterr().err

    def test_incompatible_extension(self, minimal_scenario_dict, scenario_file, capsys):
        """An incompatible option/extension pair is reported by rule id."""
        minimal_scenario_dict["placement"] = "2a:ext1"
        code = main(["validate", "--scenario", str(scenario_file(minimal_scenario_dict))])
        assert code == EXIT_ERROR
        assert "ext1-requires-ground-cu" in capsys.readouterr().err


class TestDimensionCommand:
    """Test `dimension`."""

    def test_json_rows(self, capsys):
        """--format json prints the rows."""
        code = main(["dimension", "--format", "json"])
        assert code == EXIT_OK
        rows = json.loads(capsys.readouterr().out)
        assert {r["quantity"] for r in rows} >= {"fronthaul_total", "midhaul_total", "budget_OFH"}

    def test_table(self, capsys):
        """The default output is a text table."""
        assert main(["dimension", "--layers", "2", "--direction", "ul"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("Quantity")

    def test_zero_bandwidth(self, capsys):
        """A non-positive bandwidth is a usage error."""
        assert main(["dimension", "--bandwidth-mhz", "0"]) == EXIT_ERROR
        assert "usage error" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        """argparse failures exit 1."""
        with pytest.raises(SystemExit) as exc_info:
            main(["frobnicate"])
        assert exc_info.value.code == EXIT_ERROR


class TestCompareCommand:
    """Test `compare`."""

    def test_feasible_options(self, out_dir, capsys):
        """Two feasible GEO options exit 0 and write comparison.csv."""
        code = main(["compare", GEO, "--options", "2a,3a", "--out", str(out_dir)])
        assert code == EXIT_OK
        header = (out_dir / "comparison.csv").read_text().splitlines()[0]
        assert header == "metric,2a,3a"
        assert "availability" in capsys.readouterr().out

    def test_infeasible_member(self):
        """Any infeasible member makes the comparison exit 2."""
        assert main(["compare", GEO, "--options", "2a,1a"]) == EXIT_VIOLATIONS

    def test_incompatible_bases(self, capsys):
        """Scenarios over different constellations are refused."""
        assert main(["compare", GEO, LEO_1B]) == EXIT_ERROR
        assert "incompatible-bases" in capsys.readouterr().err


class TestValidateCommand:
    """Test `validate`."""

    def test_ok(self, capsys):
        """A valid scenario prints its name."""
        assert main(["validate", "--scenario", GEO]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "ok: geo-2a"

    def test_schema(self, capsys):
        """--schema prints the JSON schema."""
        assert main(["validate", "--schema"]) == EXIT_OK
        schema = json.loads(capsys.readouterr().out)
        assert "constellation" in schema["properties"]

    def test_nothing_to_validate(self):
        """validate without arguments is a usage error."""
        assert main(["validate"]) == EXIT_ERROR
