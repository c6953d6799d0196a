"""
Scenario document tests: defaults, shorthand, validation errors and round trips.
"""

import json

import pytest

from tests.conftest import SCENARIO_DIR
from utils.errors import ScenarioError
from utils.placement import PlacementTemplate, RicExtension, SplitOption
from utils.scenario import (
    Scenario,
    dump_scenario,
    parse_option,
    parse_scenario,
    scenario_from_dict,
    scenario_schema,
)


class TestParseScenario:
    """Test loading scenario files."""

    def test_minimal_defaults(self, minimal_scenario_dict, scenario_file):
        """Only constellation, sites and placement are required."""
        scenario = parse_scenario(scenario_file(minimal_scenario_dict))
        assert scenario.name == "scenario"
        assert scenario.placement == PlacementTemplate(split=SplitOption.OPT_2A)
        assert scenario.window.step == 1.0
        assert scenario.traffic.air.bandwidth_mhz == 100.0
        assert scenario.resources.power_budget_w == 200.0
        assert scenario.dynamics.dual_link_interval_s == 5.0
        assert scenario.topology.inter_plane_max_latitude_deg == 70.0
        assert scenario.seed == 0

    @pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_scenarios(self, path):
        """Every bundled scenario validates."""
        scenario = parse_scenario(path)
        assert scenario.name == json.loads(path.read_text())["name"]

    def test_option_shorthand(self, geo_scenario_dict):
        """'2a' and '3b:ext3' expand to template fields."""
        assert parse_option("3b:ext3") == {"split": "3b", "extension": "ext3"}
        assert parse_option("2a") == {"split": "2a", "extension": "none"}
        scenario = scenario_from_dict(geo_scenario_dict)
        assert scenario.placement.split == SplitOption.OPT_2A
        assert scenario.placement_extension == RicExtension.NONE

    def test_missing_file(self, tmp_path):
        """Unreadable files map to the io rule."""
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(tmp_path / "nope.json")
        assert exc_info.value.rule == "io"

    def test_bad_json(self, tmp_path):
        """Malformed JSON reports the position."""
        path = tmp_path / "broken.json"
        path.write_text('{"constellation": ')
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(path)
        assert exc_info.value.rule == "parse"
        assert "line 1" in exc_info.value.location

    def test_not_an_object(self, scenario_file):
        """The document must be a JSON object."""
        with pytest.raises(ScenarioError) as exc_info:
            parse_scenario(scenario_file([1, 2, 3]))
        assert exc_info.value.rule == "parse"


class TestScenarioValidation:
    """Test cross-field rules."""

    def test_incompatible_extension(self, minimal_scenario_dict):
        """ext1 with a space CU is refused with its rule id."""
        minimal_scenario_dict["placement"] = "2a:ext1"
        with pytest.raises(ScenarioError) as exc_info:
            scenario_from_dict(minimal_scenario_dict)
        assert exc_info.value.rule == "ext1-requires-ground-cu"
        assert exc_info.value.location == "placement"

    def test_schema_error_location(self, minimal_scenario_dict):
        """Field errors point at the offending field."""
        minimal_scenario_dict["constellation"]["num_planes"] = 0
        with pytest.raises(ScenarioError) as exc_info:
            scenario_from_dict(minimal_scenario_dict)
        assert exc_info.value.rule == "schema"
        assert exc_info.value.location == "constellation.num_planes"

    def test_unknown_field(self, minimal_scenario_dict):
        """Typos are not silently ignored."""
        minimal_scenario_dict["windw"] = {}
        with pytest.raises(ScenarioError):
            scenario_from_dict(minimal_scenario_dict)

    def test_duplicate_sites(self, minimal_scenario_dict):
        """Site ids are unique."""
        minimal_scenario_dict["sites"].append(dict(minimal_scenario_dict["sites"][0]))
        with pytest.raises(ScenarioError):
            scenario_from_dict(minimal_scenario_dict)

    def test_window_order(self, minimal_scenario_dict):
        """t0 < t1 and the step fits inside the window."""
        minimal_scenario_dict["window"] = {"t0": 10, "t1": 5, "step": 1}
        with pytest.raises(ScenarioError):
            scenario_from_dict(minimal_scenario_dict)
        minimal_scenario_dict["window"] = {"t0": 0, "t1": 5, "step": 10}
        with pytest.raises(ScenarioError):
            scenario_from_dict(minimal_scenario_dict)

    def test_budget_override_classes(self, minimal_scenario_dict):
        """Overrides name known interface classes."""
        minimal_scenario_dict["overrides"] = {"budgets_s": {"F1_C": 0.02}}
        assert scenario_from_dict(minimal_scenario_dict).budget_overrides == {"F1_C": 0.02}
        minimal_scenario_dict["overrides"] = {"budgets_s": {"X2": 0.02}}
        with pytest.raises(ScenarioError):
            scenario_from_dict(minimal_scenario_dict)

    def test_failure_on_unknown_satellite(self, minimal_scenario_dict):
        """Failures must name a satellite of the constellation."""
        minimal_scenario_dict["dynamics"] = {"failures": [{"sat_id": "sat-009-000", "at_s": 5}]}
        with pytest.raises(ScenarioError):
            scenario_from_dict(minimal_scenario_dict)

    def test_explicit_placement_unknown_node(self, minimal_scenario_dict):
        """Explicit assignments must reference real nodes."""
        minimal_scenario_dict["placement"] = {
            "split": "2a",
            "assignments": [{"function": "DU#0", "node": "sat-042-000", "cell": 0}],
        }
        with pytest.raises(ScenarioError) as exc_info:
            scenario_from_dict(minimal_scenario_dict)
        assert exc_info.value.rule == "unknown-node"


class TestScenarioHelpers:
    """Test derived scenarios, dumps and the schema."""

    def test_with_option(self, geo_scenario_dict):
        """Swapping the option keeps everything else."""
        base = scenario_from_dict(geo_scenario_dict)
        other = base.with_option("3a")
        assert other.placement.split == SplitOption.OPT_3A
        assert other.name == "geo-2a[3a]"
        assert other.constellation == base.constellation
        assert other.window == base.window

    def test_with_incompatible_option(self, geo_scenario_dict):
        """An incompatible option is a scenario error."""
        with pytest.raises(ScenarioError):
            scenario_from_dict(geo_scenario_dict).with_option("2a:ext1")

    def test_dump_round_trip(self, geo_scenario_dict):
        """A dumped scenario parses back to an equal one."""
        scenario = scenario_from_dict(geo_scenario_dict)
        assert scenario_from_dict(json.loads(dump_scenario(scenario))) == scenario

    def test_schema(self):
        """The JSON schema lists the top-level fields."""
        schema = scenario_schema()
        assert {"constellation", "sites", "placement", "window"} <= set(schema["properties"])
        assert set(schema["required"]) == {"constellation", "sites", "placement"}
        assert schema["title"] == Scenario.__name__
