"""
NTN Split Simulator - Node Implementations
PocketFlow nodes for dimensioning, scenario simulation and option comparison
"""

import asyncio
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pocketflow import AsyncParallelBatchNode, Node

from utils.config import get_config
from utils.dimensioning import AirInterfaceConfig, dimension_table
from utils.dynamics import SimulationResult, run
from utils.errors import ScenarioError
from utils.json_sanitize import sanitize_for_json
from utils.report_formatter import comparison_frame, format_comparison_table, format_dimension_table
from utils.report_io import write_feasibility_csv, write_reports_json, write_violations_csv
from utils.scenario import Scenario, parse_scenario

logger = logging.getLogger(__name__)


class DimensionNode(Node):
    """
    Dimensioning - fronthaul/midhaul rates and latency budgets for one cell.
    """

    def prep(self, shared):
        return shared.get("air") or AirInterfaceConfig()

    def exec(self, air):
        return dimension_table(air)

    def post(self, shared, prep_res, exec_res):
        shared["dimension_rows"] = exec_res
        shared["dimension_table"] = format_dimension_table(exec_res)
        return "default"


class LoadScenarioNode(Node):
    """
    Scenario Loading - parse and validate the scenario file, applying a seed override.
    """

    def prep(self, shared):
        return shared["scenario_path"], shared.get("seed")

    def exec(self, prep_data):
        path, seed = prep_data
        scenario = parse_scenario(path)
        if seed is not None:
            scenario = scenario.model_copy(update={"seed": int(seed)})
        return scenario

    def post(self, shared, prep_res, exec_res):
        shared["scenario"] = exec_res
        return "default"


class SimulateNode(Node):
    """Run the time-stepped simulation over the scenario window."""

    def prep(self, shared):
        return shared["scenario"]

    def exec(self, scenario):
        return run(scenario)

    def post(self, shared, prep_res, exec_res):
        shared["result"] = exec_res
        shared["summary"] = exec_res.summary
        return "default"


def write_simulation_artifacts(result: SimulationResult, out_dir: Path, fmt: str = "csv") -> List[Path]:
    """Write reports, violations, events and summary into out_dir."""
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = result.window.reports
    paths = []
    if fmt == "json":
        paths.append(write_reports_json(reports, out_dir / "feasibility.json"))
    else:
        paths.append(write_feasibility_csv(reports, out_dir / "feasibility.csv"))
    paths.append(write_violations_csv(reports, out_dir / "violations.csv"))
    paths.append(result.events.write_ndjson(out_dir / "events.ndjson"))
    paths.append(result.events.write_counts_csv(out_dir / "event_counts.csv"))
    summary_path = out_dir / "summary.json"
    summary_path.write_text(
        json.dumps(sanitize_for_json(result.summary), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    paths.append(summary_path)
    return paths


class WriteArtifactsNode(Node):
    """
    Artifact Writing - feasibility series, violations, event log and summary.
    """

    def prep(self, shared):
        out_dir = Path(shared.get("out_dir") or get_config().output_dir)
        return shared["result"], out_dir, shared.get("format", "csv")

    def exec(self, prep_data):
        result, out_dir, fmt = prep_data
        return write_simulation_artifacts(result, out_dir, fmt)

    def post(self, shared, prep_res, exec_res):
        shared["artifacts"] = [str(p) for p in exec_res]
        logger.info("artifacts written", extra={"out_dir": str(prep_res[1]), "files": len(exec_res)})
        return "default"


def _comparable(scenarios: List[Scenario]) -> Optional[str]:
    """Reason the scenarios cannot be compared, or None."""
    base = scenarios[0]
    for other in scenarios[1:]:
        if other.constellation != base.constellation:
            return f"{other.name} uses a different constellation than {base.name}"
        if other.sites != base.sites:
            return f"{other.name} uses different ground sites than {base.name}"
        if other.window != base.window:
            return f"{other.name} uses a different window than {base.name}"
    return None


class PrepareComparisonNode(Node):
    """
    Comparison Setup - member scenarios from several files, or one base file and an option list.
    """

    def prep(self, shared):
        return list(shared.get("scenario_paths", [])), list(shared.get("options") or [])

    def exec(self, prep_data):
        paths, options = prep_data
        if options:
            if len(paths) != 1:
                raise ScenarioError("--options needs exactly one base scenario", rule="compare")
            base = parse_scenario(paths[0])
            return [(option, base.with_option(option)) for option in options]
        if len(paths) < 2:
            raise ScenarioError("compare needs at least two scenarios or --options", rule="compare")
        scenarios = [parse_scenario(p) for p in paths]
        problem = _comparable(scenarios)
        if problem:
            raise ScenarioError(problem, rule="incompatible-bases")
        labels = []
        for sc in scenarios:
            ext = sc.placement_extension.value
            labels.append(sc.placement.split.value + ("" if ext == "none" else f":{ext}"))
        return list(zip(labels, scenarios))

    def post(self, shared, prep_res, exec_res):
        shared["members"] = exec_res
        return "default"


class CompareMembersNode(AsyncParallelBatchNode):
    """
    Member Simulation - runs every comparison member concurrently.
    Uses AsyncParallelBatchNode with worker threads; gather keeps member order.
    """

    async def prep_async(self, shared):
        workers = shared.get("workers") or get_config().compare_workers
        self._limit = asyncio.Semaphore(max(1, int(workers)))
        return list(shared["members"])

    async def exec_async(self, member: Tuple[str, Scenario]):
        label, scenario = member
        async with self._limit:
            logger.info("member started", extra={"member": label})
            result = await asyncio.to_thread(run, scenario)
        return label, result

    async def post_async(self, shared, prep_res, exec_res_list):
        shared["member_results"] = exec_res_list
        return "default"


class ComparisonTableNode(Node):
    """
    Comparison Table - one column per option in member order; written to comparison.csv.
    """

    def prep(self, shared):
        return shared["member_results"], shared.get("out_dir")

    def exec(self, prep_data):
        members, out_dir = prep_data
        labels = [label for label, _ in members]
        frame = comparison_frame(labels, [result.summary for _, result in members])
        path = None
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            path = out / "comparison.csv"
            frame.to_csv(path)
        return frame, path

    def post(self, shared, prep_res, exec_res):
        frame, path = exec_res
        shared["comparison"] = frame
        shared["comparison_table"] = format_comparison_table(frame)
        shared["feasible"] = all(result.feasible for _, result in prep_res[0])
        if path is not None:
            shared["artifacts"] = [str(path)]
        return "default"


def summarize(shared: Dict[str, Any]) -> Dict[str, Any]:
    """JSON-safe view of the simulation summary in a shared store."""
    return sanitize_for_json(shared.get("summary", {}))
