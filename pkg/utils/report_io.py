"""
Serialization of feasibility reports: one CSV row per link per step, and a JSON
document mirroring the in-memory report (checked with jsonschema on both ends).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import jsonschema
import pandas as pd

from utils.dimensioning import InterfaceClass
from utils.errors import RuleViolation
from utils.feasibility import FeasibilityReport, LinkVerdict, NodeVerdict
from utils.json_sanitize import sanitize_for_json
from utils.placement import LogicalLink, NetworkFunction, Segment

FEASIBILITY_COLUMNS = [
    "time_s", "link_id", "interface_class", "segment",
    "delay_us", "budget_us", "req_bps", "cap_bps", "verdict",
]
VIOLATION_COLUMNS = ["time_s", "rule", "subject", "detail"]

_NUMBER_OR_NULL = {"type": ["number", "null"]}
_VIOLATION_SCHEMA = {
    "type": "object",
    "required": ["rule", "detail", "subject"],
    "properties": {
        "rule": {"type": "string"},
        "detail": {"type": "string"},
        "subject": {"type": ["string", "null"]},
    },
}

REPORT_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "FeasibilityReport",
    "type": "object",
    "required": ["time_s", "overall", "per_link", "per_node", "violations"],
    "properties": {
        "time_s": {"type": "number"},
        "overall": {"enum": ["feasible", "infeasible"]},
        "per_link": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "from_function", "to_function", "interface_class", "segment",
                    "from_node", "to_node", "required_bps", "capacity_bps", "delay_s", "budget_s", "verdict",
                ],
                "properties": {
                    "interface_class": {"enum": [c.value for c in InterfaceClass]},
                    "segment": {"enum": [s.value for s in Segment]},
                    "required_bps": {"type": "number"},
                    "capacity_bps": _NUMBER_OR_NULL,
                    "delay_s": _NUMBER_OR_NULL,
                    "budget_s": _NUMBER_OR_NULL,
                    "loop_delay_s": _NUMBER_OR_NULL,
                    "loop_bound_s": _NUMBER_OR_NULL,
                    "verdict": {"enum": ["ok", "violation"]},
                    "path": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "per_node": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["node", "power_used_w", "power_budget_w", "compute_used", "compute_budget", "verdict"],
            },
        },
        "violations": {"type": "array", "items": _VIOLATION_SCHEMA},
        "advisories": {"type": "array", "items": _VIOLATION_SCHEMA},
        "feeder_demand_bps": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}


def _finite(value: Optional[float]) -> Optional[float]:
    if value is None or math.isinf(value):
        return None
    return value


def _unbounded(value: Optional[float]) -> float:
    return math.inf if value is None else float(value)


def _us(value: Optional[float]) -> Optional[float]:
    return None if value is None or math.isinf(value) else value * 1e6


def measured_delay(verdict: LinkVerdict) -> Optional[float]:
    """The delay compared against the budget: the loop for loop-checked links."""
    return verdict.loop_delay if verdict.loop_delay is not None else verdict.delay


def feasibility_rows(reports: Iterable[FeasibilityReport]) -> List[Dict[str, Any]]:
    rows = []
    for report in reports:
        for v in report.per_link:
            rows.append({
                "time_s": report.time,
                "link_id": v.link.link_id,
                "interface_class": v.link.interface_class.value,
                "segment": v.link.segment.value,
                "delay_us": _us(measured_delay(v)),
                "budget_us": _us(v.budget),
                "req_bps": v.required_bps,
                "cap_bps": _finite(v.capacity_bps),
                "verdict": v.verdict,
            })
    return rows


def violation_rows(reports: Iterable[FeasibilityReport]) -> List[Dict[str, Any]]:
    return [
        {"time_s": r.time, "rule": v.rule, "subject": v.subject, "detail": v.detail}
        for r in reports
        for v in r.violations
    ]


def write_feasibility_csv(reports: Sequence[FeasibilityReport], path: str | Path) -> Path:
    path = Path(path)
    pd.DataFrame(feasibility_rows(reports), columns=FEASIBILITY_COLUMNS).to_csv(path, index=False)
    return path


def write_violations_csv(reports: Sequence[FeasibilityReport], path: str | Path) -> Path:
    path = Path(path)
    pd.DataFrame(violation_rows(reports), columns=VIOLATION_COLUMNS).to_csv(path, index=False)
    return path


def read_feasibility_csv(path: str | Path) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={"link_id": str, "interface_class": str, "segment": str, "verdict": str})
    missing = [c for c in FEASIBILITY_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"feasibility CSV is missing columns: {missing}")
    return frame[FEASIBILITY_COLUMNS]


def read_feasibility_rows(path: str | Path) -> List[Dict[str, Any]]:
    """Rows of a feasibility CSV shaped like feasibility_rows(), empty cells as None."""
    frame = read_feasibility_csv(path)
    return frame.astype(object).where(frame.notna(), None).to_dict("records")


def _violation_dict(v: RuleViolation) -> Dict[str, Any]:
    return {"rule": v.rule, "detail": v.detail, "subject": v.subject}


def report_to_dict(report: FeasibilityReport) -> Dict[str, Any]:
    links = []
    for v in report.per_link:
        link = v.link
        links.append({
            "from_function": link.from_function.label,
            "to_function": link.to_function.label,
            "interface_class": link.interface_class.value,
            "segment": link.segment.value,
            "from_node": link.from_node,
            "to_node": link.to_node,
            "relay": link.relay,
            "loop_bound_s": link.loop_bound,
            "required_bps": v.required_bps,
            "capacity_bps": _finite(v.capacity_bps),
            "delay_s": v.delay,
            "budget_s": _finite(v.budget),
            "verdict": v.verdict,
            "path": list(v.path_hops),
            "loop_delay_s": v.loop_delay,
            "strict_capable": v.strict_capable,
            "quality": v.quality,
        })
    doc = {
        "time_s": report.time,
        "overall": report.overall,
        "per_link": links,
        "per_node": [
            {
                "node": n.node,
                "power_used_w": n.power_used,
                "power_budget_w": n.power_budget,
                "compute_used": n.compute_used,
                "compute_budget": n.compute_budget,
                "uses_feeder": n.uses_feeder,
                "verdict": n.verdict,
            }
            for n in report.per_node
        ],
        "violations": [_violation_dict(v) for v in report.violations],
        "advisories": [_violation_dict(v) for v in report.advisories],
        "feeder_demand_bps": dict(report.feeder_demand_bps),
    }
    jsonschema.validate(doc, REPORT_SCHEMA)
    return doc


def report_from_dict(doc: Dict[str, Any]) -> FeasibilityReport:
    jsonschema.validate(doc, REPORT_SCHEMA)
    report = FeasibilityReport(time=float(doc["time_s"]))
    for item in doc["per_link"]:
        link = LogicalLink(
            from_function=NetworkFunction.parse(item["from_function"]),
            to_function=NetworkFunction.parse(item["to_function"]),
            interface_class=InterfaceClass(item["interface_class"]),
            segment=Segment(item["segment"]),
            from_node=item["from_node"],
            to_node=item["to_node"],
            relay=bool(item.get("relay", False)),
            loop_bound=item.get("loop_bound_s"),
        )
        report.per_link.append(
            LinkVerdict(
                time=report.time,
                link=link,
                required_bps=float(item["required_bps"]),
                capacity_bps=_unbounded(item["capacity_bps"]),
                delay=item["delay_s"],
                budget=_unbounded(item["budget_s"]),
                verdict=item["verdict"],
                path_hops=tuple(item.get("path", ())),
                loop_delay=item.get("loop_delay_s"),
                strict_capable=item.get("strict_capable"),
                quality=float(item.get("quality", 1.0)),
            )
        )
    for item in doc["per_node"]:
        report.per_node.append(
            NodeVerdict(
                node=item["node"],
                power_used=float(item["power_used_w"]),
                power_budget=float(item["power_budget_w"]),
                compute_used=float(item["compute_used"]),
                compute_budget=float(item["compute_budget"]),
                uses_feeder=bool(item.get("uses_feeder", False)),
            )
        )
    report.violations = [RuleViolation(v["rule"], v["detail"], v["subject"]) for v in doc["violations"]]
    report.advisories = [RuleViolation(v["rule"], v["detail"], v["subject"]) for v in doc.get("advisories", [])]
    report.feeder_demand_bps = {k: float(v) for k, v in doc.get("feeder_demand_bps", {}).items()}
    return report


def write_reports_json(reports: Sequence[FeasibilityReport], path: str | Path) -> Path:
    path = Path(path)
    payload = sanitize_for_json({"reports": [report_to_dict(r) for r in reports]})
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def read_reports_json(path: str | Path) -> List[FeasibilityReport]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [report_from_dict(doc) for doc in payload["reports"]]
