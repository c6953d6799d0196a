"""
Table formatting for CLI output: dimensioning rows, simulation summaries and the
side-by-side option comparison.
"""

from __future__ import annotations

from typing import Any, Dict, List, Mapping, Sequence

import pandas as pd

# Comparison rows in display order; keys of the simulation summary.
COMPARISON_METRICS = [
    "split",
    "extension",
    "feasible",
    "availability",
    "violation_classes",
    "feeder_handovers",
    "feeder_outages",
    "group_ue_handovers",
    "e2_reassignments",
    "e2_unassigned_time_s",
    "leader_changes",
    "e2_loop_mean_ms",
    "peak_feeder_demand_bps",
    "max_sat_power_w",
    "worst_margin_s",
    "interfaces",
    "feeder_interfaces",
    "space_functions",
]


def _rate_text(bps: float) -> str:
    if bps >= 1e9:
        return f"{bps / 1e9:.2f} Gbps"
    return f"{bps / 1e6:.1f} Mbps"


def _value_text(value: float, unit: str) -> str:
    if unit == "bps":
        return _rate_text(value)
    if unit == "s":
        return f"{value * 1e3:g} ms" if value >= 1e-3 else f"{value * 1e6:g} us"
    return f"{value:g} {unit}"


def format_dimension_table(rows: Sequence[Mapping[str, Any]]) -> Dict[str, Any]:
    """Headers and display rows for dimension_table output."""
    if not rows:
        return {"headers": [], "rows": []}
    headers = ["Quantity", "Value"]
    body = [[row["quantity"], _value_text(float(row["value"]), row["unit"])] for row in rows]
    return {"headers": headers, "rows": body}


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.4g}"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value) or "-"
    return str(value)


def render_text(table: Mapping[str, Any]) -> str:
    """Plain fixed-width rendering of a {"headers", "rows"} table."""
    headers = [str(h) for h in table.get("headers", [])]
    rows = [[_cell(v) for v in row] for row in table.get("rows", [])]
    if not headers:
        return ""
    widths = [len(h) for h in headers]
    for row in rows:
        for i, value in enumerate(row):
            widths[i] = max(widths[i], len(value))
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    rule = "  ".join("-" * w for w in widths)
    out = [line, rule]
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join(out)


def format_summary(summary: Mapping[str, Any]) -> Dict[str, Any]:
    return {"headers": ["Metric", "Value"], "rows": [[k, v] for k, v in summary.items()]}


def _metric_rows(summaries: Sequence[Mapping[str, Any]]) -> List[str]:
    """Comparison metrics with mapping-valued ones expanded to metric.key rows."""
    rows: List[str] = []
    for metric in COMPARISON_METRICS:
        keys = sorted({k for s in summaries if isinstance(s.get(metric), Mapping) for k in s[metric]})
        rows += [f"{metric}.{key}" for key in keys] if keys else [metric]
    return rows


def _metric_value(summary: Mapping[str, Any], row: str) -> Any:
    metric, _, key = row.partition(".")
    value = summary.get(metric)
    if key:
        return value.get(key) if isinstance(value, Mapping) else None
    return value


def comparison_frame(labels: Sequence[str], summaries: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    """
    One column per option, in the order given; one row per comparison metric.

    Per-class metrics such as worst_margin_s get one row per interface class.
    Repeated labels get a #n suffix so every column stays addressable.
    """
    if len(labels) != len(summaries):
        raise ValueError("labels and summaries differ in length")
    columns: List[str] = []
    seen: Dict[str, int] = {}
    for label in labels:
        seen[label] = seen.get(label, 0) + 1
        columns.append(label if seen[label] == 1 else f"{label}#{seen[label]}")
    rows = _metric_rows(summaries)
    data = {
        column: [_cell(_metric_value(summary, row)) for row in rows]
        for column, summary in zip(columns, summaries)
    }
    frame = pd.DataFrame(data, index=rows, columns=columns)
    frame.index.name = "metric"
    return frame


def format_comparison_table(frame: pd.DataFrame) -> Dict[str, Any]:
    headers = [frame.index.name or "metric"] + list(frame.columns)
    rows = [[metric] + list(values) for metric, values in zip(frame.index, frame.itertuples(index=False))]
    return {"headers": headers, "rows": rows}
