"""
Discrete-event run over the scenario window.

Each step rebuilds the topology, refreshes routing at epoch boundaries, advances the
feeder switchover state machines, applies E2 assignments and cluster changes, and
evaluates feasibility. Everything is recorded in an EventLog.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from utils.clustering import (
    ClusterPlan,
    apply_cluster_plan,
    check_hierarchy,
    form_clusters,
    residual_compute,
)
from utils.dimensioning import InterfaceClass, latency_budget
from utils.errors import NoRouteError, PlacementError, RuleViolation
from utils.feasibility import (
    RELAXED_NEAR_RT_LOOP_S,
    STRICT_NEAR_RT_LOOP_S,
    EvaluationContext,
    FeasibilityReport,
    WindowResult,
    evaluate_snapshot,
)
from utils.json_sanitize import sanitize_for_json
from utils.orbital import (
    ConstellationConfig,
    GroundSite,
    SiteRole,
    elevation_deg,
    is_satellite,
    parse_sat_id,
    propagate,
    propagate_positions,
)
from utils.placement import (
    FunctionKind,
    PlacementSpec,
    RicExtension,
    Segment,
    SplitOption,
    derive_logical_links,
    validate_placement,
)
from utils.ric_assignment import (
    DEFAULT_CONTEXT_BYTES,
    DEFAULT_GUARD_S,
    DEFAULT_HYSTERESIS_WINDOW_S,
    DEFAULT_LOOKAHEAD_S,
    DEFAULT_SCORE_HYSTERESIS,
    AssignmentTrace,
    CandidateTimeline,
    E2AssignmentEngine,
    E2Policy,
    ReassignmentCause,
    RicCandidate,
    customize_weights,
    transfer_time,
)
from utils.topology import IslTopology, RoutingTable, build_routing_tables, build_topology, route

if TYPE_CHECKING:
    from utils.scenario import Scenario

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    FEEDER_HANDOVER_START = "feeder_handover_start"
    FEEDER_HANDOVER_COMPLETE = "feeder_handover_complete"
    FEEDER_HANDOVER_ABORTED = "feeder_handover_aborted"
    FEEDER_OUTAGE = "feeder_outage"
    FEEDER_RESTORED = "feeder_restored"
    GROUP_UE_HANDOVER = "group_ue_handover"
    E2_REASSIGNMENT = "e2_reassignment"
    CLUSTER_REFORMED = "cluster_reformed"
    LEADER_CHANGED = "leader_changed"
    BUDGET_VIOLATION = "budget_violation"


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: EventKind
    subject: str
    payload: Mapping[str, Any] = field(default_factory=dict)

    @property
    def sort_key(self) -> Tuple[float, str, str]:
        return (self.time, self.kind.value, self.subject)

    def to_record(self) -> Dict[str, Any]:
        record = {"time_s": self.time, "kind": self.kind.value, "subject": self.subject}
        record.update(self.payload)
        return sanitize_for_json(record)


class EventLog:
    """Events ordered by (time, kind, subject); equal keys keep emission order."""

    def __init__(self):
        self._events: List[SimEvent] = []

    def emit(self, time: float, kind: EventKind, subject: str, **payload: Any) -> SimEvent:
        event = SimEvent(float(time), kind, subject, payload)
        self._events.append(event)
        return event

    @property
    def events(self) -> List[SimEvent]:
        return sorted(self._events, key=lambda e: e.sort_key)

    def __iter__(self) -> Iterator[SimEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self._events)

    def of_kind(self, kind: EventKind | str) -> List[SimEvent]:
        kind = EventKind(kind)
        return [e for e in self.events if e.kind == kind]

    def counts(self) -> Dict[str, int]:
        counts = {kind.value: 0 for kind in EventKind}
        for event in self._events:
            counts[event.kind.value] += 1
        return counts

    def to_ndjson(self) -> str:
        return "".join(json.dumps(e.to_record(), sort_keys=True) + "\n" for e in self.events)

    def write_ndjson(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_ndjson(), encoding="utf-8")
        return path

    def write_counts_csv(self, path: str | Path) -> Path:
        path = Path(path)
        frame = pd.DataFrame(
            [{"kind": kind, "count": count} for kind, count in self.counts().items()],
            columns=["kind", "count"],
        )
        frame.to_csv(path, index=False)
        return path


class SatelliteFailure(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sat_id: str
    at_s: float = Field(ge=0)

    @field_validator("sat_id")
    @classmethod
    def _satellite(cls, value: str) -> str:
        if not is_satellite(value):
            raise ValueError(f"'{value}' is not a satellite id")
        parse_sat_id(value)
        return value


class DynamicsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    feeder_hysteresis_deg: float = Field(default=2.0, ge=0)
    dual_link_interval_s: float = Field(default=5.0, gt=0)
    predictive_feeder_switch: bool = True
    e2_policy: E2Policy = E2Policy.PREDICTIVE
    e2_weights: Dict[str, float] = Field(default_factory=dict)
    e2_score_hysteresis: float = Field(default=DEFAULT_SCORE_HYSTERESIS, ge=0)
    e2_hysteresis_window_s: float = Field(default=DEFAULT_HYSTERESIS_WINDOW_S, ge=0)
    lookahead_horizon_s: float = Field(default=DEFAULT_LOOKAHEAD_S, gt=0)
    guard_s: float = Field(default=DEFAULT_GUARD_S, ge=0)
    e2_max_hops: Optional[int] = Field(default=None, ge=0)
    ric_capacity: float = Field(default=10.0, gt=0)
    state_transfer_bytes: float = Field(default=DEFAULT_CONTEXT_BYTES, ge=0)
    recluster_interval_s: Optional[float] = Field(default=None, gt=0)
    failures: List[SatelliteFailure] = Field(default_factory=list)

    @field_validator("e2_weights")
    @classmethod
    def _weights(cls, value: Dict[str, float]) -> Dict[str, float]:
        if value:
            customize_weights(value)
        return value

    @field_validator("guard_s")
    @classmethod
    def _guard_below_horizon(cls, value: float, info) -> float:
        horizon = info.data.get("lookahead_horizon_s", DEFAULT_LOOKAHEAD_S)
        if value >= horizon:
            raise ValueError("guard_s must be < lookahead_horizon_s")
        return value


@dataclass(frozen=True)
class FeederDecision:
    gateway: Optional[str]
    transition: bool = False
    outage: bool = False


def feeder_assignment(
    sat: str,
    elevations: Mapping[str, float],
    t: float,
    current: Optional[str],
    hysteresis_deg: float = 2.0,
    predicted_loss: bool = False,
) -> FeederDecision:
    """
    Gateway for a satellite among the visible ones (site -> elevation).

    Highest elevation wins, ties to the lowest id. A visible incumbent is only left
    when the best beats it by the hysteresis or its loss is predicted.
    """
    if not elevations:
        return FeederDecision(None, outage=True)
    best = min(elevations, key=lambda site: (-elevations[site], site))
    if current is None or current not in elevations:
        return FeederDecision(best)
    if best == current:
        return FeederDecision(current)
    if elevations[best] >= elevations[current] + hysteresis_deg or predicted_loss:
        logger.debug("feeder switchover due", extra={"sat": sat, "time_s": t, "source": current, "target": best})
        return FeederDecision(best, transition=True)
    return FeederDecision(current)


def group_ue_handover_cost(n_ues: int, msgs_per_ue: int, msg_size: int) -> int:
    """Signalling volume in bytes when every UE under a satellite hands over at once."""
    if n_ues < 0 or msgs_per_ue < 0 or msg_size < 0:
        raise ValueError("counts and sizes must be >= 0")
    return int(n_ues) * int(msgs_per_ue) * int(msg_size)


def burst_rate_bps(volume_bytes: float, interval_s: float) -> float:
    if interval_s <= 0:
        raise ValueError("interval must be > 0")
    return volume_bytes * 8.0 / interval_s


@dataclass
class _FeederState:
    serving: Optional[str] = None
    pending: Optional[Tuple[str, float]] = None


@dataclass(frozen=True)
class _Burst:
    sat: str
    start: float
    end: float
    bps: float


class FeederSwitchover:
    """Make-before-break feeder switchover state per satellite."""

    def __init__(
        self,
        config: DynamicsConfig,
        constellation: ConstellationConfig,
        sites: Sequence[GroundSite],
        satellites: Sequence[str],
    ):
        self.config = config
        self.constellation = constellation
        self.sites = {s.site_id: s for s in sites if s.role == SiteRole.GATEWAY}
        self.states: Dict[str, _FeederState] = {sat: _FeederState() for sat in sorted(satellites)}
        self._started = False

    def serving(self) -> Dict[str, Optional[str]]:
        return {sat: st.serving for sat, st in self.states.items()}

    def _predicted_loss(self, sat: str, gateway: str, t: float) -> bool:
        if not self.config.predictive_feeder_switch:
            return False
        ahead = t + self.config.dual_link_interval_s
        plane, slot = parse_sat_id(sat)
        position = propagate_positions(self.constellation, ahead)[plane, slot]
        site = self.sites[gateway]
        return elevation_deg(position, site, ahead) < site.min_elevation_deg

    def step(self, topology: IslTopology, t: float, log: EventLog) -> List[str]:
        """Advance every tracked satellite; returns satellites that started a switchover."""
        started: List[str] = []
        first = not self._started
        self._started = True
        for sat, st in self.states.items():
            visible = {f.site_id: f.elevation_deg for f in topology.feeders_of(sat)}
            if first:
                st.serving = feeder_assignment(sat, visible, t, None).gateway
                continue
            if st.pending is not None:
                self._advance_pending(sat, st, visible, t, log)
                continue
            if st.serving is None:
                if visible:
                    st.serving = feeder_assignment(sat, visible, t, None).gateway
                    log.emit(t, EventKind.FEEDER_RESTORED, sat, gateway=st.serving)
                continue

            predicted = st.serving in visible and self._predicted_loss(sat, st.serving, t)
            decision = feeder_assignment(
                sat, visible, t, st.serving, self.config.feeder_hysteresis_deg, predicted
            )
            if decision.outage:
                log.emit(t, EventKind.FEEDER_OUTAGE, sat, gateway=st.serving)
                st.serving = None
            elif decision.transition:
                st.pending = (decision.gateway, t)
                log.emit(
                    t, EventKind.FEEDER_HANDOVER_START, sat,
                    source=st.serving, target=decision.gateway,
                    trigger="predicted_loss" if predicted else "elevation",
                    dual_link_s=self.config.dual_link_interval_s,
                )
                started.append(sat)
            elif decision.gateway != st.serving:
                # incumbent lost between steps without a target in hand
                log.emit(t, EventKind.FEEDER_OUTAGE, sat, gateway=st.serving)
                log.emit(t, EventKind.FEEDER_RESTORED, sat, gateway=decision.gateway)
                st.serving = decision.gateway
        return started

    def _advance_pending(self, sat: str, st: _FeederState, visible: Mapping[str, float], t: float, log: EventLog):
        target, start = st.pending
        if target not in visible:
            log.emit(t, EventKind.FEEDER_HANDOVER_ABORTED, sat, source=st.serving, target=target)
            st.pending = None
            if st.serving not in visible:
                log.emit(t, EventKind.FEEDER_OUTAGE, sat, gateway=st.serving)
                st.serving = None
            return
        source_lost = st.serving not in visible
        if source_lost or t >= start + self.config.dual_link_interval_s - 1e-9:
            log.emit(
                t, EventKind.FEEDER_HANDOVER_COMPLETE, sat,
                source=st.serving, target=target, dual_link_s=t - start, truncated=source_lost,
            )
            st.serving = target
            st.pending = None

    def dual_link_active(self, sat: str) -> bool:
        return self.states[sat].pending is not None


@dataclass
class _Snapshot:
    time: float
    topology: IslTopology
    table: RoutingTable


class _SnapshotSeries:
    """Topologies and routing tables on the step grid, refreshed each routing epoch."""

    def __init__(self, scenario: "Scenario"):
        self.scenario = scenario
        self._cache: List[_Snapshot] = []
        self._failed_key: Optional[frozenset] = None

    def failed_at(self, t: float) -> frozenset:
        return frozenset(f.sat_id for f in self.scenario.dynamics.failures if f.at_s <= t)

    def build(self, times: Sequence[float]) -> List[_Snapshot]:
        sc = self.scenario
        snaps: List[_Snapshot] = []
        table: Optional[RoutingTable] = None
        failed_key = None
        for t in times:
            failed = self.failed_at(t)
            topology = build_topology(
                propagate(sc.constellation, t), sc.sites, sc.topology, config=sc.constellation, failed=failed
            )
            if table is None or not table.covers(t) or failed != failed_key:
                table = build_routing_tables(topology, sc.topology.routing_epoch_s)
                failed_key = failed
            snaps.append(_Snapshot(t, topology, table))
        return snaps


def _e2_budget(scenario: "Scenario") -> float:
    row = latency_budget(InterfaceClass.E2, scenario.budget_overrides)
    if scenario.traffic.require_strict_near_rt:
        return STRICT_NEAR_RT_LOOP_S
    return row.max_one_way or RELAXED_NEAR_RT_LOOP_S


def build_candidate_timeline(
    spec: PlacementSpec,
    snapshots: Sequence[_Snapshot],
    loop_budget: float,
    processing: float,
    max_hops: Optional[int] = None,
) -> CandidateTimeline:
    """Every near-RT RIC instance as a candidate for every E2 node at every step."""
    rics = [(f.label, spec.node_of(f)) for f in spec.functions(FunctionKind.NEAR_RT_RIC)]
    nodes = [
        (f.label, spec.node_of(f))
        for kind in (FunctionKind.DU, FunctionKind.CU_CP)
        for f in spec.functions(kind)
    ]
    candidates: List[Dict[str, List[RicCandidate]]] = []
    for snap in snapshots:
        step: Dict[str, List[RicCandidate]] = {}
        for label, host in nodes:
            row = []
            for ric, ric_host in rics:
                try:
                    path = route(snap.table, snap.topology, host, ric_host)
                except NoRouteError:
                    row.append(RicCandidate(ric, None))
                    continue
                loop = 2.0 * path.total_delay + processing
                within = loop <= loop_budget and (max_hops is None or path.hop_count <= max_hops)
                row.append(RicCandidate(ric, path.total_delay, path.quality, within_budget=within))
            step[label] = row
        candidates.append(step)
    return CandidateTimeline(times=[s.time for s in snapshots], candidates=candidates)


@dataclass
class SimulationResult:
    scenario_name: str
    spec: PlacementSpec
    window: WindowResult
    events: EventLog
    summary: Dict[str, Any]
    assignment: Optional[AssignmentTrace] = None

    @property
    def feasible(self) -> bool:
        return all(r.feasible for r in self.window.reports)


def _feeder_sats(spec: PlacementSpec) -> List[str]:
    return sorted({
        link.space_node
        for link in derive_logical_links(spec)
        if link.segment == Segment.FEEDER and not link.relay
    })


def _cells_on(spec: PlacementSpec, sat: str) -> List[int]:
    return sorted(
        spec.cell_of(f) for f in spec.functions(FunctionKind.DU) if spec.node_of(f) == sat
    )


def run(scenario: "Scenario") -> SimulationResult:
    """Simulate the scenario window; deterministic for a given scenario and seed."""
    sc = scenario
    rng = np.random.default_rng(sc.seed)
    window = sc.window
    count = len(np.arange(window.t0, window.t1, window.step))
    series = _SnapshotSeries(sc)
    log = EventLog()

    ext = sc.placement_extension
    stop = window.t1
    if ext == RicExtension.EXT2 and sc.dynamics.e2_policy == E2Policy.PREDICTIVE:
        stop += sc.dynamics.lookahead_horizon_s
    # same start and step, so the window grid is a prefix of the lookahead grid
    grid = [float(t) for t in np.arange(window.t0, stop, window.step)]
    times = grid[:count]
    snapshots = series.build(grid)
    first = snapshots[0]

    spec, plan = sc.resolve_placement(first.topology)
    all_sats = sc.constellation.satellite_ids()
    validation = validate_placement(spec, topology=first.topology, sites=sc.sites, satellites=all_sats)
    if not validation.ok:
        raise PlacementError("placement is inconsistent", validation.violations)

    feeders = FeederSwitchover(sc.dynamics, sc.constellation, sc.sites, _feeder_sats(spec))
    family_one = spec.split in (SplitOption.OPT_1A, SplitOption.OPT_1B)
    bursts: List[_Burst] = []
    loop_budget = _e2_budget(sc)

    trace: Optional[AssignmentTrace] = None
    if ext == RicExtension.EXT2:
        timeline = build_candidate_timeline(
            spec, snapshots, loop_budget, sc.traffic.e2_processing_s, sc.dynamics.e2_max_hops
        )
        engine = E2AssignmentEngine(
            policy=sc.dynamics.e2_policy,
            weights=sc.dynamics.e2_weights or None,
            hysteresis=sc.dynamics.e2_score_hysteresis,
            hysteresis_window=sc.dynamics.e2_hysteresis_window_s,
            horizon=sc.dynamics.lookahead_horizon_s,
            guard=sc.dynamics.guard_s,
            ric_capacity=sc.dynamics.ric_capacity,
        )
        trace = engine.run(timeline, initial=spec.e2_serving, steps=len(times))
        _emit_reassignments(trace, timeline, spec, snapshots, sc, log)

    reports: List[FeasibilityReport] = []
    e2_loops: List[float] = []
    failed_known: frozenset = frozenset()
    last_recluster = times[0] if times else 0.0

    for k, t in enumerate(times):
        snap = snapshots[k]
        failed = series.failed_at(t)
        if plan is not None and (failed != failed_known):
            spec, plan = _handle_failures(spec, plan, snap.topology, failed, sc, all_sats, t, log)
        failed_known = failed
        if (
            plan is not None
            and sc.dynamics.recluster_interval_s is not None
            and t - last_recluster >= sc.dynamics.recluster_interval_s - 1e-9
        ):
            spec, plan = _recluster(spec, plan, snap.topology, failed, sc, all_sats, t, log)
            last_recluster = t

        for sat in feeders.step(snap.topology, t, log):
            interval = sc.dynamics.dual_link_interval_s
            if family_one:
                for cell in _cells_on(spec, sat):
                    n_ues = int(rng.poisson(sc.traffic.ues_per_cell))
                    volume = group_ue_handover_cost(n_ues, sc.traffic.msgs_per_ue, sc.traffic.msg_size_bytes)
                    bps = burst_rate_bps(volume, interval)
                    bursts.append(_Burst(sat, t, t + interval, bps))
                    log.emit(
                        t, EventKind.GROUP_UE_HANDOVER, sat,
                        cell=cell, n_ues=n_ues, bytes=volume, burst_bps=bps, interval_s=interval,
                    )

        burst_now: Dict[str, float] = {}
        for b in bursts:
            if b.start <= t < b.end - 1e-9:
                burst_now[b.sat] = burst_now.get(b.sat, 0.0) + b.bps

        step_spec = spec
        if trace is not None:
            serving = {n: r for n, r in trace.serving[k].items() if r is not None}
            step_spec = spec.model_copy(update={"e2_serving": serving})

        context = EvaluationContext.for_sites(
            sc.sites,
            routing=snap.table,
            serving_gateway=feeders.serving(),
            burst_bps=burst_now,
            budget_overrides=sc.budget_overrides,
        )
        report = evaluate_snapshot(step_spec, snap.topology, sc.traffic, sc.resources, t, context)
        if plan is not None:
            report.violations.extend(
                check_hierarchy(plan, _nonrt_host(spec), snap.topology, snap.table, sc.traffic.e2_processing_s)
            )
        if trace is not None:
            for node in trace.unassigned_at(k):
                report.violations.append(RuleViolation("e2-unassigned", "no valid near-RT RIC", node))

        for v in report.violations:
            log.emit(t, EventKind.BUDGET_VIOLATION, v.subject or "", rule=v.rule, detail=v.detail)
        e2_loops += [v.loop_delay for v in report.links_of(InterfaceClass.E2) if v.loop_delay is not None]
        reports.append(report)

    result_window = WindowResult(reports)
    summary = _summary(sc, spec, result_window, log, trace, e2_loops)
    logger.info(
        "simulation finished",
        extra={"scenario": sc.name, "steps": len(reports), "events": len(log)},
    )
    return SimulationResult(sc.name, spec, result_window, log, summary, trace)


def _emit_reassignments(trace, timeline, spec, snapshots, sc: "Scenario", log: EventLog) -> None:
    index = {t: k for k, t in enumerate(timeline.times)}
    hosts = {f.label: spec.node_of(f) for f in spec.functions(FunctionKind.NEAR_RT_RIC)}
    for r in trace.reassignments:
        if r.cause == ReassignmentCause.INITIAL:
            continue
        k = index.get(r.time)
        seconds: Optional[float] = None
        if k is not None and r.source is not None:
            snap = snapshots[k]
            try:
                delay = route(snap.table, snap.topology, hosts[r.source], hosts[r.target]).total_delay
                seconds = transfer_time(sc.dynamics.state_transfer_bytes, sc.traffic.isl_capacity_bps, delay)
            except NoRouteError:
                seconds = None
        log.emit(
            r.time, EventKind.E2_REASSIGNMENT, r.node,
            source=r.source, target=r.target, cause=r.cause.value,
            context_bytes=sc.dynamics.state_transfer_bytes,
            transfer_time_s=seconds,
        )


def _nonrt_host(spec: PlacementSpec) -> str:
    hosts = [spec.node_of(f) for f in spec.functions(FunctionKind.NON_RT_RIC)]
    if not hosts:
        raise PlacementError("ext3 placement has no non-RT RIC")
    return hosts[0]


def _replan(plan: ClusterPlan, spec, topology, failed, sc: "Scenario", all_sats) -> ClusterPlan:
    residual = residual_compute(spec, all_sats, sc.resources)
    return form_clusters(
        topology, plan.rule, plan.target_size,
        residual=residual, satellites=all_sats, failed=failed, k_hops=plan.k_hops,
    )


def _handle_failures(spec, plan: ClusterPlan, topology, failed, sc, all_sats, t, log: EventLog):
    new_plan = _replan(plan, spec, topology, failed, sc, all_sats)
    for old, new in zip(plan.clusters, new_plan.clusters):
        if old.leader != new.leader:
            log.emit(t, EventKind.LEADER_CHANGED, old.leader or "", previous=old.leader, leader=new.leader)
    return apply_cluster_plan(spec, new_plan), new_plan


def _recluster(spec, plan: ClusterPlan, topology, failed, sc, all_sats, t, log: EventLog):
    new_plan = _replan(plan, spec, topology, failed, sc, all_sats)
    log.emit(
        t, EventKind.CLUSTER_REFORMED, "constellation",
        clusters=len(new_plan.clusters), leaders=new_plan.leaders,
    )
    for old, new in zip(plan.clusters, new_plan.clusters):
        if old.members == new.members and old.leader != new.leader:
            log.emit(t, EventKind.LEADER_CHANGED, old.leader or "", previous=old.leader, leader=new.leader)
    return apply_cluster_plan(spec, new_plan), new_plan


def _summary(sc, spec, window: WindowResult, log: EventLog, trace, e2_loops: List[float]) -> Dict[str, Any]:
    counts = log.counts()
    steps = len(window.reports)
    rule_steps: Dict[str, int] = {}
    for report in window.reports:
        for rule in report.violation_rules():
            rule_steps[rule] = rule_steps.get(rule, 0) + 1
    power = [n.power_used for r in window.reports for n in r.per_node]
    links = derive_logical_links(spec)
    space_kinds = sorted({f.kind.value for sat in spec.satellites for f in spec.functions_on(sat)})
    loops = np.asarray(e2_loops, dtype=float)
    return {
        "scenario": sc.name,
        "split": spec.split.value,
        "extension": spec.extension.value,
        "steps": steps,
        "feasible": all(r.feasible for r in window.reports),
        "availability": window.availability,
        "feeder_handovers": counts[EventKind.FEEDER_HANDOVER_COMPLETE.value],
        "feeder_outages": counts[EventKind.FEEDER_OUTAGE.value],
        "group_ue_handovers": counts[EventKind.GROUP_UE_HANDOVER.value],
        "e2_reassignments": counts[EventKind.E2_REASSIGNMENT.value],
        "e2_unassigned_time_s": trace.total_unassigned_time(sc.window.step) if trace else 0.0,
        "leader_changes": counts[EventKind.LEADER_CHANGED.value],
        "cluster_reformations": counts[EventKind.CLUSTER_REFORMED.value],
        "violation_time_fraction": {
            rule: n / steps for rule, n in sorted(rule_steps.items())
        } if steps else {},
        "violation_classes": sorted(rule_steps),
        "e2_loop_mean_ms": float(loops.mean() * 1e3) if loops.size else None,
        "e2_loop_p95_ms": float(np.percentile(loops, 95) * 1e3) if loops.size else None,
        "peak_feeder_demand_bps": window.peak_feeder_demand_bps,
        "max_sat_power_w": max(power, default=0.0),
        "worst_margin_s": window.worst_margin,
        "interfaces": sorted({link.interface_class.value for link in links}),
        "feeder_interfaces": sorted({link.interface_class.value for link in links if link.segment == Segment.FEEDER}),
        "space_functions": space_kinds,
    }
