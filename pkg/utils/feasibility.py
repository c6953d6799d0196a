"""
Static feasibility evaluation of a placement.

Each logical link is resolved to a path on a topology snapshot and checked against
its latency budget and the capacity of the segment it rides on; each satellite is
checked against its power and compute budgets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from utils.dimensioning import (
    AirInterfaceConfig,
    InterfaceClass,
    budget_key,
    fronthaul_bit_rate,
    latency_budget,
    midhaul_control_rate,
    midhaul_peak_rate,
)
from utils.errors import NoRouteError, RuleViolation
from utils.orbital import ConstellationConfig, GroundSite, SiteRole, propagate, terrestrial_delay
from utils.placement import (
    FunctionKind,
    LogicalLink,
    NetworkFunction,
    PlacementSpec,
    Segment,
    derive_logical_links,
)
from utils.topology import IslTopology, Route, RoutingTable, TopologyPolicy, build_routing_tables, build_topology, route

logger = logging.getLogger(__name__)

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
OK = "ok"
VIOLATION = "violation"

STRICT_NEAR_RT_LOOP_S = 10e-3
RELAXED_NEAR_RT_LOOP_S = 1.0

_LOOP_CLASSES = (InterfaceClass.E2, InterfaceClass.INTER_RIC)
_USER_PLANE = (InterfaceClass.N3, InterfaceClass.N6, InterfaceClass.N9)
_GNB_KINDS = frozenset({FunctionKind.RU, FunctionKind.DU, FunctionKind.CU_CP, FunctionKind.CU_UP})


class TrafficConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    air: AirInterfaceConfig = Field(default_factory=AirInterfaceConfig)
    feeder_capacity_bps: float = Field(default=5e9, gt=0)
    isl_capacity_bps: float = Field(default=10e9, gt=0)
    terrestrial_capacity_bps: float = Field(default=100e9, gt=0)
    placeholder_rate_bps: float = Field(default=1e6, ge=0)
    rate_overrides_bps: Dict[str, float] = Field(default_factory=dict)
    e2_processing_s: float = Field(default=1e-3, ge=0)
    require_strict_near_rt: bool = False
    fibre_velocity_factor: float = Field(default=2.0 / 3.0, gt=0, le=1)
    ues_per_cell: float = Field(default=1000.0, ge=0)
    msgs_per_ue: int = Field(default=8, ge=0)
    msg_size_bytes: int = Field(default=200, ge=0)

    @field_validator("rate_overrides_bps")
    @classmethod
    def _known_classes(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, rate in value.items():
            InterfaceClass(name)
            if rate < 0:
                raise ValueError(f"rate override for {name} must be >= 0")
        return value


def _default_power() -> Dict[str, float]:
    return {
        "RU": 20.0, "DU": 30.0, "CU_CP": 10.0, "CU_UP": 5.0, "UPF": 25.0, "SEC": 5.0,
        "NearRT_RIC": 10.0, "NearRT_RIC_DU_part": 5.0, "NonRT_RIC_cluster_leader": 10.0,
    }


def _default_compute() -> Dict[str, float]:
    return {
        "RU": 20.0, "DU": 50.0, "CU_CP": 20.0, "CU_UP": 10.0, "UPF": 30.0, "SEC": 10.0,
        "NearRT_RIC": 20.0, "NearRT_RIC_DU_part": 10.0, "NonRT_RIC_cluster_leader": 20.0,
    }


class ResourceModel(BaseModel):
    """Per-satellite power and compute costs. Composite gNB figures override the per-kind sum."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    power_budget_w: float = Field(default=200.0, gt=0)
    compute_budget: float = Field(default=250.0, gt=0)
    power_cost_w: Dict[str, float] = Field(default_factory=_default_power)
    compute_cost: Dict[str, float] = Field(default_factory=_default_compute)
    full_gnb_power_w: float = Field(default=78.6, ge=0)
    feeder_modem_power_w: float = Field(default=55.9, ge=0)
    full_gnb_overhead_factor: float = Field(default=1.55, ge=1.55, le=1.70)

    @field_validator("power_cost_w", "compute_cost")
    @classmethod
    def _non_negative(cls, value: Dict[str, float]) -> Dict[str, float]:
        for kind, cost in value.items():
            FunctionKind(kind)
            if cost < 0:
                raise ValueError(f"cost for {kind} must be >= 0")
        return value

    def power_of(self, kind: FunctionKind) -> float:
        return self.power_cost_w.get(kind.value, 0.0)

    def compute_of(self, kind: FunctionKind) -> float:
        return self.compute_cost.get(kind.value, 0.0)


@dataclass(frozen=True)
class LinkVerdict:
    time: float
    link: LogicalLink
    required_bps: float
    capacity_bps: float
    delay: Optional[float]
    budget: float
    verdict: str
    path_hops: Tuple[str, ...] = ()
    loop_delay: Optional[float] = None
    strict_capable: Optional[bool] = None
    quality: float = 1.0

    @property
    def delay_margin(self) -> float:
        measured = self.loop_delay if self.loop_delay is not None else self.delay
        if measured is None:
            return -math.inf
        return self.budget - measured

    @property
    def rate_margin(self) -> float:
        return self.capacity_bps - self.required_bps

    @property
    def margin(self) -> float:
        return self.delay_margin


@dataclass(frozen=True)
class NodeVerdict:
    node: str
    power_used: float
    power_budget: float
    compute_used: float
    compute_budget: float
    uses_feeder: bool = False

    @property
    def verdict(self) -> str:
        ok = self.power_used <= self.power_budget and self.compute_used <= self.compute_budget
        return OK if ok else VIOLATION


@dataclass
class FeasibilityReport:
    time: float
    per_link: List[LinkVerdict] = field(default_factory=list)
    per_node: List[NodeVerdict] = field(default_factory=list)
    violations: List[RuleViolation] = field(default_factory=list)
    advisories: List[RuleViolation] = field(default_factory=list)
    feeder_demand_bps: Dict[str, float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def overall(self) -> str:
        return FEASIBLE if self.feasible else INFEASIBLE

    def links_of(self, interface_class: InterfaceClass | str) -> List[LinkVerdict]:
        cls = InterfaceClass(interface_class)
        return [v for v in self.per_link if v.link.interface_class == cls]

    def violation_rules(self) -> List[str]:
        return sorted({v.rule for v in self.violations})


@dataclass
class WindowResult:
    reports: List[FeasibilityReport]

    @property
    def times(self) -> List[float]:
        return [r.time for r in self.reports]

    @property
    def availability(self) -> float:
        if not self.reports:
            return 1.0
        return sum(r.feasible for r in self.reports) / len(self.reports)

    @property
    def worst_margin(self) -> Dict[str, float]:
        """Smallest delay margin per interface class over the window."""
        worst: Dict[str, float] = {}
        for report in self.reports:
            for v in report.per_link:
                key = v.link.interface_class.value
                worst[key] = min(worst.get(key, math.inf), v.delay_margin)
        return dict(sorted(worst.items()))

    def steps_with(self, rule: str) -> List[float]:
        return [r.time for r in self.reports if any(v.rule == rule for v in r.violations)]

    @property
    def peak_feeder_demand_bps(self) -> float:
        peaks = [max(r.feeder_demand_bps.values(), default=0.0) for r in self.reports]
        return max(peaks, default=0.0)


@dataclass
class EvaluationContext:
    """Run-time state the evaluator needs beyond the placement and snapshot."""

    sites: Dict[str, GroundSite] = field(default_factory=dict)
    routing: Optional[RoutingTable] = None
    serving_gateway: Dict[str, Optional[str]] = field(default_factory=dict)
    burst_bps: Dict[str, float] = field(default_factory=dict)
    budget_overrides: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def for_sites(cls, sites: Iterable[GroundSite], **kwargs) -> "EvaluationContext":
        return cls(sites={s.site_id: s for s in sites}, **kwargs)

    @property
    def gateways(self) -> List[str]:
        return sorted(s.site_id for s in self.sites.values() if s.role == SiteRole.GATEWAY)


def required_rate_bps(interface_class: InterfaceClass, traffic: TrafficConfig) -> float:
    """OFH from the fronthaul formula, F1 and user plane from the midhaul anchors, the rest placeholders."""
    override = traffic.rate_overrides_bps.get(interface_class.value)
    if override is not None:
        return float(override)
    if interface_class == InterfaceClass.OFH:
        return fronthaul_bit_rate(traffic.air).bps
    if interface_class == InterfaceClass.F1_C:
        return midhaul_control_rate(traffic.air).bps
    if interface_class == InterfaceClass.F1_U or interface_class in _USER_PLANE:
        return midhaul_peak_rate(traffic.air).bps
    return traffic.placeholder_rate_bps


def e2_loop_latency(link: LogicalLink | float, processing: float = 1e-3) -> float:
    """Control loop duration: twice the one-way delay plus processing."""
    if isinstance(link, LogicalLink):
        if link.segment == Segment.LOCAL:
            one_way = 0.0
        elif isinstance(link.path, Route):
            one_way = link.path.total_delay
        else:
            raise ValueError(f"link {link.link_id} has no resolved path")
    else:
        one_way = float(link)
    if one_way < 0 or processing < 0:
        raise ValueError("delays must be >= 0")
    return 2.0 * one_way + processing


def is_strict_near_rt(loop: float) -> bool:
    return loop <= STRICT_NEAR_RT_LOOP_S


def node_resource_check(
    node: str,
    functions: Iterable[NetworkFunction | FunctionKind],
    resources: ResourceModel,
    uses_feeder: bool = False,
) -> NodeVerdict:
    """Power and compute used by one node. The complete gNB stack is charged as a composite."""
    kinds = [f.kind if isinstance(f, NetworkFunction) else FunctionKind(f) for f in functions]
    full_gnb = _GNB_KINDS <= set(kinds)
    if full_gnb:
        gnb = [k for k in kinds if k in _GNB_KINDS]
        rest = [k for k in kinds if k not in _GNB_KINDS]
        power = resources.full_gnb_power_w + sum(resources.power_of(k) for k in rest)
        compute = resources.full_gnb_overhead_factor * sum(resources.compute_of(k) for k in gnb)
        compute += sum(resources.compute_of(k) for k in rest)
    else:
        power = sum(resources.power_of(k) for k in kinds)
        compute = sum(resources.compute_of(k) for k in kinds)
    if uses_feeder and kinds:
        power += resources.feeder_modem_power_w
    return NodeVerdict(
        node=node,
        power_used=power,
        power_budget=resources.power_budget_w,
        compute_used=compute,
        compute_budget=resources.compute_budget,
        uses_feeder=uses_feeder,
    )


class _PathResolver:
    def __init__(self, topology: IslTopology, context: EvaluationContext, traffic: TrafficConfig):
        self.topology = topology
        self.context = context
        self.traffic = traffic
        self.routing = context.routing or build_routing_tables(topology)

    def _terrestrial(self, a: str, b: str) -> float:
        if a == b:
            return 0.0
        sites = self.context.sites
        if a not in sites or b not in sites:
            raise NoRouteError(a, b, reason="unknown ground site")
        return terrestrial_delay(sites[a], sites[b], self.traffic.fibre_velocity_factor)

    def serving_gateway(self, sat: str) -> Optional[str]:
        if sat in self.context.serving_gateway:
            return self.context.serving_gateway[sat]
        feeders = self.topology.feeders_of(sat)
        return feeders[0].site_id if feeders else None

    def resolve(self, link: LogicalLink) -> Tuple[Route, Optional[str]]:
        """Path for the link and the satellite whose feeder it uses, if any."""
        a, b = link.from_node, link.to_node
        if link.segment == Segment.LOCAL:
            return Route(hops=(a,)), None
        if link.segment == Segment.ISL_PATH:
            return route(self.routing, self.topology, a, b), None
        if link.segment == Segment.TERRESTRIAL:
            return Route(hops=(a, b), edge_delays=(self._terrestrial(a, b),)), None

        sat, ground = link.space_node, link.ground_node
        if link.relay:
            path, feeder_sat = self._relay_path(sat, ground)
        else:
            gateway = self.serving_gateway(sat)
            if gateway is None:
                raise NoRouteError(sat, ground, reason="no serving gateway")
            edge = self.topology.feeder_edge(sat, gateway)
            if edge is None:
                raise NoRouteError(sat, ground, reason=f"feeder {sat}-{gateway} not visible")
            path = Route(hops=(sat, gateway), edge_delays=(edge.delay,))
            if gateway != ground:
                path = path.extended(ground, self._terrestrial(gateway, ground))
            feeder_sat = sat
        if sat == b:
            path = Route(tuple(reversed(path.hops)), tuple(reversed(path.edge_delays)), path.quality)
        return path, feeder_sat

    def _relay_path(self, sat: str, ground: str) -> Tuple[Route, str]:
        best: Optional[Tuple[float, str, Route]] = None
        for gateway in self.context.gateways or sorted(self.topology.sites):
            try:
                path = route(self.routing, self.topology, sat, gateway)
                if gateway != ground:
                    path = path.extended(ground, self._terrestrial(gateway, ground))
            except NoRouteError:
                continue
            if best is None or path.total_delay < best[0]:
                best = (path.total_delay, gateway, path)
        if best is None:
            raise NoRouteError(sat, ground, reason="no gateway reachable over ISLs")
        path = best[2]
        gateway_index = path.hops.index(best[1])
        return path, path.hops[gateway_index - 1]


def _capacity(segment: Segment, traffic: TrafficConfig) -> float:
    if segment == Segment.LOCAL:
        return math.inf
    if segment == Segment.ISL_PATH:
        return traffic.isl_capacity_bps
    if segment == Segment.FEEDER:
        return traffic.feeder_capacity_bps
    return traffic.terrestrial_capacity_bps


def evaluate_snapshot(
    spec: PlacementSpec,
    topology: IslTopology,
    traffic: TrafficConfig,
    resources: ResourceModel,
    t: Optional[float] = None,
    context: Optional[EvaluationContext] = None,
) -> FeasibilityReport:
    """Check every logical link and every satellite of a placement at one instant."""
    t = topology.time if t is None else t
    context = context or EvaluationContext()
    resolver = _PathResolver(topology, context, traffic)
    report = FeasibilityReport(time=t)
    feeder_demand: Dict[str, float] = {}
    feeder_users: set = set()

    for link in derive_logical_links(spec):
        required = required_rate_bps(link.interface_class, traffic)
        capacity = _capacity(link.segment, traffic)
        budget_row = latency_budget(link.interface_class, context.budget_overrides)
        if link.segment == Segment.FEEDER and not link.relay:
            feeder_users.add(link.space_node)

        try:
            path, feeder_sat = resolver.resolve(link)
        except NoRouteError as exc:
            report.per_link.append(
                LinkVerdict(t, link, required, capacity, None, budget_row.limit, VIOLATION)
            )
            report.violations.append(RuleViolation("unreachable", exc.reason, link.link_id))
            continue

        resolved = link.with_path(path)
        if feeder_sat is not None:
            feeder_demand[feeder_sat] = feeder_demand.get(feeder_sat, 0.0) + required
        delay = path.total_delay
        loop = None
        strict = None
        budget = budget_row.limit
        problems: List[RuleViolation] = []

        if link.interface_class in _LOOP_CLASSES:
            loop = e2_loop_latency(delay, traffic.e2_processing_s)
            strict = is_strict_near_rt(loop)
            if link.interface_class == InterfaceClass.E2:
                budget = budget_row.max_one_way or RELAXED_NEAR_RT_LOOP_S
                if loop > budget:
                    problems.append(RuleViolation("e2-loop-budget", f"loop {loop * 1e3:.3f} ms", link.link_id))
                elif not strict:
                    finding = RuleViolation(
                        "e2-strict-near-rt", f"loop {loop * 1e3:.3f} ms above 10 ms", link.link_id
                    )
                    if traffic.require_strict_near_rt:
                        problems.append(finding)
                    else:
                        report.advisories.append(finding)
            elif loop > budget:
                problems.append(RuleViolation("latency-budget", f"loop {loop * 1e3:.3f} ms", link.link_id))
        elif link.loop_bound is not None:
            loop = e2_loop_latency(delay, traffic.e2_processing_s)
            budget = link.loop_bound
            if loop > budget:
                problems.append(
                    RuleViolation("follower-loop-bound", f"loop {loop * 1e3:.3f} ms above bound", link.link_id)
                )
        elif delay > budget:
            problems.append(
                RuleViolation("latency-budget", f"{delay * 1e6:.1f} us over {budget * 1e6:.1f} us", link.link_id)
            )
        if required > capacity:
            problems.append(RuleViolation("capacity", f"{required:.0f} bps over {capacity:.0f} bps", link.link_id))

        report.violations.extend(problems)
        report.per_link.append(
            LinkVerdict(
                time=t,
                link=resolved,
                required_bps=required,
                capacity_bps=capacity,
                delay=delay,
                budget=budget,
                verdict=VIOLATION if problems else OK,
                path_hops=path.hops,
                loop_delay=loop,
                strict_capable=strict,
                quality=path.quality,
            )
        )

    for sat, burst in context.burst_bps.items():
        feeder_demand[sat] = feeder_demand.get(sat, 0.0) + burst
    for sat in sorted(feeder_demand):
        if feeder_demand[sat] > traffic.feeder_capacity_bps:
            report.violations.append(
                RuleViolation(
                    "feeder-capacity",
                    f"{feeder_demand[sat]:.0f} bps over {traffic.feeder_capacity_bps:.0f} bps",
                    sat,
                )
            )
    report.feeder_demand_bps = dict(sorted(feeder_demand.items()))

    for node in spec.satellites:
        verdict = node_resource_check(node, spec.functions_on(node), resources, node in feeder_users)
        report.per_node.append(verdict)
        if verdict.power_used > verdict.power_budget:
            report.violations.append(
                RuleViolation("power-budget", f"{verdict.power_used:.1f} W over {verdict.power_budget:.1f} W", node)
            )
        if verdict.compute_used > verdict.compute_budget:
            report.violations.append(
                RuleViolation("compute-budget", f"{verdict.compute_used:.1f} over {verdict.compute_budget:.1f}", node)
            )
    return report


def evaluate_window(
    spec: PlacementSpec,
    constellation: ConstellationConfig,
    sites: Sequence[GroundSite],
    traffic: TrafficConfig,
    resources: ResourceModel,
    t0: float,
    t1: float,
    step: float,
    *,
    policy: Optional[TopologyPolicy] = None,
    budget_overrides: Optional[Mapping[str, float]] = None,
) -> WindowResult:
    """One report per step of [t0, t1); routing tables are refreshed each routing epoch."""
    if not t0 < t1:
        raise ValueError("t0 must be < t1")
    if step <= 0:
        raise ValueError("step must be > 0")
    policy = policy or TopologyPolicy()
    overrides = dict(budget_overrides or {})
    for key in overrides:
        budget_key(key)

    reports: List[FeasibilityReport] = []
    table: Optional[RoutingTable] = None
    for t in np.arange(t0, t1, step):
        t = float(t)
        topology = build_topology(propagate(constellation, t), sites, policy, config=constellation)
        if table is None or not table.covers(t):
            table = build_routing_tables(topology, policy.routing_epoch_s)
        context = EvaluationContext.for_sites(sites, routing=table, budget_overrides=overrides)
        reports.append(evaluate_snapshot(spec, topology, traffic, resources, t, context))

    result = WindowResult(reports)
    logger.info(
        "window evaluated",
        extra={"steps": len(reports), "availability": result.availability},
    )
    return result
