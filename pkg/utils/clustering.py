"""
Cluster formation for the hierarchical non-RT RIC: partition the constellation,
elect one leader per cluster and derive the ground -> leader -> follower links.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from utils.dimensioning import InterfaceClass
from utils.errors import NoRouteError, RuleViolation
from utils.feasibility import ResourceModel, node_resource_check
from utils.orbital import parse_sat_id
from utils.placement import (
    FOLLOWER_LOOP_BOUND_S,
    Assignment,
    ClusterRule,
    FunctionKind,
    LogicalLink,
    NetworkFunction,
    PlacementSpec,
    segment_between,
)
from utils.topology import IslTopology, RoutingTable, route

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cluster:
    members: Tuple[str, ...]
    leader: Optional[str]

    @property
    def followers(self) -> Tuple[str, ...]:
        return tuple(m for m in self.members if m != self.leader)


@dataclass(frozen=True)
class ClusterPlan:
    clusters: Tuple[Cluster, ...]
    rule: ClusterRule
    target_size: int
    k_hops: int = 1

    def cluster_of(self, sat: str) -> Optional[Cluster]:
        for cluster in self.clusters:
            if sat in cluster.members:
                return cluster
        return None

    def leader_of(self, sat: str) -> Optional[str]:
        cluster = self.cluster_of(sat)
        return cluster.leader if cluster else None

    @property
    def leaders(self) -> List[str]:
        return [c.leader for c in self.clusters if c.leader is not None]

    def is_partition_of(self, satellites: Iterable[str]) -> bool:
        members = [m for c in self.clusters for m in c.members]
        return len(members) == len(set(members)) and set(members) == set(satellites)


def elect_leader(
    members: Sequence[str], residual: Optional[Mapping[str, float]] = None, failed: Iterable[str] = ()
) -> Optional[str]:
    """Member with the largest residual compute, ties to the lowest id."""
    failed = set(failed)
    eligible = sorted(m for m in members if m not in failed)
    if not eligible:
        return None
    residual = residual or {}
    # max keeps the first maximal element, so ties go to the lowest id
    return max(eligible, key=lambda m: residual.get(m, 0.0))


def _by_plane_groups(satellites: Sequence[str], target_size: int) -> List[List[str]]:
    planes: Dict[int, List[str]] = {}
    for sat in satellites:
        planes.setdefault(parse_sat_id(sat)[0], []).append(sat)
    ordered = sorted(planes)
    groups = []
    for i in range(0, len(ordered), target_size):
        groups.append(sorted(s for p in ordered[i:i + target_size] for s in planes[p]))
    return groups


def _by_k_hop(satellites: Sequence[str], graph: nx.Graph, k: int, size: int) -> List[List[str]]:
    remaining = sorted(satellites)
    unassigned = set(remaining)
    groups = []
    for seed in remaining:
        if seed not in unassigned:
            continue
        if seed in graph:
            near = nx.single_source_shortest_path_length(graph, seed, cutoff=k)
        else:
            near = {seed: 0}
        # nearest first, capped at size members
        nearest = sorted((d, n) for n, d in near.items() if n in unassigned)[:size]
        group = sorted(n for _, n in nearest)
        unassigned.difference_update(group)
        groups.append(group)
    return groups


def form_clusters(
    topology: IslTopology,
    rule: ClusterRule | str = ClusterRule.BY_PLANE_GROUPS,
    target_size: int = 3,
    residual: Optional[Mapping[str, float]] = None,
    satellites: Optional[Iterable[str]] = None,
    failed: Iterable[str] = (),
    k_hops: int = 1,
) -> ClusterPlan:
    """
    Partition the satellites and elect a leader per cluster.

    by_plane_groups groups target_size consecutive planes; by_k_hop grows clusters
    from the lowest-id unassigned satellite out to k_hops ISL hops and keeps the
    target_size nearest free satellites.
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    if k_hops < 0:
        raise ValueError("k_hops must be >= 0")
    rule = ClusterRule(rule)
    sats = sorted(satellites if satellites is not None else topology.positions)
    if rule == ClusterRule.BY_PLANE_GROUPS:
        groups = _by_plane_groups(sats, target_size)
    else:
        groups = _by_k_hop(sats, topology.isl_graph, k_hops, target_size)
    failed = list(failed)
    clusters = tuple(Cluster(tuple(g), elect_leader(g, residual, failed)) for g in groups if g)
    logger.debug("clusters formed", extra={"rule": rule.value, "clusters": len(clusters)})
    return ClusterPlan(clusters=clusters, rule=rule, target_size=target_size, k_hops=k_hops)


def hierarchy_links(
    plan: ClusterPlan, ground_nonrt: str, nonrt: NetworkFunction = NetworkFunction(FunctionKind.NON_RT_RIC)
) -> List[LogicalLink]:
    """A1 ground -> leader (relayed over ISLs) and leader -> follower with the follower loop bound."""
    links: List[LogicalLink] = []
    index = 0
    for i, cluster in enumerate(plan.clusters):
        if cluster.leader is None:
            continue
        leader = NetworkFunction(FunctionKind.CLUSTER_LEADER, i)
        links.append(
            LogicalLink(
                nonrt, leader, InterfaceClass.A1, segment_between(ground_nonrt, cluster.leader),
                ground_nonrt, cluster.leader, relay=True,
            )
        )
        for follower in cluster.followers:
            ric = NetworkFunction(FunctionKind.NEAR_RT_RIC, index)
            index += 1
            links.append(
                LogicalLink(
                    leader, ric, InterfaceClass.A1, segment_between(cluster.leader, follower),
                    cluster.leader, follower, loop_bound=FOLLOWER_LOOP_BOUND_S,
                )
            )
    return links


def check_hierarchy(
    plan: ClusterPlan,
    ground_nonrt: str,
    topology: IslTopology,
    table: RoutingTable,
    processing: float = 1e-3,
) -> List[RuleViolation]:
    """Leader reachability and the loop bound of every leader -> follower link."""
    violations = [
        RuleViolation("leader-unreachable", "cluster has no live leader", cluster.members[0])
        for cluster in plan.clusters
        if cluster.leader is None
    ]
    for link in hierarchy_links(plan, ground_nonrt):
        # relayed ground -> leader links are judged by the snapshot evaluator
        if link.loop_bound is None:
            continue
        leader, follower = link.from_node, link.to_node
        if follower not in topology.positions:
            continue
        try:
            path = route(table, topology, follower, leader)
        except NoRouteError as exc:
            violations.append(RuleViolation("leader-unreachable", exc.reason, follower))
            continue
        loop = 2.0 * path.total_delay + processing
        if loop > link.loop_bound:
            violations.append(
                RuleViolation("follower-loop-bound", f"loop {loop * 1e3:.3f} ms to {leader}", follower)
            )
    return violations



def apply_cluster_plan(spec: PlacementSpec, plan: ClusterPlan) -> PlacementSpec:
    """Replace leader assignments and DU cluster membership with those of plan."""
    kept = [a for a in spec.assignments if a.network_function.kind != FunctionKind.CLUSTER_LEADER]
    leaders = [
        Assignment(function=NetworkFunction(FunctionKind.CLUSTER_LEADER, i).label, node=c.leader)
        for i, c in enumerate(plan.clusters)
        if c.leader is not None
    ]
    du_hosts = {spec.node_of(f) for f in spec.functions(FunctionKind.DU)}
    cluster_of = {
        host: plan.leader_of(host) for host in sorted(du_hosts) if host and plan.leader_of(host) is not None
    }
    return spec.model_copy(update={"assignments": tuple(kept + leaders), "cluster_of": cluster_of})


def residual_compute(
    spec: Optional[PlacementSpec], satellites: Iterable[str], resources: ResourceModel
) -> Dict[str, float]:
    """Compute headroom per satellite, ignoring leader duties themselves."""
    residual = {}
    for sat in satellites:
        functions = spec.functions_on(sat) if spec is not None else []
        functions = [f for f in functions if f.kind != FunctionKind.CLUSTER_LEADER]
        residual[sat] = resources.compute_budget - node_resource_check(sat, functions, resources).compute_used
    return residual
