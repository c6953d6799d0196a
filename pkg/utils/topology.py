"""
ISL topology snapshots (+grid), feeder edges and predictive static routing.

Every satellite links to slot i +/- 1 in its own plane and to the same slot in the
neighbouring planes. Inter-plane links are cut at high latitude. Routing tables are
computed on a snapshot and reused until the next routing epoch.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from utils.errors import NoRouteError
from utils.orbital import (
    SPEED_OF_LIGHT_KM_S,
    ConstellationConfig,
    GroundSite,
    SatelliteState,
    SiteRole,
    elevation_deg,
    mask_runs,
    propagate_positions,
    sat_id,
    site_position,
    step_grid,
)

logger = logging.getLogger(__name__)

INTRA_PLANE = "intra_plane"
INTER_PLANE = "inter_plane"
FEEDER = "feeder"
TERRESTRIAL = "terrestrial"

_TIE_TOLERANCE_S = 1e-12


class TopologyPolicy(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    inter_plane_max_latitude_deg: float = Field(default=70.0, gt=0, le=90)
    max_isl_range_km: Optional[float] = Field(default=None, gt=0)
    feeder_capable: Optional[FrozenSet[str]] = None
    quality_range_km: float = Field(default=5000.0, gt=0)
    seam_degradation_start_deg: float = Field(default=60.0, ge=0, le=90)
    routing_epoch_s: float = Field(default=15.0, gt=0)


@dataclass(frozen=True)
class IslEdge:
    a: str
    b: str
    delay: float
    kind: str
    distance_km: float
    quality: float = 1.0


@dataclass(frozen=True)
class FeederEdge:
    sat_id: str
    site_id: str
    delay: float
    elevation_deg: float


@dataclass(frozen=True)
class IslTopology:
    time: float
    edges: Tuple[IslEdge, ...]
    feeder_edges: Tuple[FeederEdge, ...]
    positions: Dict[str, Tuple[float, float, float]] = field(default_factory=dict, compare=False)
    sites: Tuple[str, ...] = ()

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.positions))
        g.add_nodes_from(self.sites)
        for e in self.edges:
            g.add_edge(e.a, e.b, delay=e.delay, kind=e.kind, quality=e.quality)
        for f in self.feeder_edges:
            g.add_edge(f.sat_id, f.site_id, delay=f.delay, kind=FEEDER, quality=1.0)
        return g

    @cached_property
    def isl_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(sorted(self.positions))
        for e in self.edges:
            g.add_edge(e.a, e.b, delay=e.delay, kind=e.kind, quality=e.quality)
        return g

    def degree(self, node: str) -> int:
        return self.isl_graph.degree(node) if node in self.isl_graph else 0

    def feeders_of(self, sat: str) -> List[FeederEdge]:
        return sorted(
            (f for f in self.feeder_edges if f.sat_id == sat),
            key=lambda f: (-f.elevation_deg, f.site_id),
        )

    def feeder_edge(self, sat: str, site: str) -> Optional[FeederEdge]:
        for f in self.feeder_edges:
            if f.sat_id == sat and f.site_id == site:
                return f
        return None


@dataclass(frozen=True)
class Route:
    hops: Tuple[str, ...]
    edge_delays: Tuple[float, ...] = ()
    quality: float = 1.0

    @property
    def total_delay(self) -> float:
        return sum(self.edge_delays)

    @property
    def hop_count(self) -> int:
        return len(self.hops) - 1

    def extended(self, node: str, delay: float, quality: float = 1.0) -> "Route":
        return Route(self.hops + (node,), self.edge_delays + (delay,), self.quality * quality)


@dataclass(frozen=True)
class IslWindow:
    a: str
    b: str
    start: float
    end: float


def _candidate_pairs(
    num_planes: int, sats_per_plane: int, seam_shift: int
) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """Flat index pairs of every +grid neighbour relation, each listed once."""
    seen: Set[Tuple[int, int]] = set()
    a_idx: List[int] = []
    b_idx: List[int] = []
    kinds: List[str] = []

    def add(i: int, j: int, kind: str):
        key = (min(i, j), max(i, j))
        if i == j or key in seen:
            return
        seen.add(key)
        a_idx.append(key[0])
        b_idx.append(key[1])
        kinds.append(kind)

    for p in range(num_planes):
        for s in range(sats_per_plane):
            here = p * sats_per_plane + s
            if sats_per_plane > 1:
                add(here, p * sats_per_plane + (s + 1) % sats_per_plane, INTRA_PLANE)
            if num_planes > 1:
                if p == num_planes - 1:
                    q, t = 0, (s + seam_shift) % sats_per_plane
                else:
                    q, t = p + 1, s
                add(here, q * sats_per_plane + t, INTER_PLANE)
    return np.asarray(a_idx, dtype=int), np.asarray(b_idx, dtype=int), kinds


def _seam_shift(config: Optional[ConstellationConfig]) -> int:
    if config is None or not math.isclose(config.raan_spread_deg, 360.0):
        return 0
    return config.phasing_factor


def _edge_filter(
    flat: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    kinds: Sequence[str],
    policy: TopologyPolicy,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return (keep mask, distances, max |latitude| per pair, inter-plane mask)."""
    radius = np.linalg.norm(flat, axis=1)
    lat = np.degrees(np.arcsin(np.clip(flat[:, 2] / radius, -1.0, 1.0)))
    dist = np.linalg.norm(flat[a] - flat[b], axis=1)
    pair_lat = np.maximum(np.abs(lat[a]), np.abs(lat[b]))
    inter = np.asarray([k == INTER_PLANE for k in kinds], dtype=bool)
    keep = np.ones(len(a), dtype=bool)
    keep &= ~(inter & (pair_lat > policy.inter_plane_max_latitude_deg))
    if policy.max_isl_range_km is not None:
        keep &= dist <= policy.max_isl_range_km
    return keep, dist, pair_lat, inter


def _link_quality(dist: np.ndarray, pair_lat: np.ndarray, inter: np.ndarray, policy: TopologyPolicy) -> np.ndarray:
    quality = np.clip(1.0 - dist / policy.quality_range_km, 0.0, 1.0)
    span = max(policy.inter_plane_max_latitude_deg - policy.seam_degradation_start_deg, 1e-9)
    seam = np.clip((pair_lat - policy.seam_degradation_start_deg) / span, 0.0, 1.0)
    return np.where(inter, quality * (1.0 - 0.5 * seam), quality)


def build_topology(
    states: Sequence[SatelliteState],
    sites: Sequence[GroundSite],
    policy: Optional[TopologyPolicy] = None,
    *,
    config: Optional[ConstellationConfig] = None,
    failed: Iterable[str] = (),
) -> IslTopology:
    """Snapshot of ISL and feeder edges for states produced by one propagate() call."""
    policy = policy or TopologyPolicy()
    failed_set = set(failed)
    if not states:
        return IslTopology(time=0.0, edges=(), feeder_edges=(), sites=tuple(s.site_id for s in sites))

    t = states[0].time
    num_planes = max(st.plane for st in states) + 1
    sats_per_plane = max(st.slot for st in states) + 1
    if config is not None:
        num_planes, sats_per_plane = config.num_planes, config.sats_per_plane

    flat = np.zeros((num_planes * sats_per_plane, 3))
    present = np.zeros(num_planes * sats_per_plane, dtype=bool)
    for st in states:
        i = st.plane * sats_per_plane + st.slot
        flat[i] = st.position
        present[i] = st.sat_id not in failed_set
    ids = [sat_id(p, s) for p in range(num_planes) for s in range(sats_per_plane)]

    a, b, kinds = _candidate_pairs(num_planes, sats_per_plane, _seam_shift(config))
    edges: List[IslEdge] = []
    if len(a):
        keep, dist, pair_lat, inter = _edge_filter(flat, a, b, kinds, policy)
        keep &= present[a] & present[b]
        quality = _link_quality(dist, pair_lat, inter, policy)
        for k in np.flatnonzero(keep):
            edges.append(
                IslEdge(
                    a=ids[a[k]],
                    b=ids[b[k]],
                    delay=float(dist[k]) / SPEED_OF_LIGHT_KM_S,
                    kind=kinds[k],
                    distance_km=float(dist[k]),
                    quality=float(quality[k]),
                )
            )

    feeder_edges: List[FeederEdge] = []
    for site in sorted(sites, key=lambda s: s.site_id):
        if site.role != SiteRole.GATEWAY:
            continue
        elevations = elevation_deg(flat, site, t)
        ranges = np.linalg.norm(flat - site_position(site, t), axis=1)
        for i in np.flatnonzero((elevations >= site.min_elevation_deg) & present):
            sid = ids[i]
            if policy.feeder_capable is not None and sid not in policy.feeder_capable:
                continue
            feeder_edges.append(
                FeederEdge(
                    sat_id=sid,
                    site_id=site.site_id,
                    delay=float(ranges[i]) / SPEED_OF_LIGHT_KM_S,
                    elevation_deg=float(elevations[i]),
                )
            )

    positions = {ids[i]: tuple(float(v) for v in flat[i]) for i in np.flatnonzero(present)}
    logger.debug(
        "topology snapshot built",
        extra={"time_s": t, "isl_edges": len(edges), "feeder_edges": len(feeder_edges)},
    )
    return IslTopology(
        time=t,
        edges=tuple(edges),
        feeder_edges=tuple(sorted(feeder_edges, key=lambda f: (f.sat_id, f.site_id))),
        positions=positions,
        sites=tuple(sorted(s.site_id for s in sites)),
    )


class RoutingTable:
    """
    Delay-optimal next hops computed on one snapshot.

    Trees toward a destination are computed on first use and cached; the table is
    otherwise immutable and may be shared between threads.
    """

    def __init__(self, topology: IslTopology, valid_until: Optional[float] = None):
        self._graph = topology.graph
        self._sites = frozenset(topology.sites)
        self.valid_from = topology.time
        self.valid_until = valid_until if valid_until is not None else math.inf
        self._trees: Dict[str, Dict[str, Optional[str]]] = {}
        self._lock = threading.Lock()

    def covers(self, t: float) -> bool:
        return self.valid_from <= t < self.valid_until

    def _tree(self, dst: str) -> Dict[str, Optional[str]]:
        with self._lock:
            cached = self._trees.get(dst)
        if cached is not None:
            return cached
        tree = self._compute_tree(dst)
        with self._lock:
            self._trees.setdefault(dst, tree)
        return tree

    def _compute_tree(self, dst: str) -> Dict[str, Optional[str]]:
        if dst not in self._graph:
            return {}
        sites = self._sites

        def weight(u, v, data):
            # ground sites terminate paths, they never relay
            if u != dst and u in sites:
                return None
            return data["delay"]

        dist = nx.single_source_dijkstra_path_length(self._graph, dst, weight=weight)
        tree: Dict[str, Optional[str]] = {dst: None}
        for u in sorted(dist):
            if u == dst:
                continue
            for v in sorted(self._graph.neighbors(u)):
                if v not in dist or (v != dst and v in sites) or dist[v] >= dist[u]:
                    continue
                if abs(self._graph[u][v]["delay"] + dist[v] - dist[u]) <= _TIE_TOLERANCE_S:
                    tree[u] = v
                    break
        return tree

    def warm(self, dst: str) -> None:
        self._tree(dst)

    def next_hop(self, node: str, dst: str) -> Optional[str]:
        if node == dst:
            return None
        return self._tree(dst).get(node)

    def reachable(self, node: str, dst: str) -> bool:
        return node == dst or self.next_hop(node, dst) is not None

    def next_hop_mapping(self, destinations: Optional[Iterable[str]] = None) -> Dict[Tuple[str, str], str]:
        """Materialize (node, destination) -> next hop for the given destinations."""
        mapping: Dict[Tuple[str, str], str] = {}
        for dst in sorted(destinations if destinations is not None else self._graph.nodes):
            for node, hop in self._tree(dst).items():
                if hop is not None:
                    mapping[(node, dst)] = hop
        return mapping


def build_routing_tables(
    topology: IslTopology,
    epoch_s: Optional[float] = None,
    destinations: Iterable[str] = (),
) -> RoutingTable:
    table = RoutingTable(
        topology,
        valid_until=topology.time + epoch_s if epoch_s is not None else None,
    )
    for dst in destinations:
        table.warm(dst)
    return table


def route(table: RoutingTable, topology: IslTopology, src: str, dst: str) -> Route:
    """Follow the table's next hops, summing edge delays of the current snapshot."""
    if src == dst:
        return Route(hops=(src,))
    graph = topology.graph
    hops = [src]
    delays: List[float] = []
    quality = 1.0
    node = src
    for _ in range(graph.number_of_nodes() + 1):
        nxt = table.next_hop(node, dst)
        if nxt is None:
            raise NoRouteError(src, dst)
        if not graph.has_edge(node, nxt):
            raise NoRouteError(src, dst, reason=f"link {node}-{nxt} lost since routing epoch")
        data = graph[node][nxt]
        delays.append(data["delay"])
        quality *= data.get("quality", 1.0)
        hops.append(nxt)
        if nxt == dst:
            return Route(hops=tuple(hops), edge_delays=tuple(delays), quality=quality)
        if nxt in hops[:-1]:
            break
        node = nxt
    raise NoRouteError(src, dst, reason="routing loop")


def k_hop_neighborhood(topology: IslTopology, node: str, k: int) -> Set[str]:
    """All satellites within k ISL hops of node (node included)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    graph = topology.isl_graph
    if node not in graph:
        return {node}
    return set(nx.single_source_shortest_path_length(graph, node, cutoff=k))


def inter_plane_windows(
    config: ConstellationConfig,
    policy: Optional[TopologyPolicy],
    horizon: float,
    step: float,
    t0: float = 0.0,
) -> List[IslWindow]:
    """Windows during which each inter-plane pair keeps its link."""
    policy = policy or TopologyPolicy()
    times = step_grid(horizon, step, t0)
    a, b, kinds = _candidate_pairs(config.num_planes, config.sats_per_plane, _seam_shift(config))
    inter_idx = [k for k, kind in enumerate(kinds) if kind == INTER_PLANE]
    if not inter_idx:
        return []
    a, b = a[inter_idx], b[inter_idx]
    inter_kinds = [INTER_PLANE] * len(inter_idx)
    mask = np.empty((len(times), len(inter_idx)), dtype=bool)
    for row, t in enumerate(times):
        flat = propagate_positions(config, float(t)).reshape(-1, 3)
        mask[row] = _edge_filter(flat, a, b, inter_kinds, policy)[0]

    ids = config.satellite_ids()
    windows: List[IslWindow] = []
    for col in range(len(inter_idx)):
        for first, last in mask_runs(mask[:, col]):
            windows.append(IslWindow(ids[a[col]], ids[b[col]], float(times[first]), float(times[last])))
    return windows


def dump_edge_list(topology: IslTopology, path: str | Path) -> Path:
    """Write one edge per line: a b kind delay_us."""
    path = Path(path)
    lines = [f"{e.a} {e.b} {e.kind} {e.delay * 1e6:.3f}" for e in topology.edges]
    lines += [f"{f.sat_id} {f.site_id} {FEEDER} {f.delay * 1e6:.3f}" for f in topology.feeder_edges]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path
