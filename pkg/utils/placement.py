"""
Split options, RIC extensions and the logical links each placement needs.

A PlacementSpec maps network functions (kind + instance) to nodes: satellites
(`sat-PPP-SSS`) or ground sites. Functions that belong to one gNB carry a cell index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, field_validator

from utils.dimensioning import InterfaceClass
from utils.errors import InsufficientNodesError, PlacementError, RuleViolation
from utils.orbital import GroundSite, SatelliteState, SiteRole, is_satellite
from utils.topology import build_topology, k_hop_neighborhood

logger = logging.getLogger(__name__)

FOLLOWER_LOOP_BOUND_S = 0.100


class FunctionKind(str, Enum):
    RU = "RU"
    DU = "DU"
    CU_CP = "CU_CP"
    CU_UP = "CU_UP"
    UPF = "UPF"
    SEC = "SEC"
    NEAR_RT_RIC = "NearRT_RIC"
    NEAR_RT_RIC_DU_PART = "NearRT_RIC_DU_part"
    NEAR_RT_RIC_CU_PART = "NearRT_RIC_CU_part"
    NON_RT_RIC = "NonRT_RIC"
    CLUSTER_LEADER = "NonRT_RIC_cluster_leader"
    SMO = "SMO"
    CORE_CP = "Core_CP"
    DATA_NETWORK = "DataNetwork"


class SplitOption(str, Enum):
    OPT_1A = "1a"
    OPT_1B = "1b"
    OPT_2A = "2a"
    OPT_2B_RU_SEPARATE = "2b_ru_separate"
    OPT_2B_CU_SEPARATE = "2b_cu_separate"
    OPT_3A = "3a"
    OPT_3B = "3b"

    @property
    def cu_on_ground(self) -> bool:
        return self in GROUND_CU_SPLITS

    @property
    def upf_in_space(self) -> bool:
        return self in (SplitOption.OPT_3A, SplitOption.OPT_3B)


class RicExtension(str, Enum):
    EXT1 = "ext1"
    EXT2 = "ext2"
    EXT3 = "ext3"
    NONE = "none"


class Segment(str, Enum):
    LOCAL = "local"
    FEEDER = "feeder"
    ISL_PATH = "isl_path"
    TERRESTRIAL = "terrestrial"


class ClusterRule(str, Enum):
    BY_PLANE_GROUPS = "by_plane_groups"
    BY_K_HOP = "by_k_hop"


GROUND_CU_SPLITS = frozenset({SplitOption.OPT_1A, SplitOption.OPT_1B})
SPACE_CU_SPLITS = frozenset(set(SplitOption) - GROUND_CU_SPLITS)

COMPATIBILITY: Dict[RicExtension, FrozenSet[SplitOption]] = {
    RicExtension.NONE: frozenset(SplitOption),
    RicExtension.EXT1: GROUND_CU_SPLITS,
    RicExtension.EXT2: SPACE_CU_SPLITS,
    RicExtension.EXT3: SPACE_CU_SPLITS,
}

# Extensions the summary table lists next to each option family as written
SUMMARY_TABLE_LISTING: Dict[str, FrozenSet[RicExtension]] = {
    "1a/1b": frozenset({RicExtension.EXT1, RicExtension.EXT2, RicExtension.EXT3}),
    "2a/2b": frozenset({RicExtension.EXT1, RicExtension.EXT2, RicExtension.EXT3}),
    "3a/3b": frozenset({RicExtension.EXT1, RicExtension.EXT2, RicExtension.EXT3}),
}


@dataclass(frozen=True, order=True)
class NetworkFunction:
    kind: FunctionKind
    instance_id: int = 0

    @property
    def label(self) -> str:
        return f"{self.kind.value}#{self.instance_id}"

    @classmethod
    def parse(cls, label: str) -> "NetworkFunction":
        kind, _, instance = label.partition("#")
        return cls(FunctionKind(kind), int(instance or 0))

    def __str__(self) -> str:
        return self.label


class Assignment(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    function: str
    node: str = Field(min_length=1)
    cell: Optional[int] = Field(default=None, ge=0)

    @field_validator("function")
    @classmethod
    def _known_function(cls, value: str) -> str:
        try:
            NetworkFunction.parse(value)
        except ValueError as exc:
            raise ValueError(f"unknown network function '{value}'") from exc
        return value

    @property
    def network_function(self) -> NetworkFunction:
        return NetworkFunction.parse(self.function)


class ClusterPlanSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rule: ClusterRule = ClusterRule.BY_PLANE_GROUPS
    target_size: int = Field(default=3, ge=1)
    k_hops: int = Field(default=1, ge=0)


class PlacementSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    split: SplitOption
    extension: RicExtension = RicExtension.NONE
    assignments: Tuple[Assignment, ...] = ()
    cu_split: bool = False
    cluster_plan: Optional[ClusterPlanSpec] = None
    cluster_of: Dict[str, str] = Field(default_factory=dict)
    e2_serving: Dict[str, str] = Field(default_factory=dict)

    def node_of(self, function: NetworkFunction | str) -> Optional[str]:
        label = function if isinstance(function, str) else function.label
        for a in self.assignments:
            if a.function == label:
                return a.node
        return None

    def functions(self, kind: Optional[FunctionKind] = None) -> List[NetworkFunction]:
        out = [a.network_function for a in self.assignments]
        if kind is not None:
            out = [f for f in out if f.kind == kind]
        return sorted(out)

    def functions_on(self, node: str) -> List[NetworkFunction]:
        return sorted(a.network_function for a in self.assignments if a.node == node)

    def cell_functions(self, cell: int, kind: FunctionKind) -> List[NetworkFunction]:
        return sorted(
            a.network_function
            for a in self.assignments
            if a.cell == cell and a.network_function.kind == kind
        )

    def cell_of(self, function: NetworkFunction | str) -> Optional[int]:
        label = function if isinstance(function, str) else function.label
        for a in self.assignments:
            if a.function == label:
                return a.cell
        return None

    @property
    def cells(self) -> List[int]:
        return sorted({a.cell for a in self.assignments if a.cell is not None})

    @property
    def nodes(self) -> List[str]:
        return sorted({a.node for a in self.assignments})

    @property
    def satellites(self) -> List[str]:
        return [n for n in self.nodes if is_satellite(n)]


@dataclass(frozen=True)
class LogicalLink:
    from_function: NetworkFunction
    to_function: NetworkFunction
    interface_class: InterfaceClass
    segment: Segment
    from_node: str
    to_node: str
    relay: bool = False
    loop_bound: Optional[float] = None
    path: Optional[object] = field(default=None, compare=False)

    @property
    def link_id(self) -> str:
        return f"{self.interface_class.value}:{self.from_function.label}->{self.to_function.label}"

    @property
    def space_node(self) -> Optional[str]:
        if is_satellite(self.from_node):
            return self.from_node
        if is_satellite(self.to_node):
            return self.to_node
        return None

    @property
    def ground_node(self) -> Optional[str]:
        if not is_satellite(self.from_node):
            return self.from_node
        if not is_satellite(self.to_node):
            return self.to_node
        return None

    def with_path(self, path) -> "LogicalLink":
        return replace(self, path=path)


@dataclass
class ValidationResult:
    violations: List[RuleViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]

    def add(self, rule: str, detail: str, subject: Optional[str] = None) -> None:
        self.violations.append(RuleViolation(rule, detail, subject))

    def raise_for_violations(self) -> None:
        if self.violations:
            raise PlacementError("placement is inconsistent", self.violations)


@dataclass(frozen=True)
class OptionProfile:
    split: SplitOption
    extension: RicExtension
    feeder_carries: FrozenSet[str]
    requires_dual_feeder: bool
    new_fronthaul_needed: bool
    onboard_compute_class: str
    local_breakout: bool
    space_functions: Tuple[str, ...]
    ground_functions: Tuple[str, ...]
    pros: Tuple[str, ...]
    cons: Tuple[str, ...]


def segment_between(a: str, b: str) -> Segment:
    if a == b:
        return Segment.LOCAL
    space_a, space_b = is_satellite(a), is_satellite(b)
    if space_a and space_b:
        return Segment.ISL_PATH
    if not space_a and not space_b:
        return Segment.TERRESTRIAL
    return Segment.FEEDER


def compatibility_matrix() -> Dict[str, Dict[str, bool]]:
    return {
        split.value: {ext.value: split in COMPATIBILITY[ext] for ext in RicExtension}
        for split in SplitOption
    }


def _compat_rule(ext: RicExtension) -> str:
    if ext == RicExtension.EXT1:
        return "ext1-requires-ground-cu"
    return f"{ext.value}-requires-space-cu"


def summary_family(split: SplitOption) -> str:
    return next(family for family in SUMMARY_TABLE_LISTING if split.value[0] == family[0])


def summary_table_disagreements() -> List[Tuple[str, str]]:
    """(split, extension) pairs the summary listing shows but the compatibility rules reject."""
    return sorted(
        (split.value, ext.value)
        for split in SplitOption
        for ext in SUMMARY_TABLE_LISTING[summary_family(split)]
        if split not in COMPATIBILITY[ext]
    )


def check_compatibility(split: SplitOption, ext: RicExtension) -> Optional[RuleViolation]:
    if split in COMPATIBILITY[ext]:
        return None
    where = "ground" if ext == RicExtension.EXT1 else "space"
    detail = f"{ext.value} needs the CU on the {where}; option {split.value} does not place it there"
    family = summary_family(split)
    if ext in SUMMARY_TABLE_LISTING[family]:
        detail += f" (the option summary lists {ext.value} next to {family}; the detailed rule applies)"
    return RuleViolation(_compat_rule(ext), detail)


_PROS_CONS = {
    "1": (
        ("Lightweight satellite", "Full reuse of ground infrastructure", "Lower Capex"),
        (
            "F1 interface needs to be implemented in feeder link",
            "Satellite must be able to maintain 2 feeder links (for handover)",
            "Need to support variable latency in the feeder link and seamless handovers",
            "High signalling load for CU handover",
            "In option 1b, new fronthaul technology is required",
            "High latency",
            "No local control",
        ),
    ),
    "2": (
        (
            "Reduce the dependence on earth-based controller and scheduler",
            "Remove the stringent timing requirements",
            "Reduce signaling burden",
            "Seamless UE handovers at gNodeB level",
            "Good compromise between latency and arch. complexity",
            "Easy to implement from protocol and hardware stand point",
        ),
        (
            "Higher burden on the satellite on board processing unit",
            "Quasi-continuous feeder link visibility",
            "No caching capabilities (increased latency and higher load feeder links)",
        ),
    ),
    "3": (
        (
            "Reduced application latency",
            "Simplified interface management",
            "Elimination of feeder-link dependence",
            "Self-contained edge computing node in space",
            "Compatible with mesh connectivity through the N9 interface at the ISLs",
        ),
        (
            "High computational depends on onboard hardware",
            "Higher payload complexity and power consumption",
            "Interruptions on the N9 path or satellite handovers affects the continuity of the user plane",
        ),
    ),
}

_EXTENSION_FEEDER = {
    RicExtension.NONE: frozenset(),
    RicExtension.EXT1: frozenset({"inter_RIC", "A1"}),
    RicExtension.EXT2: frozenset({"A1"}),
    RicExtension.EXT3: frozenset({"A1", "O1"}),
}

_EXTENSION_SPACE = {
    RicExtension.NONE: (),
    RicExtension.EXT1: ("NearRT_RIC_DU_part",),
    RicExtension.EXT2: ("NearRT_RIC",),
    RicExtension.EXT3: ("NearRT_RIC", "NonRT_RIC_cluster_leader"),
}

_EXTENSION_GROUND = {
    RicExtension.NONE: ("NearRT_RIC", "NonRT_RIC", "SMO"),
    RicExtension.EXT1: ("NearRT_RIC_CU_part", "NonRT_RIC", "SMO"),
    RicExtension.EXT2: ("NonRT_RIC", "SMO"),
    RicExtension.EXT3: ("NonRT_RIC", "SMO"),
}


def option_profile(split: SplitOption | str, ext: RicExtension | str = RicExtension.NONE) -> OptionProfile:
    split, ext = SplitOption(split), RicExtension(ext)
    problem = check_compatibility(split, ext)
    if problem:
        raise PlacementError("incompatible option/extension pair", [problem])

    family = split.value[0]
    pros, cons = _PROS_CONS[family]
    if family == "1":
        feeder = {"F1"}
        space = ["RU", "DU"]
        ground = ["CU_CP", "CU_UP", "UPF", "Core_CP"]
        compute = "light"
    elif family == "2":
        feeder = {"N2", "N3"}
        space = ["RU", "DU", "CU_CP", "CU_UP"]
        ground = ["UPF", "Core_CP"]
        compute = "gnb"
    else:
        feeder = {"N2", "N4"}
        space = ["RU", "DU", "CU_CP", "CU_UP", "UPF", "SEC"]
        ground = ["Core_CP"]
        compute = "gnb_upf"
    if ext == RicExtension.NONE and family != "1":
        feeder.add("E2")

    return OptionProfile(
        split=split,
        extension=ext,
        feeder_carries=frozenset(feeder) | _EXTENSION_FEEDER[ext],
        requires_dual_feeder=family == "1",
        new_fronthaul_needed=split in (SplitOption.OPT_1B, SplitOption.OPT_2B_RU_SEPARATE),
        onboard_compute_class=compute,
        local_breakout=family == "3",
        space_functions=tuple(space) + _EXTENSION_SPACE[ext],
        ground_functions=tuple(ground) + _EXTENSION_GROUND[ext],
        pros=pros,
        cons=cons,
    )


_REQUIRED_KINDS = (
    FunctionKind.RU, FunctionKind.DU, FunctionKind.CU_CP, FunctionKind.CU_UP,
    FunctionKind.UPF, FunctionKind.CORE_CP, FunctionKind.SMO, FunctionKind.NON_RT_RIC,
)

_REQUIRED_RIC_KINDS = {
    RicExtension.NONE: (FunctionKind.NEAR_RT_RIC,),
    RicExtension.EXT1: (FunctionKind.NEAR_RT_RIC_DU_PART, FunctionKind.NEAR_RT_RIC_CU_PART),
    RicExtension.EXT2: (FunctionKind.NEAR_RT_RIC,),
    RicExtension.EXT3: (FunctionKind.NEAR_RT_RIC, FunctionKind.CLUSTER_LEADER),
}

_GROUND_ONLY = (FunctionKind.SMO, FunctionKind.NON_RT_RIC, FunctionKind.CORE_CP, FunctionKind.DATA_NETWORK)


def validate_placement(
    spec: PlacementSpec,
    *,
    topology=None,
    sites: Optional[Sequence[GroundSite]] = None,
    satellites: Optional[Iterable[str]] = None,
) -> ValidationResult:
    """Check a placement against the option rules; violations are returned, not raised."""
    result = ValidationResult()
    problem = check_compatibility(spec.split, spec.extension)
    if problem:
        result.violations.append(problem)

    labels = [a.function for a in spec.assignments]
    for label in sorted({x for x in labels if labels.count(x) > 1}):
        result.add("duplicate-function", "function assigned more than once", label)

    kinds_present = {a.network_function.kind for a in spec.assignments}
    if spec.extension != RicExtension.EXT1 and kinds_present & {
        FunctionKind.NEAR_RT_RIC_DU_PART, FunctionKind.NEAR_RT_RIC_CU_PART
    }:
        result.add("ric-parts-ext1-only", "near-RT RIC parts exist only under ext1")
    if spec.extension != RicExtension.EXT3 and FunctionKind.CLUSTER_LEADER in kinds_present:
        result.add("cluster-leader-ext3-only", "cluster leaders exist only under ext3")
    for kind in _REQUIRED_KINDS + _REQUIRED_RIC_KINDS[spec.extension]:
        if kind not in kinds_present:
            result.add("missing-function", f"no {kind.value} assigned", kind.value)

    site_roles = {s.site_id: s.role for s in sites} if sites is not None else None
    known_sats = set(satellites) if satellites is not None else None
    for a in spec.assignments:
        if is_satellite(a.node):
            if known_sats is not None and a.node not in known_sats:
                result.add("unknown-node", "satellite not in constellation", a.node)
        elif site_roles is not None and a.node not in site_roles:
            result.add("unknown-node", "site not declared", a.node)
        if a.network_function.kind in _GROUND_ONLY and is_satellite(a.node):
            result.add(f"{a.network_function.kind.value.lower()}-ground", "function must stay on the ground", a.function)

    for cell in spec.cells:
        _validate_cell(spec, cell, result, site_roles, topology)
    _validate_extension(spec, result)
    return result


def _single(spec: PlacementSpec, cell: int, kind: FunctionKind) -> Optional[str]:
    found = spec.cell_functions(cell, kind)
    return spec.node_of(found[0]) if found else None


def _validate_cell(spec, cell, result: ValidationResult, site_roles, topology) -> None:
    split = spec.split
    tag = f"cell {cell}"
    rus = [spec.node_of(f) for f in spec.cell_functions(cell, FunctionKind.RU)]
    du = _single(spec, cell, FunctionKind.DU)
    cu_cp = _single(spec, cell, FunctionKind.CU_CP)
    cu_up = _single(spec, cell, FunctionKind.CU_UP)
    upf = _single(spec, cell, FunctionKind.UPF)
    if du is None or cu_cp is None or not rus:
        result.add("incomplete-cell", "cell needs RU, DU and CU", tag)
        return

    if not is_satellite(du):
        result.add("du-space", "DU must be on a satellite", tag)
    if any(not is_satellite(r) for r in rus):
        result.add("ru-space", "RU must be on a satellite", tag)
    if cu_up is not None and not spec.cu_split and cu_up != cu_cp:
        result.add("cu-colocated", "CU_CP and CU_UP must share a node unless cu_split is set", tag)

    if split.cu_on_ground:
        if is_satellite(cu_cp) or (cu_up is not None and is_satellite(cu_up)):
            result.add(f"{split.value}-cu-ground", "CU must be on the ground for this option", tag)
        elif site_roles is not None and site_roles.get(cu_cp) not in (SiteRole.GATEWAY, SiteRole.CORE):
            result.add("cu-site-role", "ground CU must sit at a gateway or core site", tag)
    elif not is_satellite(cu_cp):
        result.add(f"{split.value}-cu-space", "CU must be on a satellite for this option", tag)

    if split.upf_in_space:
        if upf is None or not is_satellite(upf):
            result.add(f"{split.value}-upf-space", "UPF must be on a satellite for this option", tag)
    elif upf is not None and is_satellite(upf):
        result.add(f"{split.value}-upf-ground", "UPF must stay on the ground for this option", tag)

    if split == SplitOption.OPT_1A and any(r != du for r in rus):
        result.add("1a-ru-du-colocated", "RU and DU share one satellite", tag)
    elif split == SplitOption.OPT_1B:
        if len(rus) != 4:
            result.add("1b-ru-count", f"DU serves {len(rus)} RUs, expected 4", tag)
        if len(set(rus)) != len(rus) or du in rus:
            result.add("1b-ru-distinct-sats", "RUs must be on distinct satellites other than the DU's", tag)
        elif topology is not None and du in topology.isl_graph:
            neighbours = set(topology.isl_graph.neighbors(du))
            if any(r not in neighbours for r in rus):
                result.add("1b-ru-neighbors", "RUs must be ISL neighbours of the DU satellite", tag)
    elif split in (SplitOption.OPT_2A, SplitOption.OPT_3A):
        group = set(rus) | {du, cu_cp} | ({cu_up} if cu_up else set())
        if split == SplitOption.OPT_3A:
            group |= {upf} if upf else set()
        if len(group) != 1:
            result.add(f"{split.value}-colocated", "all functions must share one satellite", tag)
    elif split == SplitOption.OPT_2B_RU_SEPARATE:
        if any(r == du for r in rus) or cu_cp != du:
            result.add("2b-ru-separate", "RU on its own satellite, DU and CU together", tag)
    elif split == SplitOption.OPT_2B_CU_SEPARATE:
        if any(r != du for r in rus) or cu_cp == du:
            result.add("2b-cu-separate", "RU and DU together, CU on another satellite", tag)
    elif split == SplitOption.OPT_3B:
        if any(r != du for r in rus) or cu_cp != du:
            result.add("3b-gnb-colocated", "RU, DU and CU share one satellite", tag)
        if upf is not None and upf == du:
            result.add("3b-distinct-sats", "UPF must be on a different satellite than the gNB", tag)


def _validate_extension(spec: PlacementSpec, result: ValidationResult) -> None:
    ext = spec.extension
    if ext == RicExtension.EXT1:
        for cell in spec.cells:
            du = _single(spec, cell, FunctionKind.DU)
            du_part = _single(spec, cell, FunctionKind.NEAR_RT_RIC_DU_PART)
            cu_part = _single(spec, cell, FunctionKind.NEAR_RT_RIC_CU_PART)
            if du_part is not None and du_part != du:
                result.add("ext1-du-part-colocated", "DU part of the near-RT RIC sits with the DU", f"cell {cell}")
            if cu_part is not None and is_satellite(cu_part):
                result.add("ext1-cu-part-ground", "CU part of the near-RT RIC stays on the ground", f"cell {cell}")
    elif ext == RicExtension.EXT2:
        for f in spec.functions(FunctionKind.NEAR_RT_RIC):
            if not is_satellite(spec.node_of(f)):
                result.add("ext2-ric-space", "near-RT RIC instances are hosted in space", f.label)
        rics = {f.label for f in spec.functions(FunctionKind.NEAR_RT_RIC)}
        for node, ric in spec.e2_serving.items():
            if ric not in rics:
                result.add("ext2-serving-ric", f"serving RIC {ric} is not assigned", node)
    elif ext == RicExtension.EXT3:
        leaders = {spec.node_of(f) for f in spec.functions(FunctionKind.CLUSTER_LEADER)}
        for cell in spec.cells:
            du = _single(spec, cell, FunctionKind.DU)
            ric = _single(spec, cell, FunctionKind.NEAR_RT_RIC)
            if ric != du:
                result.add("ext3-ric-colocated", "near-RT RIC sits with the DU under ext3", f"cell {cell}")
            if du is not None and spec.cluster_of.get(du) not in leaders:
                result.add("ext3-cluster-membership", "DU satellite has no cluster leader", f"cell {cell}")
        if any(not is_satellite(n) for n in leaders if n):
            result.add("ext3-leader-space", "cluster leaders are satellites")


def _shared(spec: PlacementSpec, kind: FunctionKind) -> List[NetworkFunction]:
    return [f for f in spec.functions(kind) if spec.cell_of(f) is None]


def derive_logical_links(spec: PlacementSpec) -> List[LogicalLink]:
    """Every interface instance the placement needs, tagged with its segment."""
    links: List[LogicalLink] = []
    seen: Set[Tuple[str, str, str]] = set()

    def link(src: NetworkFunction, dst: NetworkFunction, cls: InterfaceClass, relay=False, loop_bound=None):
        a, b = spec.node_of(src), spec.node_of(dst)
        if a is None or b is None:
            raise PlacementError(f"cannot derive {cls.value}: {src.label} or {dst.label} unassigned")
        key = (cls.value, src.label, dst.label)
        if key in seen:
            return
        seen.add(key)
        links.append(
            LogicalLink(src, dst, cls, segment_between(a, b), a, b, relay=relay, loop_bound=loop_bound)
        )

    def one(cell: int, kind: FunctionKind) -> Optional[NetworkFunction]:
        found = spec.cell_functions(cell, kind)
        return found[0] if found else None

    core = next(iter(spec.functions(FunctionKind.CORE_CP)), None)
    smo = next(iter(spec.functions(FunctionKind.SMO)), None)
    nonrt = next(iter(spec.functions(FunctionKind.NON_RT_RIC)), None)
    dn = next(iter(spec.functions(FunctionKind.DATA_NETWORK)), None)
    shared_upf = next(iter(_shared(spec, FunctionKind.UPF)), None)
    shared_ric = _shared(spec, FunctionKind.NEAR_RT_RIC)
    ext = spec.extension

    for cell in spec.cells:
        du = one(cell, FunctionKind.DU)
        cu_cp = one(cell, FunctionKind.CU_CP)
        cu_up = one(cell, FunctionKind.CU_UP) or cu_cp
        upf = one(cell, FunctionKind.UPF) or shared_upf

        for ru in spec.cell_functions(cell, FunctionKind.RU):
            link(ru, du, InterfaceClass.OFH)
        link(du, cu_cp, InterfaceClass.F1_C)
        link(du, cu_up, InterfaceClass.F1_U)
        if spec.cu_split and cu_up != cu_cp:
            link(cu_cp, cu_up, InterfaceClass.E1)
        if core is not None:
            link(cu_cp, core, InterfaceClass.N2)
        if upf is not None:
            link(cu_up, upf, InterfaceClass.N3)

        e2_nodes = [du, cu_cp]
        if ext == RicExtension.NONE and shared_ric:
            for node in e2_nodes:
                link(node, shared_ric[0], InterfaceClass.E2)
        elif ext == RicExtension.EXT1:
            du_part = one(cell, FunctionKind.NEAR_RT_RIC_DU_PART)
            cu_part = one(cell, FunctionKind.NEAR_RT_RIC_CU_PART)
            link(du, du_part, InterfaceClass.E2)
            link(cu_cp, cu_part, InterfaceClass.E2)
            link(du_part, cu_part, InterfaceClass.INTER_RIC)
        elif ext == RicExtension.EXT2 and shared_ric:
            for node in e2_nodes:
                serving = spec.e2_serving.get(node.label, shared_ric[0].label)
                link(node, NetworkFunction.parse(serving), InterfaceClass.E2)
        elif ext == RicExtension.EXT3:
            ric = one(cell, FunctionKind.NEAR_RT_RIC)
            for node in e2_nodes:
                link(node, ric, InterfaceClass.E2)

        if smo is not None:
            link(smo, du, InterfaceClass.O1)
            link(smo, cu_cp, InterfaceClass.O1)
            if spec.cu_split and cu_up != cu_cp:
                link(smo, cu_up, InterfaceClass.O1)

    for upf in spec.functions(FunctionKind.UPF):
        if core is not None:
            link(core, upf, InterfaceClass.N4)
        cell = spec.cell_of(upf)
        sec = one(cell, FunctionKind.SEC) if cell is not None else None
        if sec is not None:
            link(upf, sec, InterfaceClass.N6)
        elif dn is not None:
            link(upf, dn, InterfaceClass.N6)
    for a, b in combinations(spec.functions(FunctionKind.UPF), 2):
        link(a, b, InterfaceClass.N9)

    _derive_ric_links(spec, link, one, nonrt, smo)
    return links


def _derive_ric_links(spec: PlacementSpec, link, one, nonrt, smo) -> None:
    ext = spec.extension
    if nonrt is None:
        return
    if ext == RicExtension.NONE:
        for ric in _shared(spec, FunctionKind.NEAR_RT_RIC):
            link(nonrt, ric, InterfaceClass.A1)
            if smo is not None:
                link(smo, ric, InterfaceClass.O1)
    elif ext == RicExtension.EXT1:
        for cell in spec.cells:
            for kind in (FunctionKind.NEAR_RT_RIC_CU_PART, FunctionKind.NEAR_RT_RIC_DU_PART):
                part = one(cell, kind)
                link(nonrt, part, InterfaceClass.A1)
                if smo is not None:
                    link(smo, part, InterfaceClass.O1)
    elif ext == RicExtension.EXT2:
        rics = _shared(spec, FunctionKind.NEAR_RT_RIC)
        for ric in rics:
            link(nonrt, ric, InterfaceClass.A1, relay=True)
            if smo is not None:
                link(smo, ric, InterfaceClass.O1, relay=True)
        for a, b in zip(rics, rics[1:]):
            link(a, b, InterfaceClass.INTER_RIC)
    elif ext == RicExtension.EXT3:
        leaders = {spec.node_of(f): f for f in spec.functions(FunctionKind.CLUSTER_LEADER)}
        for leader in leaders.values():
            link(nonrt, leader, InterfaceClass.A1, relay=True)
            if smo is not None:
                link(smo, leader, InterfaceClass.O1, relay=True)
        for cell in spec.cells:
            ric = one(cell, FunctionKind.NEAR_RT_RIC)
            host = spec.node_of(ric)
            leader = leaders.get(spec.cluster_of.get(host))
            if leader is not None:
                link(leader, ric, InterfaceClass.A1, loop_bound=FOLLOWER_LOOP_BOUND_S)


def classify_ue_handover(spec: PlacementSpec, source_sat: str, target_sat: str) -> str:
    """intra_cu when both satellites' DUs attach to the same CU node, else inter_cu."""

    def cu_node(sat: str) -> str:
        for du in spec.functions(FunctionKind.DU):
            if spec.node_of(du) == sat:
                cell = spec.cell_of(du)
                cu = spec.cell_functions(cell, FunctionKind.CU_CP)
                if cu:
                    return spec.node_of(cu[0])
        raise ValueError(f"satellite {sat} hosts no DU")

    return "intra_cu" if cu_node(source_sat) == cu_node(target_sat) else "inter_cu"


class PlacementTemplate(BaseModel):
    """Option/extension choice plus the knobs used to concretize it onto node ids."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    split: SplitOption
    extension: RicExtension = RicExtension.NONE
    cells: int = Field(default=1, ge=1)
    cu_split: bool = False
    cu_hops: int = Field(default=1, ge=1)
    ric_count: int = Field(default=1, ge=1)
    ric_hop_radius: int = Field(default=2, ge=0)
    cluster_rule: ClusterRule = ClusterRule.BY_PLANE_GROUPS
    cluster_size: int = Field(default=3, ge=1)
    cluster_hops: int = Field(default=1, ge=0)
    with_sec: bool = True


def _first_site(sites: Sequence[GroundSite], *roles: SiteRole) -> Optional[str]:
    for role in roles:
        for site in sorted(sites, key=lambda s: s.site_id):
            if site.role == role:
                return site.site_id
    return None


class _Allocator:
    """Lowest-id-first satellite picker that never reuses a host across cells."""

    def __init__(self, sats: Sequence[str], topology):
        self.sats = sorted(sats)
        self.topology = topology
        self.feeder_sats = sorted({f.sat_id for f in topology.feeder_edges}) if topology else []
        self.used: Set[str] = set()

    def preferred(self) -> List[str]:
        rest = [s for s in self.sats if s not in set(self.feeder_sats)]
        return [s for s in self.feeder_sats + rest if s not in self.used]

    def neighbours(self, sat: str) -> List[str]:
        graph = self.topology.isl_graph
        return sorted(n for n in graph.neighbors(sat) if n not in self.used) if sat in graph else []

    def at_hops(self, sat: str, hops: int) -> List[str]:
        graph = self.topology.isl_graph
        if sat not in graph:
            return []
        dist = nx.single_source_shortest_path_length(graph, sat, cutoff=hops)
        return sorted(n for n, d in dist.items() if d == hops and n not in self.used)

    def take(self, *sats: str) -> None:
        self.used.update(sats)


def assign_functions(
    template: PlacementTemplate,
    states: Sequence[SatelliteState],
    sites: Sequence[GroundSite],
    topology=None,
    cluster_plan=None,
) -> PlacementSpec:
    """Concretize a template onto satellites and sites, lowest id first."""
    problem = check_compatibility(template.split, template.extension)
    if problem:
        raise PlacementError("incompatible template", [problem])
    if topology is None:
        topology = build_topology(states, sites)
    if not states:
        raise InsufficientNodesError("no satellites to host the gNB")

    split, ext = template.split, template.extension
    gateways = sorted(s.site_id for s in sites if s.role == SiteRole.GATEWAY)
    core = _first_site(sites, SiteRole.CORE, SiteRole.GATEWAY)
    smo = _first_site(sites, SiteRole.SMO, SiteRole.CORE, SiteRole.GATEWAY)
    dn = _first_site(sites, SiteRole.DATA_NETWORK, SiteRole.CORE, SiteRole.GATEWAY)
    if split.cu_on_ground and not gateways:
        raise InsufficientNodesError(f"option {split.value} needs a gateway for its ground CU")
    if core is None:
        raise InsufficientNodesError("no ground site for the core network")

    alloc = _Allocator([st.sat_id for st in states], topology)
    out: List[Assignment] = []

    def put(kind: FunctionKind, instance: int, node: str, cell: Optional[int] = None):
        out.append(Assignment(function=NetworkFunction(kind, instance).label, node=node, cell=cell))

    def serving_gateway(sat: str) -> str:
        feeders = topology.feeders_of(sat)
        return feeders[0].site_id if feeders else gateways[0]

    du_hosts: List[str] = []
    for cell in range(template.cells):
        candidates = alloc.preferred()
        if split == SplitOption.OPT_1B:
            candidates = [s for s in candidates if len(alloc.neighbours(s)) >= 4]
        if not candidates:
            raise InsufficientNodesError(f"no satellite left for cell {cell} of option {split.value}")
        host = candidates[0]
        alloc.take(host)
        du_hosts.append(host)
        put(FunctionKind.DU, cell, host, cell)

        if split == SplitOption.OPT_1B:
            rus = alloc.neighbours(host)[:4]
            alloc.take(*rus)
            for k, ru in enumerate(rus):
                put(FunctionKind.RU, cell * 4 + k, ru, cell)
        elif split == SplitOption.OPT_2B_RU_SEPARATE:
            ru_hosts = alloc.neighbours(host)
            if not ru_hosts:
                raise InsufficientNodesError(f"no ISL neighbour free for the RU of cell {cell}")
            alloc.take(ru_hosts[0])
            put(FunctionKind.RU, cell, ru_hosts[0], cell)
        else:
            put(FunctionKind.RU, cell, host, cell)

        if split.cu_on_ground:
            cu_node = serving_gateway(host)
        elif split == SplitOption.OPT_2B_CU_SEPARATE:
            far = alloc.at_hops(host, template.cu_hops)
            if not far:
                raise InsufficientNodesError(f"no satellite {template.cu_hops} hops from {host}")
            cu_node = far[0]
            alloc.take(cu_node)
        else:
            cu_node = host
        put(FunctionKind.CU_CP, cell, cu_node, cell)
        put(FunctionKind.CU_UP, cell, cu_node, cell)

        if split == SplitOption.OPT_3A:
            put(FunctionKind.UPF, cell, host, cell)
            if template.with_sec:
                put(FunctionKind.SEC, cell, host, cell)
        elif split == SplitOption.OPT_3B:
            upf_hosts = alloc.neighbours(host)
            feeder_first = [s for s in upf_hosts if s in alloc.feeder_sats] + [
                s for s in upf_hosts if s not in alloc.feeder_sats
            ]
            if not feeder_first:
                raise InsufficientNodesError(f"no ISL neighbour free for the UPF of cell {cell}")
            alloc.take(feeder_first[0])
            put(FunctionKind.UPF, cell, feeder_first[0], cell)
            if template.with_sec:
                put(FunctionKind.SEC, cell, feeder_first[0], cell)

        if ext == RicExtension.EXT1:
            put(FunctionKind.NEAR_RT_RIC_DU_PART, cell, host, cell)
            put(FunctionKind.NEAR_RT_RIC_CU_PART, cell, cu_node, cell)
        elif ext == RicExtension.EXT3:
            put(FunctionKind.NEAR_RT_RIC, cell, host, cell)

    if not split.upf_in_space:
        put(FunctionKind.UPF, 0, core)
    put(FunctionKind.CORE_CP, 0, core)
    put(FunctionKind.SMO, 0, smo)
    put(FunctionKind.NON_RT_RIC, 0, smo)
    put(FunctionKind.DATA_NETWORK, 0, dn)

    e2_serving: Dict[str, str] = {}
    cluster_of: Dict[str, str] = {}
    cluster_spec = None
    if ext == RicExtension.NONE:
        if split.cu_on_ground:
            ric_site = next(a.node for a in out if a.function == NetworkFunction(FunctionKind.CU_CP, 0).label)
        else:
            ric_site = serving_gateway(du_hosts[0]) if gateways else core
        put(FunctionKind.NEAR_RT_RIC, 0, ric_site)
    elif ext == RicExtension.EXT2:
        pool: Set[str] = set()
        for host in du_hosts:
            pool |= k_hop_neighborhood(topology, host, template.ric_hop_radius)
        ric_hosts = sorted(pool)[: template.ric_count]
        if len(ric_hosts) < template.ric_count:
            raise InsufficientNodesError("not enough satellites for the requested RIC instances")
        for i, node in enumerate(ric_hosts):
            put(FunctionKind.NEAR_RT_RIC, i, node)
        e2_serving = _nearest_rics(out, ric_hosts, topology)
    elif ext == RicExtension.EXT3:
        if cluster_plan is None:
            raise PlacementError("ext3 placement needs a cluster plan")
        cluster_spec = ClusterPlanSpec(
            rule=template.cluster_rule, target_size=template.cluster_size, k_hops=template.cluster_hops
        )
        for i, cluster in enumerate(cluster_plan.clusters):
            if cluster.leader is None:
                continue
            put(FunctionKind.CLUSTER_LEADER, i, cluster.leader)
            for member in cluster.members:
                if member in du_hosts:
                    cluster_of[member] = cluster.leader

    spec = PlacementSpec(
        split=split,
        extension=ext,
        assignments=tuple(out),
        cu_split=template.cu_split,
        cluster_plan=cluster_spec,
        cluster_of=cluster_of,
        e2_serving=e2_serving,
    )
    logger.info(
        "placement assigned",
        extra={"split": split.value, "extension": ext.value, "functions": len(out)},
    )
    return spec


def _nearest_rics(assignments: Sequence[Assignment], ric_hosts: Sequence[str], topology) -> Dict[str, str]:
    """Initial serving RIC per E2 node: fewest ISL hops, then lowest instance."""
    graph = topology.isl_graph
    serving: Dict[str, str] = {}
    for a in assignments:
        kind = a.network_function.kind
        if kind not in (FunctionKind.DU, FunctionKind.CU_CP):
            continue
        best = None
        for i, host in enumerate(ric_hosts):
            try:
                hops = nx.shortest_path_length(graph, a.node, host) if a.node != host else 0
            except (nx.NetworkXNoPath, nx.NodeNotFound):
                continue
            if best is None or hops < best[0]:
                best = (hops, i)
        if best is not None:
            serving[a.function] = NetworkFunction(FunctionKind.NEAR_RT_RIC, best[1]).label
    return serving
