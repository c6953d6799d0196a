"""
Scenario documents: one JSON file binds constellation, sites, placement, traffic,
resources, dynamics and the simulated window.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.clustering import ClusterPlan, apply_cluster_plan, form_clusters, residual_compute
from utils.dimensioning import budget_key
from utils.dynamics import DynamicsConfig
from utils.errors import PlacementError, ScenarioError
from utils.feasibility import ResourceModel, TrafficConfig
from utils.orbital import ConstellationConfig, GroundSite, SatelliteState, parse_sat_id
from utils.placement import (
    ClusterPlanSpec,
    PlacementSpec,
    PlacementTemplate,
    RicExtension,
    assign_functions,
    check_compatibility,
    validate_placement,
)
from utils.topology import IslTopology, TopologyPolicy

logger = logging.getLogger(__name__)


class WindowConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    t0: float = Field(default=0.0, ge=0)
    t1: float = Field(default=600.0, gt=0)
    step: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _well_ordered(self) -> "WindowConfig":
        if not self.t0 < self.t1:
            raise ValueError("window must satisfy t0 < t1")
        if self.step > self.t1 - self.t0:
            raise ValueError("window step must not exceed t1 - t0")
        return self


class Overrides(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    budgets_s: Dict[str, float] = Field(default_factory=dict)

    @field_validator("budgets_s")
    @classmethod
    def _known_budget_classes(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, seconds in value.items():
            try:
                budget_key(name)
            except KeyError as exc:
                raise ValueError(str(exc)) from exc
            if seconds <= 0:
                raise ValueError(f"budget override for {name} must be > 0")
        return value


def parse_option(text: str) -> Dict[str, Any]:
    """'2a' or '2a:ext2' shorthand to template fields."""
    split, _, ext = text.partition(":")
    return {"split": split.strip(), "extension": (ext or RicExtension.NONE.value).strip()}


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "scenario"
    constellation: ConstellationConfig
    sites: List[GroundSite] = Field(min_length=1)
    placement: Union[PlacementTemplate, PlacementSpec]
    topology: TopologyPolicy = Field(default_factory=TopologyPolicy)
    traffic: TrafficConfig = Field(default_factory=TrafficConfig)
    resources: ResourceModel = Field(default_factory=ResourceModel)
    dynamics: DynamicsConfig = Field(default_factory=DynamicsConfig)
    window: WindowConfig = Field(default_factory=WindowConfig)
    seed: int = Field(default=0, ge=0)
    overrides: Overrides = Field(default_factory=Overrides)

    @field_validator("placement", mode="before")
    @classmethod
    def _shorthand(cls, value: Any) -> Any:
        if isinstance(value, str):
            return parse_option(value)
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        ids = [s.site_id for s in self.sites]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise ValueError(f"duplicate site ids: {duplicates}")
        problem = check_compatibility(self.placement.split, self.placement.extension)
        if problem:
            # not a ValueError, so it reaches parse_scenario with its rule id intact
            raise PlacementError("incompatible option/extension pair", [problem])
        if isinstance(self.placement, PlacementSpec):
            result = validate_placement(
                self.placement, sites=self.sites, satellites=self.constellation.satellite_ids()
            )
            unknown = [v for v in result.violations if v.rule == "unknown-node"]
            if unknown:
                raise PlacementError("placement references unknown nodes", unknown)
        known = set(self.constellation.satellite_ids())
        for failure in self.dynamics.failures:
            if failure.sat_id not in known:
                raise ValueError(f"failure names unknown satellite {failure.sat_id}")
        return self

    @property
    def placement_extension(self) -> RicExtension:
        return self.placement.extension

    @property
    def budget_overrides(self) -> Dict[str, float]:
        return dict(self.overrides.budgets_s)

    def with_option(self, option: str) -> "Scenario":
        """Copy of this scenario with another split/extension template."""
        fields = parse_option(option)
        template = self.placement.model_dump(mode="json") if isinstance(self.placement, PlacementTemplate) else {}
        template.update(fields)
        data = self.model_dump(mode="json")
        data["placement"] = template
        data["name"] = f"{self.name}[{option}]"
        return scenario_from_dict(data)

    def resolve_placement(self, topology: IslTopology) -> Tuple[PlacementSpec, Optional[ClusterPlan]]:
        """Concrete placement for the first snapshot, and the cluster plan under ext3."""
        states = _states_of(topology)
        if isinstance(self.placement, PlacementSpec):
            spec = self.placement
            if spec.extension != RicExtension.EXT3:
                return spec, None
            clusters = spec.cluster_plan or ClusterPlanSpec()
            plan = form_clusters(
                topology, clusters.rule, clusters.target_size, k_hops=clusters.k_hops,
                residual=residual_compute(spec, self.constellation.satellite_ids(), self.resources),
                satellites=self.constellation.satellite_ids(),
            )
            return apply_cluster_plan(spec, plan), plan

        template = self.placement
        if template.extension != RicExtension.EXT3:
            return assign_functions(template, states, self.sites, topology), None
        sats = self.constellation.satellite_ids()
        provisional = form_clusters(
            topology, template.cluster_rule, template.cluster_size, satellites=sats, k_hops=template.cluster_hops
        )
        spec = assign_functions(template, states, self.sites, topology, cluster_plan=provisional)
        plan = form_clusters(
            topology, template.cluster_rule, template.cluster_size,
            residual=residual_compute(spec, sats, self.resources), satellites=sats, k_hops=template.cluster_hops,
        )
        return apply_cluster_plan(spec, plan), plan


def _states_of(topology: IslTopology) -> List[SatelliteState]:
    states = []
    for sat, position in sorted(topology.positions.items()):
        plane, slot = parse_sat_id(sat)
        states.append(SatelliteState(plane=plane, slot=slot, position=position, time=topology.time))
    return states


def _location(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ScenarioError(first.get("msg", str(exc)), rule="schema", location=_location(first)) from exc
    except PlacementError as exc:
        rule = exc.rules[0] if exc.rules else "placement"
        raise ScenarioError(str(exc), rule=rule, location="placement") from exc


def parse_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", rule="io", location=str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"invalid JSON: {exc.msg}", rule="parse", location=f"line {exc.lineno}, column {exc.colno}"
        ) from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object", rule="parse")
    scenario = scenario_from_dict(data)
    logger.info("scenario loaded", extra={"scenario": scenario.name, "path": str(path)})
    return scenario


def dump_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario.model_dump(mode="json"), indent=2)


def scenario_schema() -> Dict[str, Any]:
    return Scenario.model_json_schema()
