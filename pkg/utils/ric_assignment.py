"""
Near-RT RIC selection and dynamic E2 reassignment.

Candidates are scored on path delay, RIC load and link quality. The assignment
engine runs over a precomputed candidate timeline, so the predictive policy can look
ahead on exactly the ephemeris the run will see.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

# Default scoring weights (can be customized per scenario)
DEFAULT_WEIGHTS = {
    "delay": 0.5,
    "load": 0.3,
    "quality": 0.2,
}

DELAY_REFERENCE_S = 10e-3
DEFAULT_SCORE_HYSTERESIS = 0.1
DEFAULT_HYSTERESIS_WINDOW_S = 30.0
DEFAULT_LOOKAHEAD_S = 120.0
DEFAULT_GUARD_S = 5.0
DEFAULT_CONTEXT_BYTES = 1_000_000


class E2Policy(str, Enum):
    REACTIVE = "reactive"
    PREDICTIVE = "predictive"


class ReassignmentCause(str, Enum):
    INITIAL = "initial"
    FAILOVER = "failover"
    PREDICTIVE = "predictive"
    SCORE = "score"


@dataclass(frozen=True)
class RicCandidate:
    ric_id: str
    delay: Optional[float]
    quality: float = 1.0
    load: float = 0.0
    within_budget: bool = True

    @property
    def reachable(self) -> bool:
        return self.delay is not None

    @property
    def valid(self) -> bool:
        return self.reachable and self.within_budget


def customize_weights(overrides: Optional[Mapping[str, float]] = None) -> Dict[str, float]:
    """Apply overrides on top of the defaults and normalize to sum to 1.0."""
    weights = DEFAULT_WEIGHTS.copy()
    for factor, weight in (overrides or {}).items():
        if factor not in weights:
            raise ValueError(f"unknown scoring factor '{factor}'")
        if weight < 0:
            raise ValueError(f"weight for {factor} must be >= 0")
        weights[factor] = float(weight)
    total = sum(weights.values())
    if total <= 0:
        raise ValueError("at least one weight must be positive")
    return {k: v / total for k, v in weights.items()}


def candidate_score(candidate: RicCandidate, weights: Optional[Mapping[str, float]] = None) -> float:
    """Lower is better. Unreachable candidates score +inf."""
    if not candidate.reachable:
        return math.inf
    weights = weights or DEFAULT_WEIGHTS
    return (
        weights["delay"] * (candidate.delay / DELAY_REFERENCE_S)
        + weights["load"] * candidate.load
        + weights["quality"] * (1.0 - candidate.quality)
    )


@dataclass
class RicAssignmentState:
    """Serving RIC per E2 node plus per-RIC load."""

    serving: Dict[str, Optional[str]] = field(default_factory=dict)
    node_weight: Dict[str, float] = field(default_factory=dict)
    ric_capacity: Dict[str, float] = field(default_factory=dict)
    last_change: Dict[str, float] = field(default_factory=dict)

    def load(self, ric_id: str, excluding: Optional[str] = None) -> float:
        capacity = self.ric_capacity.get(ric_id, 1.0)
        used = sum(
            self.node_weight.get(node, 1.0)
            for node, ric in self.serving.items()
            if ric == ric_id and node != excluding
        )
        return min(1.0, used / capacity) if capacity > 0 else 1.0

    def assign(self, node: str, ric_id: Optional[str], t: float) -> None:
        self.serving[node] = ric_id
        self.last_change[node] = t


def _best(candidates: Sequence[RicCandidate], weights: Mapping[str, float]) -> Optional[RicCandidate]:
    valid = [c for c in candidates if c.valid]
    if not valid:
        return None
    return min(valid, key=lambda c: (candidate_score(c, weights), c.ric_id))


def select_near_rt_ric(
    e2_node: str,
    candidates: Sequence[RicCandidate],
    state: Optional[RicAssignmentState] = None,
    weights: Optional[Mapping[str, float]] = None,
    hysteresis: float = DEFAULT_SCORE_HYSTERESIS,
) -> Optional[str]:
    """
    Lowest-score valid candidate, ties to the lowest RIC id.

    The incumbent is kept unless its score exceeds the best by more than the
    hysteresis. Returns None when no candidate is valid.
    """
    if not candidates:
        raise ValueError("candidates must not be empty")
    weights = weights or DEFAULT_WEIGHTS
    best = _best(candidates, weights)
    if best is None:
        return None
    incumbent_id = state.serving.get(e2_node) if state else None
    for c in candidates:
        if c.ric_id == incumbent_id and c.valid:
            if candidate_score(c, weights) - candidate_score(best, weights) <= hysteresis:
                return incumbent_id
    return best.ric_id


@dataclass
class CandidateTimeline:
    """Per step, per E2 node: every RIC instance as a candidate."""

    times: List[float]
    candidates: List[Dict[str, List[RicCandidate]]]

    def __post_init__(self):
        if len(self.times) != len(self.candidates):
            raise ValueError("times and candidates must have equal length")

    @property
    def step(self) -> float:
        return self.times[1] - self.times[0] if len(self.times) > 1 else 0.0

    def at(self, k: int, node: str) -> List[RicCandidate]:
        return self.candidates[k].get(node, [])

    def valid_rics(self, k: int, node: str) -> List[str]:
        return sorted(c.ric_id for c in self.at(k, node) if c.valid)

    def is_valid(self, k: int, node: str, ric_id: Optional[str]) -> bool:
        return ric_id is not None and ric_id in self.valid_rics(k, node)

    @property
    def nodes(self) -> List[str]:
        return sorted({n for step in self.candidates for n in step})


@dataclass(frozen=True)
class ScheduledMigration:
    at: float
    exit_time: float
    target: Optional[str]


def predict_reassignment(
    timeline: CandidateTimeline,
    e2_node: str,
    serving_ric: str,
    k: int,
    horizon: float = DEFAULT_LOOKAHEAD_S,
    guard: float = DEFAULT_GUARD_S,
    weights: Optional[Mapping[str, float]] = None,
) -> Optional[ScheduledMigration]:
    """
    First time t* within the horizon after step k where the serving RIC leaves the
    valid set; migration is due at t* - guard toward the best candidate at t*.
    """
    if not horizon > guard >= 0:
        raise ValueError("need horizon > guard >= 0")
    weights = weights or DEFAULT_WEIGHTS
    start = timeline.times[k]
    for j in range(k + 1, len(timeline.times)):
        t = timeline.times[j]
        if t - start > horizon + 1e-9:
            break
        if timeline.is_valid(j, e2_node, serving_ric):
            continue
        target = _stable_target(timeline, e2_node, k + 1, j, weights)
        return ScheduledMigration(at=t - guard, exit_time=t, target=target)
    return None


def _stable_target(
    timeline: CandidateTimeline, node: str, first: int, exit_index: int, weights: Mapping[str, float]
) -> Optional[str]:
    """Best candidate at the exit step that stays valid from `first` through it."""
    best = _best(timeline.at(exit_index, node), weights)
    pool = [c for c in timeline.at(exit_index, node) if c.valid]
    stable = [
        c for c in pool
        if all(timeline.is_valid(j, node, c.ric_id) for j in range(first, exit_index + 1))
    ]
    if stable:
        return min(stable, key=lambda c: (candidate_score(c, weights), c.ric_id)).ric_id
    return best.ric_id if best else None


@dataclass(frozen=True)
class Reassignment:
    time: float
    node: str
    source: Optional[str]
    target: str
    cause: ReassignmentCause


@dataclass
class AssignmentTrace:
    times: List[float]
    serving: List[Dict[str, Optional[str]]]
    unassigned: Dict[str, List[float]]
    reassignments: List[Reassignment]
    # step indices behind `unassigned`
    unassigned_index: Dict[str, List[int]] = field(default_factory=dict)

    def unassigned_at(self, k: int) -> List[str]:
        return sorted(node for node, steps in self.unassigned_index.items() if k in steps)

    def total_unassigned_time(self, step: float) -> float:
        return step * sum(len(v) for v in self.unassigned.values())

    def unassigned_steps(self) -> int:
        return sum(len(v) for v in self.unassigned.values())


class E2AssignmentEngine:
    """
    Runs the E2 node -> RIC assignment over a timeline.

    Decisions taken at step k take effect at step k+1. The reactive policy sees only
    step k; the predictive policy also reads upcoming steps. Inside the hysteresis
    window after a change only a failover can move the node again.
    """

    def __init__(
        self,
        policy: E2Policy | str = E2Policy.PREDICTIVE,
        weights: Optional[Mapping[str, float]] = None,
        hysteresis: float = DEFAULT_SCORE_HYSTERESIS,
        hysteresis_window: float = DEFAULT_HYSTERESIS_WINDOW_S,
        horizon: float = DEFAULT_LOOKAHEAD_S,
        guard: float = DEFAULT_GUARD_S,
        ric_capacity: float = 10.0,
    ):
        self.policy = E2Policy(policy)
        self.weights = customize_weights(weights)
        self.hysteresis = hysteresis
        self.hysteresis_window = hysteresis_window
        self.horizon = horizon
        self.guard = guard
        self.ric_capacity = ric_capacity

    def _with_loads(self, cands: Sequence[RicCandidate], state: RicAssignmentState, node: str) -> List[RicCandidate]:
        return [replace(c, load=state.load(c.ric_id, excluding=node)) for c in cands]

    def run(
        self,
        timeline: CandidateTimeline,
        initial: Optional[Mapping[str, str]] = None,
        steps: Optional[int] = None,
    ) -> AssignmentTrace:
        steps = len(timeline.times) if steps is None else min(steps, len(timeline.times))
        nodes = timeline.nodes
        state = RicAssignmentState()
        for node in nodes:
            for c in timeline.at(0, node):
                state.ric_capacity.setdefault(c.ric_id, self.ric_capacity)

        trace = AssignmentTrace(times=list(timeline.times[:steps]), serving=[], unassigned={}, reassignments=[])
        t0 = timeline.times[0] if steps else 0.0
        for node in nodes:
            chosen = (initial or {}).get(node)
            if not timeline.is_valid(0, node, chosen):
                best = _best(self._with_loads(timeline.at(0, node), state, node), self.weights)
                chosen = best.ric_id if best else chosen
            state.serving[node] = chosen
            if chosen is not None:
                state.last_change[node] = t0
                trace.reassignments.append(Reassignment(t0, node, None, chosen, ReassignmentCause.INITIAL))

        for k in range(steps):
            t = timeline.times[k]
            trace.serving.append(dict(state.serving))
            for node in nodes:
                if not timeline.is_valid(k, node, state.serving.get(node)):
                    trace.unassigned.setdefault(node, []).append(t)
                    trace.unassigned_index.setdefault(node, []).append(k)
            if k + 1 >= steps:
                break
            t_next = timeline.times[k + 1]
            for node in nodes:
                decision = self._decide(timeline, state, node, k)
                if decision is None:
                    continue
                target, cause = decision
                source = state.serving.get(node)
                state.assign(node, target, t_next)
                trace.reassignments.append(Reassignment(t_next, node, source, target, cause))

        logger.info(
            "e2 assignment finished",
            extra={
                "policy": self.policy.value,
                "reassignments": len(trace.reassignments),
                "unassigned_steps": trace.unassigned_steps(),
            },
        )
        return trace

    def _decide(
        self, timeline: CandidateTimeline, state: RicAssignmentState, node: str, k: int
    ) -> Optional[Tuple[str, ReassignmentCause]]:
        current = state.serving.get(node)
        # the step the decision is judged on
        view = k if self.policy == E2Policy.REACTIVE else k + 1
        cands = self._with_loads(timeline.at(view, node), state, node)

        if not timeline.is_valid(view, node, current):
            best = _best(cands, self.weights)
            if best is None or best.ric_id == current:
                return None
            return best.ric_id, ReassignmentCause.FAILOVER

        # only failover may move a node inside the hysteresis window
        last = state.last_change.get(node, -math.inf)
        if timeline.times[k + 1] - last < self.hysteresis_window - 1e-9:
            return None

        if self.policy == E2Policy.PREDICTIVE:
            plan = predict_reassignment(
                timeline, node, current, k, self.horizon, self.guard, self.weights
            )
            if plan is not None and timeline.times[k + 1] >= plan.at - 1e-9:
                if plan.target and plan.target != current and timeline.is_valid(view, node, plan.target):
                    return plan.target, ReassignmentCause.PREDICTIVE

        chosen = select_near_rt_ric(node, cands, state, self.weights, self.hysteresis)
        if chosen is not None and chosen != current:
            return chosen, ReassignmentCause.SCORE
        return None


def transfer_time(context_bytes: float, capacity_bps: float, path_delay: float = 0.0) -> float:
    """Time to move a RIC context over an ISL path."""
    if capacity_bps <= 0:
        raise ValueError("capacity must be > 0")
    return context_bytes * 8.0 / capacity_bps + path_delay
