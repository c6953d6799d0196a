"""
Exception types raised by the simulator.

Conditions that are part of a simulation outcome (a link without a route during
one step, a feeder outage, an unassigned E2 node) are reported as violations or
events instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional


@dataclass(frozen=True)
class RuleViolation:
    """A placement or scenario rule that did not hold."""

    rule: str
    detail: str
    subject: Optional[str] = None

    def __str__(self) -> str:
        where = f" [{self.subject}]" if self.subject else ""
        return f"{self.rule}{where}: {self.detail}"


class NtnSimError(Exception):
    """Base class for all simulator errors."""


class DimensioningError(NtnSimError):
    """Air-interface parameters the rate formulas cannot dimension."""


class NoRouteError(NtnSimError):
    def __init__(self, src: str, dst: str, reason: str = "no route"):
        super().__init__(f"{reason}: {src} -> {dst}")
        self.src = src
        self.dst = dst
        self.reason = reason


class PlacementError(NtnSimError):
    def __init__(self, message: str, violations: Optional[List[RuleViolation]] = None):
        self.violations = list(violations or [])
        if self.violations:
            message = message + "; " + "; ".join(str(v) for v in self.violations)
        super().__init__(message)

    @property
    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]


class InsufficientNodesError(PlacementError):
    """The constellation or site list cannot host the requested template."""


class ScenarioError(NtnSimError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, message: str, rule: str = "schema", location: Optional[str] = None):
        prefix = f"{location}: " if location else ""
        super().__init__(f"{prefix}{message} ({rule})")
        self.rule = rule
        self.location = location
