"""
NTN Split Simulator - Flow Implementation
Connects the nodes into the dimension, validate, simulate and compare pipelines
"""

import logging

from pocketflow import AsyncFlow, Flow

from nodes import (
    CompareMembersNode,
    ComparisonTableNode,
    DimensionNode,
    LoadScenarioNode,
    PrepareComparisonNode,
    SimulateNode,
    WriteArtifactsNode,
)

logger = logging.getLogger(__name__)


def create_dimension_flow():
    """Single-node flow: air-interface parameters in shared["air"] to the dimensioning table."""
    return Flow(start=DimensionNode())


def create_validate_flow():
    """Parse-only flow; leaves the validated Scenario in shared["scenario"]."""
    return Flow(start=LoadScenarioNode())


def create_simulation_flow(write_artifacts: bool = True):
    """
    Create the simulation flow.

    Flow Sequence:
    1. LoadScenario -> parse and validate the scenario file (Node)
    2. Simulate -> run the window, collect reports and events (Node)
    3. WriteArtifacts -> CSV/JSON reports, event log, summary (Node)

    Returns:
        Flow: simulation workflow
    """
    load = LoadScenarioNode()
    simulate = SimulateNode()
    load >> simulate
    if write_artifacts:
        simulate >> WriteArtifactsNode()
    logger.debug("simulation flow created", extra={"write_artifacts": write_artifacts})
    return Flow(start=load)


def create_compare_flow():
    """
    Create the comparison flow.

    Flow Sequence:
    1. PrepareComparison -> member scenarios from files or --options (Node)
    2. CompareMembers -> concurrent member simulations (AsyncParallelBatchNode)
    3. ComparisonTable -> side-by-side table, comparison.csv (Node)

    Returns:
        AsyncFlow: comparison workflow with async support
    """
    prepare = PrepareComparisonNode()
    members = CompareMembersNode()
    table = ComparisonTableNode()
    prepare >> members >> table
    return AsyncFlow(start=prepare)
