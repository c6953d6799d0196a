"""
NTN Split Simulator - Pytest Configuration and Shared Fixtures
Shared test fixtures and configuration for all test modules
"""

import json
from pathlib import Path
from typing import Any, Dict, List

import pytest

from utils.orbital import ConstellationConfig, GroundSite, propagate
from utils.topology import TopologyPolicy, build_topology

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


# Test configuration
def pytest_configure(config):
    """Configure pytest execution."""
    config.addinivalue_line("markers", "unit: Unit tests for individual components")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "property: Randomized property suites")
    config.addinivalue_line("markers", "slow: Slow running tests")


def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers."""
    for item in items:
        if "property" in item.nodeid or item.fspath.basename == "test_properties.py":
            item.add_marker(pytest.mark.property)

        # Mark integration tests
        if "integration" in item.nodeid or "flow" in item.name or "cli" in item.name:
            item.add_marker(pytest.mark.integration)
        else:
            item.add_marker(pytest.mark.unit)


# Constellations
@pytest.fixture
def starlink_shell() -> ConstellationConfig:
    """550 km, 72 planes x 22 satellites, 53 deg, phasing 1."""
    return ConstellationConfig(
        altitude_km=550.0, inclination_deg=53.0, num_planes=72, sats_per_plane=22, phasing_factor=1
    )


@pytest.fixture
def equatorial_ring() -> ConstellationConfig:
    """One equatorial plane of 44 satellites at 550 km; neighbours are ~3.3 ms apart."""
    return ConstellationConfig(altitude_km=550.0, inclination_deg=0.0, num_planes=1, sats_per_plane=44)


@pytest.fixture
def small_walker() -> ConstellationConfig:
    return ConstellationConfig(
        altitude_km=550.0, inclination_deg=53.0, num_planes=6, sats_per_plane=8, phasing_factor=1
    )


@pytest.fixture
def grid_3x3() -> ConstellationConfig:
    return ConstellationConfig(altitude_km=550.0, inclination_deg=53.0, num_planes=3, sats_per_plane=3)


@pytest.fixture
def geo_single() -> ConstellationConfig:
    return ConstellationConfig(altitude_km=35786.0, inclination_deg=0.0, num_planes=1, sats_per_plane=1)


# Ground sites
@pytest.fixture
def equator_gateway() -> GroundSite:
    return GroundSite(site_id="gw-0", latitude_deg=0.0, longitude_deg=0.0)


@pytest.fixture
def ring_gateways() -> List[GroundSite]:
    """Gateways under sat-000-000, sat-000-002 and sat-000-004 of the equatorial ring at t=0."""
    step = 360.0 / 44
    return [
        GroundSite(site_id="gw-0", latitude_deg=0.0, longitude_deg=0.0),
        GroundSite(site_id="gw-2", latitude_deg=0.0, longitude_deg=2 * step),
        GroundSite(site_id="gw-4", latitude_deg=0.0, longitude_deg=4 * step),
    ]


@pytest.fixture
def ring_topology(equatorial_ring, ring_gateways):
    return build_topology(propagate(equatorial_ring, 0.0), ring_gateways, config=equatorial_ring)


@pytest.fixture
def shell_topology(starlink_shell):
    """t=0 snapshot of the 72x22 shell without ground sites."""
    return build_topology(propagate(starlink_shell, 0.0), [], TopologyPolicy(), config=starlink_shell)


# Scenario documents
@pytest.fixture
def geo_scenario_dict() -> Dict[str, Any]:
    return json.loads((SCENARIO_DIR / "geo_2a.json").read_text())


@pytest.fixture
def minimal_scenario_dict() -> Dict[str, Any]:
    return {
        "constellation": {"altitude_km": 550.0, "inclination_deg": 53.0, "num_planes": 3, "sats_per_plane": 3},
        "sites": [{"site_id": "gw-a", "latitude_deg": 0.0, "longitude_deg": 0.0}],
        "placement": "2a",
    }


@pytest.fixture
def scenario_file(tmp_path):
    """Write a scenario dict to a temporary JSON file and return its path."""
    def _write(data: Dict[str, Any], name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return _write


@pytest.fixture
def out_dir(tmp_path) -> Path:
    return tmp_path / "out"
