"""
Walker constellation generation, circular-orbit propagation and ground geometry.

Satellites move on circular Keplerian orbits around a spherical Earth. Positions are
Earth-centred inertial (km). Ground sites rotate with the Earth from the epoch, when
the Greenwich meridian is aligned with the inertial x axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

EARTH_RADIUS_KM = 6378.137
MU_KM3_S2 = 398600.4418
SPEED_OF_LIGHT_KM_S = 299792.458
EARTH_ROTATION_DEG_S = 360.0 / 86164.1
DEFAULT_EPOCH = datetime(2025, 1, 1, tzinfo=timezone.utc)
DEFAULT_MIN_ELEVATION_DEG = 10.0

# Round-trip bands used to sanity check computed delays
LEO_RTT_BAND_S = (0.005, 0.020)
GEO_MIN_RTT_S = 0.250

SAT_PREFIX = "sat-"

Vector = Tuple[float, float, float]


def sat_id(plane: int, slot: int) -> str:
    return f"{SAT_PREFIX}{plane:03d}-{slot:03d}"


def parse_sat_id(node: str) -> Tuple[int, int]:
    plane, slot = node[len(SAT_PREFIX):].split("-")
    return int(plane), int(slot)


def is_satellite(node: str) -> bool:
    return node.startswith(SAT_PREFIX)


class ConstellationConfig(BaseModel):
    """Walker constellation parameters (circular orbits)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    altitude_km: float = Field(gt=0)
    inclination_deg: float = Field(ge=0, le=180)
    num_planes: int = Field(ge=1)
    sats_per_plane: int = Field(ge=1)
    phasing_factor: int = Field(default=0, ge=0)
    raan_spread_deg: float = Field(default=360.0, gt=0, le=360)
    epoch: datetime = DEFAULT_EPOCH

    @model_validator(mode="after")
    def _phasing_below_plane_count(self) -> "ConstellationConfig":
        if self.phasing_factor >= self.num_planes:
            raise ValueError(
                f"phasing_factor must be < num_planes ({self.phasing_factor} >= {self.num_planes})"
            )
        return self

    @property
    def semi_major_axis_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    @property
    def mean_motion_rad_s(self) -> float:
        return math.sqrt(MU_KM3_S2 / self.semi_major_axis_km ** 3)

    @property
    def total_satellites(self) -> int:
        return self.num_planes * self.sats_per_plane

    def satellite_ids(self) -> List[str]:
        return [sat_id(p, s) for p in range(self.num_planes) for s in range(self.sats_per_plane)]


class SiteRole(str, Enum):
    GATEWAY = "gateway"
    CORE = "core"
    SMO = "smo"
    DATA_NETWORK = "data_network"


class GroundSite(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    site_id: str = Field(min_length=1)
    latitude_deg: float = Field(ge=-90, le=90)
    longitude_deg: float = Field(gt=-180, le=180)
    role: SiteRole = SiteRole.GATEWAY
    min_elevation_deg: float = Field(default=DEFAULT_MIN_ELEVATION_DEG, ge=0, lt=90)

    @field_validator("site_id")
    @classmethod
    def _not_a_satellite_id(cls, value: str) -> str:
        if value.startswith(SAT_PREFIX):
            raise ValueError(f"site ids must not start with '{SAT_PREFIX}'")
        return value


@dataclass(frozen=True)
class SatelliteState:
    """Ephemeris record of one satellite at one instant."""

    plane: int
    slot: int
    position: Vector
    time: float

    @property
    def sat_id(self) -> str:
        return sat_id(self.plane, self.slot)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @property
    def latitude_deg(self) -> float:
        return latitude_deg(self.position)


@dataclass(frozen=True)
class VisibilityWindow:
    sat_id: str
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


def orbital_period(config: ConstellationConfig) -> float:
    return 2.0 * math.pi / config.mean_motion_rad_s


def propagate_positions(config: ConstellationConfig, t: float) -> np.ndarray:
    """Positions of all satellites at t seconds from epoch, shape (planes, slots, 3)."""
    if t < 0:
        raise ValueError(f"t must be >= 0 seconds from epoch, got {t}")
    planes = np.arange(config.num_planes, dtype=float)[:, None]
    slots = np.arange(config.sats_per_plane, dtype=float)[None, :]
    total = config.num_planes * config.sats_per_plane

    raan = np.radians(config.raan_spread_deg * planes / config.num_planes)
    arg_lat = (
        2.0 * math.pi * slots / config.sats_per_plane
        + 2.0 * math.pi * config.phasing_factor * planes / total
        + config.mean_motion_rad_s * t
    )
    inc = math.radians(config.inclination_deg)
    r = config.semi_major_axis_km

    cos_u, sin_u = np.cos(arg_lat), np.sin(arg_lat)
    cos_o, sin_o = np.cos(raan), np.sin(raan)
    x = r * (cos_u * cos_o - sin_u * math.cos(inc) * sin_o)
    y = r * (cos_u * sin_o + sin_u * math.cos(inc) * cos_o)
    z = r * sin_u * math.sin(inc)
    return np.stack([x, y, z], axis=-1)


def propagate(config: ConstellationConfig, t: float) -> List[SatelliteState]:
    positions = propagate_positions(config, t)
    return [
        SatelliteState(plane=p, slot=s, position=tuple(float(v) for v in positions[p, s]), time=t)
        for p in range(config.num_planes)
        for s in range(config.sats_per_plane)
    ]


def propagation_delay(a: Sequence[float], b: Sequence[float]) -> float:
    """One-way light-time delay between two positions (s)."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.linalg.norm(diff)) / SPEED_OF_LIGHT_KM_S


def latitude_deg(position: Sequence[float]) -> float:
    x, y, z = (float(v) for v in position)
    return math.degrees(math.atan2(z, math.hypot(x, y)))


def site_position(site: GroundSite, t: float) -> np.ndarray:
    lat = math.radians(site.latitude_deg)
    theta = math.radians(site.longitude_deg + EARTH_ROTATION_DEG_S * t)
    return EARTH_RADIUS_KM * np.array(
        [math.cos(lat) * math.cos(theta), math.cos(lat) * math.sin(theta), math.sin(lat)]
    )


def elevation_deg(position, site: GroundSite, t: float):
    """Elevation of one position (3,) or many (..., 3) above the site's horizon."""
    pos = np.asarray(position, dtype=float)
    ground = site_position(site, t)
    up = ground / np.linalg.norm(ground)
    rel = pos - ground
    rng = np.linalg.norm(rel, axis=-1)
    sin_el = np.clip((rel @ up) / rng, -1.0, 1.0)
    el = np.degrees(np.arcsin(sin_el))
    return float(el) if el.ndim == 0 else el


def slant_range_km(position: Sequence[float], site: GroundSite, t: float) -> float:
    return float(np.linalg.norm(np.asarray(position, dtype=float) - site_position(site, t)))


def visible(sat: SatelliteState, site: GroundSite) -> bool:
    return elevation_deg(sat.position, site, sat.time) >= site.min_elevation_deg


def max_slant_range_km(altitude_km: float, min_elevation_deg: float) -> float:
    """Slant range to a satellite sitting exactly on the elevation mask."""
    a = EARTH_RADIUS_KM + altitude_km
    el = math.radians(min_elevation_deg)
    return math.sqrt(a * a - (EARTH_RADIUS_KM * math.cos(el)) ** 2) - EARTH_RADIUS_KM * math.sin(el)


def ground_distance_km(a: GroundSite, b: GroundSite) -> float:
    lat1, lat2 = math.radians(a.latitude_deg), math.radians(b.latitude_deg)
    dlat = lat2 - lat1
    dlon = math.radians(b.longitude_deg - a.longitude_deg)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def terrestrial_delay(a: GroundSite, b: GroundSite, velocity_factor: float = 2.0 / 3.0) -> float:
    """Fibre delay between two ground sites along the great circle."""
    return ground_distance_km(a, b) / (SPEED_OF_LIGHT_KM_S * velocity_factor)


def step_grid(horizon: float, step: float, t0: float = 0.0) -> np.ndarray:
    if step <= 0:
        raise ValueError("step must be > 0")
    if horizon < step:
        raise ValueError("horizon must be >= step")
    count = int(math.floor(horizon / step + 1e-9))
    return t0 + np.arange(count + 1, dtype=float) * step


def mask_runs(mask: Iterable[bool]) -> List[Tuple[int, int]]:
    """Index ranges (first, last) of maximal True runs."""
    arr = np.asarray(mask, dtype=bool)
    padded = np.concatenate(([False], arr, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def visibility_windows(
    config: ConstellationConfig,
    site: GroundSite,
    horizon: float,
    step: float,
    t0: float = 0.0,
) -> List[VisibilityWindow]:
    """Maximal visibility windows per satellite, aligned to the step grid."""
    times = step_grid(horizon, step, t0)
    ids = config.satellite_ids()
    mask = np.empty((len(times), len(ids)), dtype=bool)
    for k, t in enumerate(times):
        positions = propagate_positions(config, float(t)).reshape(-1, 3)
        mask[k] = elevation_deg(positions, site, float(t)) >= site.min_elevation_deg

    windows: List[VisibilityWindow] = []
    for col, sid in enumerate(ids):
        for first, last in mask_runs(mask[:, col]):
            windows.append(VisibilityWindow(sid, float(times[first]), float(times[last])))
    return windows
