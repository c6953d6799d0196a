"""
Interface dimensioning: fronthaul/midhaul bit rates and latency budgets.

Fronthaul: BR = M * N * L * BTW * 2 / T_s + CR, with M = 12 * n_prb
Midhaul:   BR = PR + CR

Control and peak rates scale linearly from fixed anchors with bandwidth, modulation
order and layer count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering
from typing import Any, Dict, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from utils.errors import DimensioningError

SUPPORTED_SCS_KHZ = (15, 30, 60, 120)

MODULATION_ORDERS = {
    "qpsk": 2,
    "16qam": 4,
    "64qam": 6,
    "256qam": 8,
}

# Maximum transmission bandwidth configuration (PRBs) keyed by (bandwidth MHz, scs kHz).
# Wide 60/120 kHz carriers use the FR2 values.
PRB_TABLE: Dict[Tuple[int, int], int] = {
    (5, 15): 25, (10, 15): 52, (15, 15): 79, (20, 15): 106, (25, 15): 133,
    (30, 15): 160, (40, 15): 216, (50, 15): 270,
    (5, 30): 11, (10, 30): 24, (15, 30): 38, (20, 30): 51, (25, 30): 65,
    (30, 30): 78, (40, 30): 106, (50, 30): 133, (60, 30): 162, (70, 30): 189,
    (80, 30): 217, (90, 30): 245, (100, 30): 273,
    (10, 60): 11, (15, 60): 18, (20, 60): 24, (25, 60): 31, (30, 60): 38,
    (40, 60): 51, (50, 60): 66, (100, 60): 132, (200, 60): 264,
    (50, 120): 32, (100, 120): 66, (200, 120): 132, (400, 120): 264,
}


def normalize_modulation(name: Any) -> int:
    """Return bits per symbol for a modulation name or order."""
    if isinstance(name, int):
        order = name
    else:
        key = str(name).strip().lower().replace("-", "").replace(" ", "")
        if key.isdigit():
            order = int(key)
        elif key in MODULATION_ORDERS:
            order = MODULATION_ORDERS[key]
        else:
            raise DimensioningError(f"unknown modulation '{name}'")
    if order not in MODULATION_ORDERS.values():
        raise DimensioningError(f"modulation order must be one of 2/4/6/8, got {order}")
    return order


def default_prb(bandwidth_mhz: float, scs_khz: int) -> int:
    key = (int(round(bandwidth_mhz)), int(scs_khz))
    if key not in PRB_TABLE or not math.isclose(bandwidth_mhz, key[0]):
        raise DimensioningError(
            f"no default PRB count for {bandwidth_mhz} MHz at {scs_khz} kHz; pass n_prb explicitly"
        )
    return PRB_TABLE[key]


def slot_duration_s(scs_khz: int) -> float:
    if scs_khz not in SUPPORTED_SCS_KHZ:
        raise DimensioningError(f"subcarrier spacing must be one of {SUPPORTED_SCS_KHZ} kHz, got {scs_khz}")
    return 1e-3 * 15.0 / scs_khz


class Direction(str, Enum):
    DOWNLINK = "downlink"
    UPLINK = "uplink"


class AirInterfaceConfig(BaseModel):
    """Air-interface parameters of one cell; defaults are a 100 MHz FR2 carrier at 60 kHz."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    bandwidth_mhz: float = Field(default=100.0, gt=0)
    scs_khz: int = 60
    n_prb: int = Field(default=132, gt=0)
    n_symbols: int = Field(default=14, gt=0)
    n_layers: int = Field(default=1, gt=0)
    bitwidth: int = Field(default=14, gt=0)
    modulation_order: int = 6
    direction: Direction = Direction.DOWNLINK

    @field_validator("scs_khz")
    @classmethod
    def _supported_scs(cls, value: int) -> int:
        if value not in SUPPORTED_SCS_KHZ:
            raise ValueError(f"scs_khz must be one of {SUPPORTED_SCS_KHZ}")
        return value

    @field_validator("modulation_order", mode="before")
    @classmethod
    def _modulation(cls, value: Any) -> int:
        try:
            return normalize_modulation(value)
        except DimensioningError as exc:
            raise ValueError(str(exc)) from exc

    @property
    def slot_duration_s(self) -> float:
        return slot_duration_s(self.scs_khz)

    @property
    def subcarriers(self) -> int:
        return 12 * self.n_prb


@total_ordering
@dataclass(frozen=True)
class DataRate:
    bps: float

    def __post_init__(self):
        if self.bps < 0 or math.isnan(self.bps):
            raise ValueError(f"data rate must be >= 0, got {self.bps}")

    @classmethod
    def mbps(cls, value: float) -> "DataRate":
        return cls(value * 1e6)

    @property
    def in_mbps(self) -> float:
        return self.bps / 1e6

    @property
    def in_gbps(self) -> float:
        return self.bps / 1e9

    def __add__(self, other: "DataRate") -> "DataRate":
        return DataRate(self.bps + other.bps)

    def __lt__(self, other: "DataRate") -> bool:
        return self.bps < other.bps


@dataclass(frozen=True)
class RateReference:
    """A rate anchor and the dimensions it was measured at."""

    interface: str
    reference_rate: float
    reference_bandwidth: float
    reference_modulation: int
    reference_layers: int
    scales: bool = True

    def scaled(self, cfg: AirInterfaceConfig) -> DataRate:
        if not self.scales:
            return DataRate(self.reference_rate)
        return DataRate(
            self.reference_rate
            * (cfg.bandwidth_mhz / self.reference_bandwidth)
            * (cfg.modulation_order / self.reference_modulation)
            * (cfg.n_layers / self.reference_layers)
        )


RATE_REFERENCES: Dict[str, RateReference] = {
    "fronthaul_control": RateReference("fronthaul_control", 1.856e6, 20.0, 6, 2),
    "midhaul_peak_dl": RateReference("midhaul_peak_dl", 150e6, 20.0, 6, 2),
    "midhaul_peak_ul": RateReference("midhaul_peak_ul", 50e6, 20.0, 4, 1),
    "midhaul_control_dl": RateReference("midhaul_control_dl", 24e6, 20.0, 6, 2, scales=False),
    "midhaul_control_ul": RateReference("midhaul_control_ul", 16e6, 20.0, 4, 1, scales=False),
}


def fronthaul_control_rate(cfg: AirInterfaceConfig) -> DataRate:
    return RATE_REFERENCES["fronthaul_control"].scaled(cfg)


def fronthaul_data_rate(cfg: AirInterfaceConfig) -> DataRate:
    t_s = slot_duration_s(cfg.scs_khz)
    return DataRate(cfg.subcarriers * cfg.n_symbols * cfg.n_layers * cfg.bitwidth * 2 / t_s)


def fronthaul_bit_rate(cfg: AirInterfaceConfig) -> DataRate:
    return fronthaul_data_rate(cfg) + fronthaul_control_rate(cfg)


def midhaul_peak_rate(cfg: AirInterfaceConfig) -> DataRate:
    key = "midhaul_peak_dl" if cfg.direction == Direction.DOWNLINK else "midhaul_peak_ul"
    return RATE_REFERENCES[key].scaled(cfg)


def midhaul_control_rate(cfg: AirInterfaceConfig) -> DataRate:
    key = "midhaul_control_dl" if cfg.direction == Direction.DOWNLINK else "midhaul_control_ul"
    return RATE_REFERENCES[key].scaled(cfg)


def midhaul_bit_rate(cfg: AirInterfaceConfig) -> DataRate:
    return midhaul_peak_rate(cfg) + midhaul_control_rate(cfg)


class InterfaceClass(str, Enum):
    """Link-level interface classes."""

    OFH = "OFH"
    F1_C = "F1_C"
    F1_U = "F1_U"
    E1 = "E1"
    E2 = "E2"
    A1 = "A1"
    O1 = "O1"
    N2 = "N2"
    N3 = "N3"
    N4 = "N4"
    N6 = "N6"
    N9 = "N9"
    INTER_RIC = "inter_RIC"


# Budget keys; E2 and A1 links are judged by their loop rows
BUDGET_CLASSES = (
    "OFH", "F1_U", "F1_C", "E1", "E2_nearRT_loop", "A1_nonRT_loop",
    "N2", "N3", "N4", "N6", "N9", "inter_RIC", "O1",
)

_BUDGET_ALIASES = {"E2": "E2_nearRT_loop", "A1": "A1_nonRT_loop"}


@dataclass(frozen=True)
class LatencyBudget:
    interface_class: str
    max_one_way: Optional[float] = None
    floor: Optional[float] = None
    loop_window: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.max_one_way is not None and self.max_one_way <= 0:
            raise ValueError("max_one_way must be > 0 when bounded")
        if self.loop_window is not None and not self.loop_window[0] < self.loop_window[1]:
            raise ValueError("loop window must satisfy min < max")

    @property
    def bounded(self) -> bool:
        return self.max_one_way is not None

    @property
    def limit(self) -> float:
        return self.max_one_way if self.max_one_way is not None else math.inf

    @property
    def window(self) -> Optional[Tuple[float, float]]:
        """(floor, max) where both are known."""
        if self.floor is None or self.max_one_way is None:
            return None
        return (self.floor, self.max_one_way)


LATENCY_BUDGETS: Dict[str, LatencyBudget] = {
    "OFH": LatencyBudget("OFH", max_one_way=500e-6),
    "F1_U": LatencyBudget("F1_U", max_one_way=10e-3, floor=1.5e-3),
    "F1_C": LatencyBudget("F1_C", max_one_way=10e-3, floor=2e-3),
    "E2_nearRT_loop": LatencyBudget("E2_nearRT_loop", loop_window=(10e-3, 1.0)),
    "A1_nonRT_loop": LatencyBudget("A1_nonRT_loop", loop_window=(1.0, math.inf)),
}


def budget_key(interface_class: Any) -> str:
    key = interface_class.value if isinstance(interface_class, Enum) else str(interface_class)
    key = _BUDGET_ALIASES.get(key, key)
    if key not in BUDGET_CLASSES:
        raise KeyError(f"unknown interface class '{interface_class}'")
    return key


def latency_budget(interface_class: Any, overrides: Optional[Mapping[str, float]] = None) -> LatencyBudget:
    """Budget row for an interface class; overrides map class -> max one-way seconds."""
    key = budget_key(interface_class)
    base = LATENCY_BUDGETS.get(key, LatencyBudget(key))
    if overrides:
        for name, value in overrides.items():
            if budget_key(name) == key:
                return LatencyBudget(key, max_one_way=float(value), floor=base.floor, loop_window=base.loop_window)
    return base


def max_hops_within_budget(budget: float, per_hop: float) -> int:
    """Largest n with n * per_hop <= budget."""
    if per_hop <= 0:
        raise ValueError("per_hop must be > 0")
    if budget < 0:
        return 0
    tol = 1e-12 * max(1.0, abs(budget))
    hops = int(math.floor(budget / per_hop))
    while (hops + 1) * per_hop <= budget + tol:
        hops += 1
    while hops > 0 and hops * per_hop > budget + tol:
        hops -= 1
    return hops


def dimension_table(cfg: AirInterfaceConfig) -> List[Dict[str, Any]]:
    """Rows for the dimensioning report: rates in bps, budgets in seconds."""
    fh_data = fronthaul_data_rate(cfg)
    fh_ctrl = fronthaul_control_rate(cfg)
    mh_peak = midhaul_peak_rate(cfg)
    mh_ctrl = midhaul_control_rate(cfg)
    rows = [
        {"quantity": "fronthaul_data", "value": fh_data.bps, "unit": "bps"},
        {"quantity": "fronthaul_control", "value": fh_ctrl.bps, "unit": "bps"},
        {"quantity": "fronthaul_total", "value": (fh_data + fh_ctrl).bps, "unit": "bps"},
        {"quantity": "midhaul_peak", "value": mh_peak.bps, "unit": "bps"},
        {"quantity": "midhaul_control", "value": mh_ctrl.bps, "unit": "bps"},
        {"quantity": "midhaul_total", "value": (mh_peak + mh_ctrl).bps, "unit": "bps"},
    ]
    for key in ("OFH", "F1_U", "F1_C"):
        budget = LATENCY_BUDGETS[key]
        rows.append({"quantity": f"budget_{key}", "value": budget.max_one_way, "unit": "s"})
    return rows
