"""
Dimensioning tests: fronthaul and midhaul rates, latency budgets and hop counts.
"""

import pytest
from pydantic import ValidationError

from utils.dimensioning import (
    LATENCY_BUDGETS,
    AirInterfaceConfig,
    DataRate,
    Direction,
    budget_key,
    default_prb,
    dimension_table,
    fronthaul_bit_rate,
    fronthaul_control_rate,
    latency_budget,
    max_hops_within_budget,
    midhaul_bit_rate,
    midhaul_control_rate,
    midhaul_peak_rate,
    normalize_modulation,
    slot_duration_s,
)
from utils.errors import DimensioningError

CARRIERS = [
    (AirInterfaceConfig(), 2.48e9, 399e6),
    (AirInterfaceConfig(bandwidth_mhz=200, n_prb=264), 4.97e9, 774e6),
    (AirInterfaceConfig(bandwidth_mhz=400, scs_khz=120, n_prb=264), 9.96e9, 1524e6),
]


class TestFronthaul:
    """Test the fronthaul bit rate formula."""

    @pytest.mark.parametrize("cfg,expected,_", CARRIERS)
    def test_reference_carriers(self, cfg, expected, _):
        """100/200/400 MHz carriers land within 1 % of the reference figures."""
        assert fronthaul_bit_rate(cfg).bps == pytest.approx(expected, rel=0.01)

    def test_control_anchor(self):
        """20 MHz, 64-QAM, 2 layers is the control-rate anchor."""
        cfg = AirInterfaceConfig(bandwidth_mhz=20, n_prb=24, n_layers=2)
        assert fronthaul_control_rate(cfg).bps == pytest.approx(1.856e6)

    def test_control_scales_linearly(self):
        """Doubling bandwidth doubles the control rate."""
        base = AirInterfaceConfig(bandwidth_mhz=20, n_prb=24, n_layers=2)
        wide = AirInterfaceConfig(bandwidth_mhz=40, n_prb=51, n_layers=2)
        assert fronthaul_control_rate(wide).bps == pytest.approx(2 * fronthaul_control_rate(base).bps)

    def test_slot_duration(self):
        """Slots are 1 ms at 15 kHz and shrink with the numerology."""
        assert slot_duration_s(15) == pytest.approx(1e-3)
        assert slot_duration_s(60) == pytest.approx(0.25e-3)
        with pytest.raises(DimensioningError):
            slot_duration_s(45)


class TestMidhaul:
    """Test the midhaul anchors and their scaling."""

    @pytest.mark.parametrize("cfg,_,expected", CARRIERS)
    def test_reference_carriers(self, cfg, _, expected):
        """Peak plus control gives 399/774/1524 Mbps."""
        assert midhaul_bit_rate(cfg).bps == pytest.approx(expected)

    def test_twenty_mhz_two_layers(self):
        """At the anchor point the downlink total is 150 + 24 Mbps."""
        cfg = AirInterfaceConfig(bandwidth_mhz=20, n_prb=24, n_layers=2)
        assert midhaul_peak_rate(cfg).in_mbps == pytest.approx(150.0)
        assert midhaul_bit_rate(cfg).in_mbps == pytest.approx(174.0)

    def test_uplink_anchor(self):
        """Uplink anchors are 50 Mbps peak and 16 Mbps control at 16-QAM, one layer."""
        cfg = AirInterfaceConfig(
            bandwidth_mhz=20, n_prb=24, modulation_order="16qam", n_layers=1, direction=Direction.UPLINK
        )
        assert midhaul_peak_rate(cfg).in_mbps == pytest.approx(50.0)
        assert midhaul_control_rate(cfg).in_mbps == pytest.approx(16.0)

    def test_control_rate_fixed(self):
        """Control traffic does not scale with bandwidth."""
        assert midhaul_control_rate(AirInterfaceConfig()).in_mbps == pytest.approx(24.0)


class TestAirInterfaceConfig:
    """Test parameter validation."""

    def test_default_prb_lookup(self):
        """PRB counts follow the maximum transmission bandwidth tables."""
        assert default_prb(100, 60) == 132
        assert default_prb(200, 60) == 264
        assert default_prb(20, 15) == 106
        with pytest.raises(DimensioningError):
            default_prb(33, 60)

    def test_modulation_names(self):
        """Names and orders normalize to bits per symbol."""
        assert normalize_modulation("64QAM") == 6
        assert normalize_modulation("256-qam") == 8
        assert normalize_modulation(2) == 2
        with pytest.raises(DimensioningError):
            normalize_modulation("8psk")

    def test_invalid_values_rejected(self):
        """Zero bandwidth and unsupported spacing fail validation."""
        with pytest.raises(ValidationError):
            AirInterfaceConfig(bandwidth_mhz=0)
        with pytest.raises(ValidationError):
            AirInterfaceConfig(scs_khz=45)

    def test_data_rate_arithmetic(self):
        """Rates add and order by bits per second."""
        total = DataRate.mbps(150) + DataRate.mbps(24)
        assert total.in_mbps == pytest.approx(174)
        assert DataRate.mbps(1) < DataRate(2e6)
        with pytest.raises(ValueError):
            DataRate(-1)


class TestLatencyBudgets:
    """Test budget constants and overrides."""

    def test_budget_constants(self):
        """OFH 500 us, midhaul and F1-C windows up to 10 ms, near-RT loop 10 ms to 1 s."""
        assert LATENCY_BUDGETS["OFH"].max_one_way == 500e-6
        assert LATENCY_BUDGETS["F1_U"].window == (1.5e-3, 10e-3)
        assert LATENCY_BUDGETS["F1_C"].window == (2e-3, 10e-3)
        assert LATENCY_BUDGETS["E2_nearRT_loop"].loop_window == (10e-3, 1.0)
        assert LATENCY_BUDGETS["A1_nonRT_loop"].loop_window[0] == 1.0

    def test_link_classes_map_to_loop_rows(self):
        """E2 and A1 links are judged by their loop rows."""
        assert budget_key("E2") == "E2_nearRT_loop"
        assert budget_key("A1") == "A1_nonRT_loop"
        with pytest.raises(KeyError):
            budget_key("X2")

    def test_unbounded_classes(self):
        """Classes without a row are unbounded."""
        budget = latency_budget("N2")
        assert not budget.bounded
        assert budget.limit == float("inf")

    def test_override(self):
        """Overrides replace the one-way bound and keep the floor."""
        budget = latency_budget("F1_C", {"F1_C": 20e-3})
        assert budget.max_one_way == 20e-3
        assert budget.floor == 2e-3
        assert latency_budget("OFH", {"F1_C": 20e-3}).max_one_way == 500e-6

    def test_max_hops(self):
        """3.3 ms hops fit three times into 10 ms; exact multiples count."""
        assert max_hops_within_budget(10e-3, 3.3e-3) == 3
        assert max_hops_within_budget(10e-3, 5e-3) == 2
        assert max_hops_within_budget(500e-6, 2e-3) == 0
        with pytest.raises(ValueError):
            max_hops_within_budget(10e-3, 0)


class TestDimensionTable:
    """Test the rows printed by the dimension command."""

    def test_rows(self):
        """Rates and the OFH/F1 budgets are listed with units."""
        rows = {r["quantity"]: r for r in dimension_table(AirInterfaceConfig())}
        assert rows["fronthaul_total"]["value"] == pytest.approx(2.48e9, rel=0.01)
        assert rows["midhaul_total"]["value"] == pytest.approx(399e6)
        assert rows["budget_OFH"]["value"] == 500e-6
        assert rows["budget_OFH"]["unit"] == "s"
        assert {"fronthaul_data", "fronthaul_control", "midhaul_peak", "midhaul_control"} <= set(rows)
