"""Scenario parsing, canonical serialization, and digest stability."""

import dataclasses
import math

import pytest

from qifsim.errors import ConfigError
from qifsim.scenario import (
    load_reference_scenario,
    load_scenario,
    parse_scenario,
    scenario_digest,
    serialize_scenario,
)

REFERENCE_DIGEST = "eb1952feeb4f"


@pytest.fixture(scope="module")
def ref():
    return load_reference_scenario()


def test_reference_scenario_digest_frozen(ref):
    assert scenario_digest(ref) == REFERENCE_DIGEST


def test_reference_scenario_physics(ref):
    assert ref.output_wavelength_um() == pytest.approx(1.308693586698337, rel=1e-12)
    assert ref.eta_qi() == pytest.approx(0.0013291635371188786, rel=1e-12)
    assert ref.pump_coherence_factor() == pytest.approx(0.96, rel=1e-12)
    assert ref.sync_period_ns() == pytest.approx(1e3 / 60.0, rel=1e-14)
    assert ref.noise_rate_hz() == 0.0
    # Fringe statistics are decoupled from the 0.13 percent budget here.
    assert ref.unit_conversion_survival is True
    assert ref.conversion_survival() == 1.0


def test_reference_duration(ref):
    assert ref.duration_s(60_000_000) == pytest.approx(1.0, rel=1e-12)


def test_roundtrip_preserves_scenario(ref):
    text = serialize_scenario(ref)
    again = parse_scenario(text, origin="roundtrip")
    assert again == ref
    assert serialize_scenario(again) == text
    assert scenario_digest(again) == REFERENCE_DIGEST


def test_digest_tracks_content(ref):
    reseeded = dataclasses.replace(ref, master_seed=1)
    assert scenario_digest(reseeded) != REFERENCE_DIGEST


def test_repeater_link_uses_budget_by_default(ref):
    link = ref.repeater_link()
    assert link.interface_efficiency == pytest.approx(ref.eta_qi(), rel=1e-12)
    assert link.length_km == 50.0
    shorter = ref.repeater_link(length_km=10.0)
    assert shorter.length_km == 10.0


def test_load_missing_file_names_path(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_scenario(tmp_path / "absent.scenario")


def test_unknown_section_rejected(ref):
    text = serialize_scenario(ref) + "[extra]\nkey = 1\n"
    with pytest.raises(ConfigError, match="unknown sections"):
        parse_scenario(text)


def test_unknown_key_rejected(ref):
    text = serialize_scenario(ref).replace(
        "[source]\n", "[source]\nunexpected_knob = 3\n"
    )
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_scenario(text)


def test_missing_key_names_section_and_key(ref):
    text = serialize_scenario(ref).replace("repetition_rate_mhz = 60.0\n", "")
    with pytest.raises(ConfigError, match=r"\[source\].*repetition_rate_mhz"):
        parse_scenario(text, origin="probe.scenario")


def test_malformed_number_reports_key(ref):
    text = serialize_scenario(ref).replace(
        "pulse_fwhm_ns = 1.0", "pulse_fwhm_ns = fast"
    )
    with pytest.raises(ConfigError, match="pulse_fwhm_ns"):
        parse_scenario(text)


def test_malformed_bool_reports_key(ref):
    text = serialize_scenario(ref).replace(
        "unit_conversion_survival = true", "unit_conversion_survival = yes"
    )
    with pytest.raises(ConfigError, match="unit_conversion_survival"):
        parse_scenario(text)


def test_chain_stage_needs_unit(ref):
    text = serialize_scenario(ref).replace(
        "in_coupling = 0.45 fraction", "in_coupling = 0.45"
    )
    with pytest.raises(ConfigError, match="fraction"):
        parse_scenario(text)


def test_mismatched_delays_rejected(ref):
    text = serialize_scenario(ref).replace(
        "[analysis_interferometer]\ndelta_tau_ns = 2.2",
        "[analysis_interferometer]\ndelta_tau_ns = 2.4",
    )
    with pytest.raises(ConfigError, match="delays differ"):
        parse_scenario(text)


def test_bad_interface_efficiency_field(ref):
    text = serialize_scenario(ref).replace(
        "interface_efficiency = from_budget", "interface_efficiency = budget"
    )
    with pytest.raises(ConfigError, match="from_budget"):
        parse_scenario(text)


def test_bad_length_grid(ref):
    text = serialize_scenario(ref).replace(
        "length_grid_km = 2.0:100.0:50", "length_grid_km = 2.0:100.0"
    )
    with pytest.raises(ConfigError, match="start:stop:n"):
        parse_scenario(text)


def test_explicit_interface_efficiency_roundtrip(ref):
    text = serialize_scenario(ref).replace(
        "interface_efficiency = from_budget", "interface_efficiency = 0.25"
    )
    s = parse_scenario(text)
    assert s.repeater.interface_efficiency == 0.25
    assert s.repeater_link().interface_efficiency == 0.25
    assert parse_scenario(serialize_scenario(s)) == s


def test_noise_inf_extinction_roundtrip(ref):
    assert math.isinf(ref.noise.pump_extinction_db)
    text = serialize_scenario(ref)
    assert "pump_extinction_db = inf" in text
    assert math.isinf(parse_scenario(text).noise.pump_extinction_db)
