"""Dispersion model, DFG energy bookkeeping, and the two QPM solvers."""

import math

import numpy as np
import pytest

from qifsim import qpm
from qifsim.errors import ConfigError, DomainError, SolverError

SIGNAL_UM = 0.710
PUMP_UM = 1.552
T_DEVICE_K = 352.0

# Frozen against the bundled coefficient set.
N_SIGNAL = 2.1905310170856596
N_PUMP = 2.140023845173866
OUTPUT_UM = 1.308693586698337
DK_AT_14UM = -0.03876736917399996
BULK_PERIOD_352K = 15.323661866883143
BULK_PERIOD_330K = 15.39039856635443


def test_index_frozen_values():
    assert qpm.refractive_index(SIGNAL_UM, T_DEVICE_K) == pytest.approx(N_SIGNAL, rel=1e-14)
    assert qpm.refractive_index(PUMP_UM, T_DEVICE_K) == pytest.approx(N_PUMP, rel=1e-14)


def test_index_plausible_over_validity():
    model = qpm.default_sellmeier()
    lo, hi = model.wavelength_range_um
    tlo, thi = model.temperature_range_k
    for lam in np.linspace(lo, hi, 25):
        for t in np.linspace(tlo, thi, 7):
            n = qpm.refractive_index(float(lam), float(t))
            assert 1.0 < n < 3.0
    # Telecom-band extraordinary index of this material sits near 2.1.
    for lam in (1.26, 1.31, 1.55, 1.62):
        assert 2.0 < qpm.refractive_index(lam, T_DEVICE_K) < 2.3


def test_index_increases_toward_blue():
    grid = np.linspace(0.5, 4.0, 40)
    ns = [qpm.refractive_index(float(lam), T_DEVICE_K) for lam in grid]
    assert all(a > b for a, b in zip(ns, ns[1:]))


@pytest.mark.parametrize(
    "wavelength_um,temperature_k",
    [(6.0, 352.0), (0.3, 352.0), (0.71, 200.0), (0.71, 500.0)],
)
def test_index_rejects_outside_validity(wavelength_um, temperature_k):
    with pytest.raises(DomainError):
        qpm.refractive_index(wavelength_um, temperature_k)


def test_dfg_energy_identity():
    out = qpm.dfg_output_wavelength(SIGNAL_UM, PUMP_UM)
    assert out == pytest.approx(OUTPUT_UM, rel=1e-14)
    assert 1.0 / out == pytest.approx(1.0 / SIGNAL_UM - 1.0 / PUMP_UM, rel=1e-14)


def test_dfg_requires_signal_most_energetic():
    with pytest.raises(DomainError):
        qpm.dfg_output_wavelength(PUMP_UM, SIGNAL_UM)
    with pytest.raises(DomainError):
        qpm.dfg_output_wavelength(1.0, 1.0)
    with pytest.raises(DomainError):
        qpm.dfg_output_wavelength(-0.7, 1.5)


def test_phase_mismatch_frozen_value():
    cfg = qpm.QpmConfig(poling_period_um=14.0, crystal_length_cm=1.0, temperature_k=T_DEVICE_K)
    dk = qpm.phase_mismatch(SIGNAL_UM, PUMP_UM, OUTPUT_UM, cfg)
    assert dk == pytest.approx(DK_AT_14UM, rel=1e-12)


def test_phase_mismatch_grating_term():
    # Halving the period adds exactly one extra grating momentum 2 pi / Lambda.
    cfg = qpm.QpmConfig(14.0, 1.0, T_DEVICE_K)
    cfg_half = qpm.QpmConfig(7.0, 1.0, T_DEVICE_K)
    dk = qpm.phase_mismatch(SIGNAL_UM, PUMP_UM, OUTPUT_UM, cfg)
    dk_half = qpm.phase_mismatch(SIGNAL_UM, PUMP_UM, OUTPUT_UM, cfg_half)
    assert dk_half == pytest.approx(dk - 2.0 * math.pi / 14.0, rel=1e-12)


def test_phase_mismatch_rejects_inconsistent_triple():
    cfg = qpm.QpmConfig(14.0, 1.0, T_DEVICE_K)
    with pytest.raises(DomainError, match="energy conservation"):
        qpm.phase_mismatch(SIGNAL_UM, PUMP_UM, 1.31, cfg)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(poling_period_um=0.0, crystal_length_cm=1.0, temperature_k=352.0),
        dict(poling_period_um=14.0, crystal_length_cm=-1.0, temperature_k=352.0),
        dict(poling_period_um=14.0, crystal_length_cm=1.0, temperature_k=352.0, order=2),
        dict(poling_period_um=14.0, crystal_length_cm=1.0, temperature_k=352.0, order=0),
    ],
)
def test_qpm_config_validation(kwargs):
    with pytest.raises(DomainError):
        qpm.QpmConfig(**kwargs)


def test_solve_poling_period_frozen():
    period = qpm.solve_poling_period(SIGNAL_UM, PUMP_UM, T_DEVICE_K)
    assert period == pytest.approx(BULK_PERIOD_352K, rel=1e-12)
    # Bulk-matched first-order periods for this mixing live in this band.
    assert 10.0 < period < 25.0


def test_solve_poling_period_zeroes_mismatch():
    for t in (300.0, 330.0, 352.0, 400.0, 450.0):
        period = qpm.solve_poling_period(SIGNAL_UM, PUMP_UM, t)
        cfg = qpm.QpmConfig(period, 1.0, t)
        out = qpm.dfg_output_wavelength(SIGNAL_UM, PUMP_UM)
        assert abs(qpm.phase_mismatch(SIGNAL_UM, PUMP_UM, out, cfg)) < 1e-9


def test_third_order_period_triples():
    p1 = qpm.solve_poling_period(SIGNAL_UM, PUMP_UM, T_DEVICE_K, order=1)
    p3 = qpm.solve_poling_period(SIGNAL_UM, PUMP_UM, T_DEVICE_K, order=3)
    assert p3 == pytest.approx(3.0 * p1, rel=1e-12)


def test_solve_poling_period_reports_impossible_sign():
    # Anomalous-dispersion toy model: index grows with wavelength, so the
    # bulk momentum imbalance flips negative and no grating can fix it.
    model = qpm.SellmeierModel(
        name="anomalous-toy",
        a=(4.0, 0.1, 0.2, 0.0, 10.0, -0.2),
        b=(0.0, 0.0, 0.0, 0.0),
        wavelength_range_um=(0.4, 5.0),
        temperature_range_k=(290.0, 480.0),
    )
    with pytest.raises(SolverError, match="negative"):
        qpm.solve_poling_period(SIGNAL_UM, PUMP_UM, T_DEVICE_K, model=model)


def test_acceptance_peak_null_and_bounds():
    length_cm = 1.0
    assert qpm.qpm_acceptance(0.0, length_cm) == 1.0
    first_null = 2.0 * math.pi / (length_cm * 1e4)
    assert qpm.qpm_acceptance(first_null, length_cm) == pytest.approx(0.0, abs=1e-25)
    rng = np.random.default_rng(7)
    for dk in rng.uniform(-1.0, 1.0, 50):
        val = qpm.qpm_acceptance(float(dk), length_cm)
        assert 0.0 <= val <= 1.0
        assert val == qpm.qpm_acceptance(-float(dk), length_cm)


def test_acceptance_narrows_with_length():
    dk = 1e-4
    assert qpm.qpm_acceptance(dk, 4.0) < qpm.qpm_acceptance(dk, 1.0)


def test_acceptance_rejects_nonpositive_length():
    with pytest.raises(DomainError):
        qpm.qpm_acceptance(0.1, 0.0)


def test_solve_pump_roundtrip():
    pump = qpm.solve_pump_wavelength(BULK_PERIOD_352K, SIGNAL_UM, T_DEVICE_K)
    assert pump == pytest.approx(PUMP_UM, abs=1e-9)


def test_solve_pump_picks_red_branch():
    # The mismatch is symmetric in pump <-> output, so a second root exists
    # with the roles swapped; the returned pump must be the red one.
    pump = qpm.solve_pump_wavelength(BULK_PERIOD_352K, SIGNAL_UM, T_DEVICE_K)
    assert pump > 2.0 * SIGNAL_UM
    out = qpm.dfg_output_wavelength(SIGNAL_UM, pump)
    assert pump > out


def test_temperature_tuning_curve_monotonic():
    period = BULK_PERIOD_330K
    pumps = [
        qpm.solve_pump_wavelength(period, SIGNAL_UM, float(t))
        for t in np.linspace(330.0, 370.0, 9)
    ]
    assert pumps[0] == pytest.approx(PUMP_UM, abs=1e-6)
    assert all(a < b for a, b in zip(pumps, pumps[1:]))


def test_solve_pump_no_root_reports_endpoints():
    with pytest.raises(SolverError, match="no sign change"):
        qpm.solve_pump_wavelength(1.0, SIGNAL_UM, T_DEVICE_K)


def test_solve_pump_rejects_signal_inside_bracket():
    with pytest.raises(DomainError):
        qpm.solve_pump_wavelength(BULK_PERIOD_352K, 1.4, T_DEVICE_K)


def test_sellmeier_file_roundtrip(tmp_path):
    import importlib.resources as resources

    bundled = resources.files("qifsim.data").joinpath("lithium_niobate_ne.txt").read_text()
    copy = tmp_path / "coeffs.txt"
    copy.write_text(bundled)
    model = qpm.load_sellmeier_file(copy)
    assert model.index(SIGNAL_UM, T_DEVICE_K) == pytest.approx(N_SIGNAL, rel=1e-14)


def test_sellmeier_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        qpm.load_sellmeier_file(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("a1 5.35583\n")
    with pytest.raises(ConfigError, match="key = value"):
        qpm.load_sellmeier_file(bad)
    incomplete = tmp_path / "incomplete.txt"
    incomplete.write_text("a1 = 5.0\n")
    with pytest.raises(ConfigError, match="missing key"):
        qpm.load_sellmeier_file(incomplete)
