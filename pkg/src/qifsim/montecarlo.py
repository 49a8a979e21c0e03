"""Stochastic end-to-end experiment engine.

Generates weak coherent pulses, walks each photon through preparation,
conversion, analysis, and detection, and produces the arrival-time
histogram, the windowed fringe scan, and the efficiency sweep, with
Poisson error bars. Every run is reproducible: all randomness flows from
counter-based substreams derived from the scenario's master seed, a role
tag, and the grid value of the point, so results are independent of the
order in which points are simulated.

The analytic counterparts (``expected_fringe``, the budget in
``conversion``) use the same scenario; ``validate_against_oracle`` checks
the two against each other.
"""

from __future__ import annotations

import hashlib
import math
import time
import zlib
from dataclasses import dataclass, replace

import numpy as np

from .conversion import pump_coherence_visibility_factor
from .detection import TacHistogram, build_histogram, simulate_detection
from .errors import DomainError, QifsimError
from .scenario import Scenario, scenario_digest
from .timebin import analyze, apply_conversion_phase, prepare_qubit

__all__ = [
    "FringePoint",
    "EfficiencyPoint",
    "RunResult",
    "ExpectedFringe",
    "ValidationReport",
    "substream",
    "sample_photon_numbers",
    "run_fringe_scan",
    "run_efficiency_sweep",
    "expected_fringe",
    "validate_against_oracle",
]


def substream(master_seed: int, tag: str, value: float = 0.0) -> np.random.Generator:
    """Independent Philox stream for one grid point.

    Keyed by the master seed, a role tag, and the bit pattern of the grid
    value (phase, power, ...), not by the point's position in the sweep, so
    permuting a grid never changes any point's draw.
    """
    bits = int(np.float64(value).view(np.uint64))
    seq = np.random.SeedSequence((master_seed, zlib.crc32(tag.encode()), bits))
    return np.random.Generator(np.random.Philox(seq))


def sample_photon_numbers(
    mean_photon_number: float, pulses: int, rng: np.random.Generator
) -> np.ndarray:
    """Per-pulse photon numbers of a weak coherent source: Poisson(<n>)."""
    if mean_photon_number < 0:
        raise DomainError(f"mean photon number must be >= 0, got {mean_photon_number}")
    if pulses < 0:
        raise DomainError(f"pulse count must be >= 0, got {pulses}")
    return rng.poisson(mean_photon_number, pulses)


@dataclass(frozen=True)
class FringePoint:
    """One phase point of the scan: window counts and Poisson error."""

    phase_rad: float
    counts: int
    stat_error: float


@dataclass(frozen=True)
class EfficiencyPoint:
    """One pump power: analytic budget next to the Monte Carlo estimate."""

    power_w: float
    eta_analytic: float
    eta_mc: float
    stat_error: float


@dataclass(frozen=True)
class RunResult:
    """Everything a fringe scan produces.

    Attributes:
        histogram: arrival-time histogram merged over all phase points.
        fringe: per-phase window counts with statistical errors.
        background_estimates: per-phase counts in a window of equal width
            parked half a sync period away from the signal peak.
        eta_realized: per-photon conversion survival actually applied in
            this run (1.0 when the scenario decouples statistics from the
            budget; the physical budget otherwise).
        metadata: deterministic provenance (seed, scenario digest, grid
            sizes). Wall-clock time lives in ``wall_clock_s`` and is
            deliberately outside the deterministic content.
    """

    histogram: TacHistogram
    fringe: tuple[FringePoint, ...]
    background_estimates: tuple[int, ...]
    eta_realized: float
    metadata: dict
    wall_clock_s: float

    def fringe_points(self) -> np.ndarray:
        """(N, 2) array of (phase, counts) for the visibility fit."""
        return np.array([[p.phase_rad, p.counts] for p in self.fringe])

    def mean_background(self) -> float:
        if not self.background_estimates:
            return 0.0
        return float(np.mean(self.background_estimates))

    def content_digest(self) -> str:
        """SHA-256 over the deterministic content (wall clock excluded)."""
        h = hashlib.sha256()
        h.update(self.histogram.counts.tobytes())
        h.update(np.float64(self.histogram.bin_width_ps).tobytes())
        h.update(np.int64(self.histogram.sync_pulses).tobytes())
        fringe = [(p.phase_rad, p.counts, p.stat_error) for p in self.fringe]
        h.update(np.asarray(fringe, dtype=np.float64).tobytes())
        h.update(np.asarray(self.background_estimates, dtype=np.int64).tobytes())
        h.update(np.float64(self.eta_realized).tobytes())
        h.update(repr(sorted(self.metadata.items())).encode())
        return h.hexdigest()


def _slot_terms(s: Scenario) -> tuple[float, float, float, float]:
    """Constant slot probabilities and the middle-slot fringe terms.

    Returns (p_early, p_late, mid_offset, mid_amplitude) per photon, taken
    from probe analyses at zero and pi phase difference so this stays a
    single source of truth with the amplitude algebra. The amplitude
    already carries the scenario's extra visibility penalty; the pump-phase
    mechanism supplies the rest per pulse.
    """
    qubit = prepare_qubit(s.preparation)
    qubit = apply_conversion_phase(qubit, s.extra_visibility_penalty)
    alpha = s.preparation.phase_rad
    aligned = analyze(qubit, replace(s.analysis, phase_rad=alpha))
    opposed = analyze(qubit, replace(s.analysis, phase_rad=alpha + math.pi))
    p_early = aligned.slots[0][1]
    p_late = aligned.slots[2][1]
    mid_hi = aligned.slots[1][1]
    mid_lo = opposed.slots[1][1]
    return p_early, p_late, 0.5 * (mid_hi + mid_lo), 0.5 * (mid_hi - mid_lo)


def _cw_survival(s: Scenario) -> float:
    """Forward-port passage probability of a cw photon through both devices."""
    prep = 2.0 * s.preparation.forward_path_amplitude() ** 2
    ana = 2.0 * s.analysis.forward_path_amplitude() ** 2
    return prep * ana


def _window_counts(times_ns: np.ndarray, period_ns: float, center_ns: float, width_ns: float) -> int:
    """Counts whose folded arrival lies in a window, wrap-safe."""
    lo = (center_ns - 0.5 * width_ns) % period_ns
    folded = np.mod(times_ns - lo, period_ns)
    return int(np.count_nonzero(folded < width_ns))


def _simulate_point(
    s: Scenario, beta_rad: float, pulses: int, rng: np.random.Generator
) -> tuple[TacHistogram, int, int]:
    """One phase point: returns (histogram, window counts, background counts)."""
    period = s.sync_period_ns()
    delta_tau = s.analysis.delta_tau_ns
    duration_s = s.duration_s(pulses)
    conv_survival = s.conversion_survival()
    p_early, p_late, mid_offset, mid_amp = _slot_terms(s)
    alpha = s.preparation.phase_rad

    photons_per_pulse = sample_photon_numbers(s.source.mean_photon_number, pulses, rng)
    pulse_idx = np.repeat(np.arange(pulses, dtype=np.int64), photons_per_pulse)
    n_photons = pulse_idx.size

    # Pump phase drift between the two bins of each pulse: a Wiener
    # increment of variance 2 dt / tau_c. The absolute pump phase is common
    # to both bins and drops out, so only this increment is realized.
    tau_c = s.pump.coherence_time_ns
    if math.isfinite(tau_c):
        drift = rng.normal(0.0, math.sqrt(2.0 * delta_tau / tau_c), pulses)
    else:
        drift = np.zeros(pulses)

    p_mid = mid_offset + mid_amp * np.cos(alpha + drift - beta_rad)
    p_mid_photon = p_mid[pulse_idx]

    u = rng.random(n_photons)
    slot = np.full(n_photons, -1, dtype=np.int8)
    slot[u < p_early] = 0
    mid_mask = (u >= p_early) & (u < p_early + p_mid_photon)
    slot[mid_mask] = 1
    late_mask = (u >= p_early + p_mid_photon) & (u < p_early + p_mid_photon + p_late)
    slot[late_mask] = 2

    kept = slot >= 0
    sigma_pulse = s.source.pulse_fwhm_ns * (1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0))))
    n_kept = int(np.count_nonzero(kept))
    if s.source.pulse_shape == "gaussian":
        emission = rng.normal(0.0, sigma_pulse, n_kept) if sigma_pulse > 0 else np.zeros(n_kept)
    else:
        half = 0.5 * s.source.pulse_fwhm_ns
        emission = rng.uniform(-half, half, n_kept) if half > 0 else np.zeros(n_kept)
    signal_times = (
        pulse_idx[kept] * period
        + s.tac_offset_ns
        + slot[kept].astype(float) * delta_tau
        + emission
    )

    n_cw = rng.poisson(s.source.cw_background_fraction * s.source.mean_photon_number * pulses)
    cw_times = rng.uniform(0.0, duration_s * 1e9, n_cw)

    times = np.concatenate([signal_times, cw_times])
    survival = np.concatenate(
        [
            np.full(signal_times.size, conv_survival),
            np.full(n_cw, conv_survival * _cw_survival(s)),
        ]
    )
    order = np.argsort(times, kind="stable")
    arrivals = np.column_stack([times[order], survival[order]])

    detections = simulate_detection(arrivals, s.detector, duration_s, rng)
    hist = build_histogram(
        detections, period, s.histogram_bin_width_ps, origin_ns=0.0, sync_pulses=pulses
    )
    window = _window_counts(detections, period, s.sca.center_ns, s.sca.width_ns)
    background = _window_counts(
        detections, period, s.sca.center_ns + 0.5 * period, s.sca.width_ns
    )
    return hist, window, background


def run_fringe_scan(s: Scenario, phases_rad, pulses: int | None = None) -> RunResult:
    """Scan the analysis phase and count windowed arrivals at each point.

    Args:
        s: scenario; its ``pulses_per_point`` is used unless overridden.
        phases_rad: at least two analysis phases.
        pulses: optional override of pulses per point.

    Deterministic for a given scenario and master seed; each phase point
    draws from its own substream.
    """
    phases = np.asarray(phases_rad, dtype=float)
    if phases.size < 2:
        raise DomainError(f"need at least 2 phase points, got {phases.size}")
    n_pulses = s.pulses_per_point if pulses is None else pulses
    if n_pulses < 0:
        raise DomainError(f"pulses must be >= 0, got {n_pulses}")

    started = time.perf_counter()
    merged: TacHistogram | None = None
    fringe: list[FringePoint] = []
    backgrounds: list[int] = []
    for beta in phases:
        rng = substream(s.master_seed, "fringe-scan", beta)
        try:
            hist, window, background = _simulate_point(s, float(beta), n_pulses, rng)
        except QifsimError as exc:
            raise type(exc)(f"phase point beta = {beta:.6g} rad: {exc}") from exc
        merged = hist if merged is None else merged.merged_with(hist)
        fringe.append(
            FringePoint(
                phase_rad=float(beta), counts=window, stat_error=math.sqrt(window)
            )
        )
        backgrounds.append(background)

    assert merged is not None
    return RunResult(
        histogram=merged,
        fringe=tuple(fringe),
        background_estimates=tuple(backgrounds),
        eta_realized=s.conversion_survival(),
        metadata={
            "master_seed": s.master_seed,
            "scenario_digest": scenario_digest(s),
            "pulses_per_point": n_pulses,
            "phase_points": int(phases.size),
        },
        wall_clock_s=time.perf_counter() - started,
    )


def run_efficiency_sweep(
    s: Scenario, powers_w, photons: int | None = None
) -> tuple[EfficiencyPoint, ...]:
    """Conversion budget versus pump power, analytic and Monte Carlo.

    The Monte Carlo column sends ``photons`` (default: the scenario's
    ``mc_photons_per_point``) through the three loss stages as independent
    binomial thinnings. This sweep always measures the physical budget; the
    fringe-scan statistics switch has no effect here.
    """
    results = []
    n = s.mc_photons_per_point if photons is None else photons
    if n < 0:
        raise DomainError(f"photon count must be >= 0, got {n}")
    pre_t = s.chain_pre.transmission()
    post_t = s.chain_post.transmission()
    for power in np.asarray(powers_w, dtype=float):
        if power < 0:
            raise DomainError(f"pump power must be >= 0, got {power} W")
        rng = substream(s.master_seed, "efficiency-sweep", power)
        eta_internal = s.internal_efficiency(float(power))
        survived = rng.binomial(
            rng.binomial(rng.binomial(n, pre_t), eta_internal), post_t
        )
        results.append(
            EfficiencyPoint(
                power_w=float(power),
                eta_analytic=s.eta_qi(float(power)),
                eta_mc=survived / n if n else 0.0,
                stat_error=math.sqrt(survived) / n if n else 0.0,
            )
        )
    return tuple(results)


@dataclass(frozen=True)
class ExpectedFringe:
    """Analytic prediction of the windowed scan, component by component."""

    phases_rad: np.ndarray
    counts: np.ndarray
    signal_offset: float
    signal_amplitude: float
    background: float
    v_net: float
    v_raw: float


def _gaussian_capture(mu: float, sigma: float, lo: float, hi: float, period: float) -> float:
    """Window capture of a Gaussian peak folded on the sync period."""
    total = 0.0
    for k in (-1, 0, 1):
        m = mu + k * period
        if sigma == 0:
            total += 1.0 if lo <= m < hi else 0.0
        else:
            z = 1.0 / (sigma * math.sqrt(2.0))
            total += 0.5 * (math.erf((hi - m) * z) - math.erf((lo - m) * z))
    return total


def expected_fringe(s: Scenario, phases_rad, pulses: int | None = None) -> ExpectedFringe:
    """Closed-form expectation of ``run_fringe_scan``'s window counts.

    Assumes Gaussian pulses (the square shape has no closed-form window
    capture here) and a dead-time-free detector; the scenario's dead time
    is ignored, which is exact at zero and an approximation otherwise.

    Raises:
        DomainError: square pulse shape.
    """
    if s.source.pulse_shape != "gaussian":
        raise DomainError("expected_fringe only covers gaussian pulse shapes")
    phases = np.asarray(phases_rad, dtype=float)
    n_pulses = s.pulses_per_point if pulses is None else pulses
    period = s.sync_period_ns()
    delta_tau = s.analysis.delta_tau_ns
    lo, hi = s.sca.bounds()

    fwhm_to_sigma = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    sigma = math.hypot(
        s.source.pulse_fwhm_ns * fwhm_to_sigma, s.detector.jitter_sigma_ns()
    )
    captures = [
        _gaussian_capture(s.tac_offset_ns + i * delta_tau, sigma, lo, hi, period)
        for i in range(3)
    ]

    p_early, p_late, mid_offset, mid_amp = _slot_terms(s)
    pump_factor = pump_coherence_visibility_factor(
        s.preparation.delta_tau_ns, s.pump.coherence_time_ns
    )

    scale = n_pulses * s.source.mean_photon_number * s.conversion_survival() * s.detector.quantum_efficiency
    signal_offset = scale * (
        p_early * captures[0] + p_late * captures[2] + mid_offset * captures[1]
    )
    signal_amplitude = scale * mid_amp * pump_factor * captures[1]

    duration_s = s.duration_s(n_pulses)
    window_fraction = s.sca.width_ns / period
    dark_counts = s.detector.dark_count_rate_hz * duration_s * window_fraction
    cw_counts = (
        s.source.cw_background_fraction
        * s.source.mean_photon_number
        * n_pulses
        * _cw_survival(s)
        * s.conversion_survival()
        * s.detector.quantum_efficiency
        * window_fraction
    )
    background = dark_counts + cw_counts

    alpha = s.preparation.phase_rad
    counts = background + signal_offset + signal_amplitude * np.cos(alpha - phases)
    v_net = signal_amplitude / signal_offset if signal_offset > 0 else 0.0
    v_raw = (
        signal_amplitude / (signal_offset + background)
        if signal_offset + background > 0
        else 0.0
    )
    return ExpectedFringe(
        phases_rad=phases,
        counts=counts,
        signal_offset=signal_offset,
        signal_amplitude=signal_amplitude,
        background=background,
        v_net=v_net,
        v_raw=v_raw,
    )


@dataclass(frozen=True)
class ValidationReport:
    """Pointwise Monte Carlo versus analytic-oracle comparison."""

    chi2_per_dof: float | None
    flagged_phases: tuple[float, ...]
    n_points: int
    note: str
    rows: tuple[tuple[float, float, float, float], ...]
    """(phase, observed, expected, z-score) per point."""


def validate_against_oracle(
    s: Scenario,
    phases_rad,
    pulses: int | None = None,
    oracle_v_net: float | None = None,
) -> ValidationReport:
    """Cross-check the stochastic engine against the analytic fringe.

    Any point off by more than 4 sigma is flagged; the summary statistic is
    chi-square per point under Poisson errors. ``oracle_v_net`` substitutes
    a foreign net visibility into the oracle, which is how the comparison's
    sensitivity is itself tested. Discrepancies are report content, not
    errors.
    """
    phases = np.asarray(phases_rad, dtype=float)
    n_pulses = s.pulses_per_point if pulses is None else pulses
    run = run_fringe_scan(s, phases, pulses=n_pulses)
    if n_pulses == 0:
        return ValidationReport(
            chi2_per_dof=None,
            flagged_phases=(),
            n_points=int(phases.size),
            note="zero pulses per point: no events, chi-square undefined",
            rows=tuple(
                (p.phase_rad, float(p.counts), 0.0, 0.0) for p in run.fringe
            ),
        )
    exp = expected_fringe(s, phases, pulses=n_pulses)
    expected = exp.counts
    if oracle_v_net is not None:
        amplitude = exp.signal_offset * oracle_v_net
        expected = (
            exp.background
            + exp.signal_offset
            + amplitude * np.cos(s.preparation.phase_rad - phases)
        )
    observed = np.array([p.counts for p in run.fringe], dtype=float)
    sigma = np.sqrt(np.maximum(expected, 1.0))
    z = (observed - expected) / sigma
    chi2 = float(np.mean(z**2))
    flagged = tuple(float(p) for p, zi in zip(phases, z) if abs(zi) > 4.0)
    rows = tuple(
        (float(p), float(o), float(e), float(zi))
        for p, o, e, zi in zip(phases, observed, expected, z)
    )
    return ValidationReport(
        chi2_per_dof=chi2,
        flagged_phases=flagged,
        n_points=int(phases.size),
        note="",
        rows=rows,
    )
