"""Single-photon detector model and arrival-time analysis.

Covers the detector stochastics (efficiency thinning, dark counts, Gaussian
timing jitter, non-paralyzable dead time, optional afterpulsing), the
arrival-time histogram folded on the laser sync, windowed peak selection,
and the estimators used on top: dead-time correction, rate unfolding
through a calibrated attenuator, peak FWHM, and fringe visibility.

Times are nanoseconds unless a suffix says otherwise; rates are hertz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heapify, heappop, heappush

import numpy as np

from .errors import DomainError, FitError

__all__ = [
    "DetectorModel",
    "TacHistogram",
    "ScaWindow",
    "ScaResult",
    "VisibilityFit",
    "FWHM_TO_SIGMA",
    "dead_time_observe",
    "dead_time_correct",
    "unfold_photon_rate",
    "simulate_detection",
    "build_histogram",
    "peak_fwhm",
    "sca_counts",
    "extract_visibility",
    "visibility_max_min",
]

# FWHM of a Gaussian = 2 sqrt(2 ln 2) sigma.
FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class DetectorModel:
    """Free-running single-photon avalanche detector.

    Attributes:
        quantum_efficiency: detection probability per arriving photon.
        dark_count_rate_hz: observed-free-running dark rate before dead time.
        dead_time_us: hold-off after each accepted event (non-paralyzable).
        jitter_fwhm_ps: FWHM of the Gaussian timing jitter.
        afterpulse_probability: chance an accepted event spawns one
            afterpulse; the delay is dead time plus an exponential of the
            same scale. Off by default; long hold-offs exist precisely to
            suppress it.
    """

    quantum_efficiency: float
    dark_count_rate_hz: float = 0.0
    dead_time_us: float = 0.0
    jitter_fwhm_ps: float = 0.0
    afterpulse_probability: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise DomainError(
                f"quantum efficiency must be in [0, 1], got {self.quantum_efficiency}"
            )
        if self.dark_count_rate_hz < 0:
            raise DomainError(f"dark rate must be >= 0, got {self.dark_count_rate_hz}")
        if self.dead_time_us < 0:
            raise DomainError(f"dead time must be >= 0, got {self.dead_time_us}")
        if self.jitter_fwhm_ps < 0:
            raise DomainError(f"jitter must be >= 0, got {self.jitter_fwhm_ps}")
        if not 0.0 <= self.afterpulse_probability <= 1.0:
            raise DomainError(
                f"afterpulse probability must be in [0, 1], got {self.afterpulse_probability}"
            )
        if self.afterpulse_probability > 0 and self.dead_time_us == 0:
            raise DomainError("afterpulse model needs a positive dead time as its time scale")

    def jitter_sigma_ns(self) -> float:
        return self.jitter_fwhm_ps * 1e-3 * FWHM_TO_SIGMA


@dataclass(frozen=True)
class TacHistogram:
    """Arrival-time histogram folded on the sync period.

    Attributes:
        bin_width_ps: bin width.
        origin_ns: time of the left edge of bin 0 within the folded period.
        counts: per-bin event counts.
        sync_pulses: sync (laser) pulses integrated over, 0 if unknown.
    """

    bin_width_ps: float
    origin_ns: float
    counts: np.ndarray
    sync_pulses: int = 0

    def __post_init__(self) -> None:
        if self.bin_width_ps <= 0:
            raise DomainError(f"bin width must be > 0, got {self.bin_width_ps}")
        if np.any(self.counts < 0):
            raise DomainError("histogram counts must be >= 0")

    def total_counts(self) -> int:
        return int(self.counts.sum())

    def bin_centers_ns(self) -> np.ndarray:
        width_ns = self.bin_width_ps * 1e-3
        return self.origin_ns + (np.arange(self.counts.size) + 0.5) * width_ns

    def bin_edges_ns(self) -> np.ndarray:
        width_ns = self.bin_width_ps * 1e-3
        return self.origin_ns + np.arange(self.counts.size + 1) * width_ns

    def merged_with(self, other: "TacHistogram") -> "TacHistogram":
        """Combine two histograms of identical layout (associative)."""
        if (
            self.bin_width_ps != other.bin_width_ps
            or self.origin_ns != other.origin_ns
            or self.counts.size != other.counts.size
        ):
            raise DomainError("histogram layouts differ; cannot merge")
        return TacHistogram(
            bin_width_ps=self.bin_width_ps,
            origin_ns=self.origin_ns,
            counts=self.counts + other.counts,
            sync_pulses=self.sync_pulses + other.sync_pulses,
        )


@dataclass(frozen=True)
class ScaWindow:
    """Temporal selection window of a single-channel analyzer."""

    center_ns: float
    width_ns: float

    def __post_init__(self) -> None:
        if self.width_ns <= 0:
            raise DomainError(f"window width must be > 0, got {self.width_ns}")

    def bounds(self) -> tuple[float, float]:
        half = 0.5 * self.width_ns
        return self.center_ns - half, self.center_ns + half


@dataclass(frozen=True)
class ScaResult:
    """Window counts plus the modeled side-peak contamination.

    ``leakage_fraction`` is None when no peak model was supplied.
    """

    counts: int
    leakage_fraction: float | None = None


def dead_time_observe(rate_true_hz: float, dead_time_us: float) -> float:
    """Observed rate of a non-paralyzable detector, R / (1 + R tau)."""
    if rate_true_hz < 0:
        raise DomainError(f"rate must be >= 0, got {rate_true_hz}")
    if dead_time_us < 0:
        raise DomainError(f"dead time must be >= 0, got {dead_time_us}")
    return rate_true_hz / (1.0 + rate_true_hz * dead_time_us * 1e-6)


def dead_time_correct(rate_obs_hz: float, dead_time_us: float) -> float:
    """True rate from an observed one, R_obs / (1 - R_obs tau).

    Exact inverse of non-paralyzable thinning.

    Raises:
        DomainError: R_obs tau >= 1; the detector is saturated and no
            finite true rate reproduces the observation.
    """
    if rate_obs_hz < 0:
        raise DomainError(f"rate must be >= 0, got {rate_obs_hz}")
    if dead_time_us < 0:
        raise DomainError(f"dead time must be >= 0, got {dead_time_us}")
    occupancy = rate_obs_hz * dead_time_us * 1e-6
    if occupancy >= 1.0:
        raise DomainError(
            f"observed rate {rate_obs_hz} Hz saturates a {dead_time_us} us dead "
            f"time (occupancy {occupancy:.3g} >= 1); no finite true rate"
        )
    return rate_obs_hz / (1.0 - occupancy)


def unfold_photon_rate(
    rate_obs_hz: float,
    rate_dark_obs_hz: float,
    det: DetectorModel,
    attenuation_db: float,
) -> float:
    """Photon rate upstream of a calibrated attenuator.

    Dead-time corrects both the total and the dark observation, subtracts,
    divides out the quantum efficiency, and scales back through the
    attenuation: (corr(R) - corr(R_dark)) / QE * 10^(A/10).

    Raises:
        DomainError: non-positive efficiency, negative attenuation, or a
            dark rate exceeding the total (nothing left to unfold).
    """
    if det.quantum_efficiency <= 0:
        raise DomainError("quantum efficiency must be > 0 to unfold a photon rate")
    if attenuation_db < 0:
        raise DomainError(f"attenuation must be >= 0 dB, got {attenuation_db}")
    net = dead_time_correct(rate_obs_hz, det.dead_time_us) - dead_time_correct(
        rate_dark_obs_hz, det.dead_time_us
    )
    if net < 0:
        raise DomainError(
            f"dark rate exceeds total rate ({rate_dark_obs_hz} > {rate_obs_hz} Hz "
            f"observed); measurement carries no signal"
        )
    return net / det.quantum_efficiency * 10.0 ** (attenuation_db / 10.0)


def _dead_time_pass(
    times_ns: np.ndarray, det: DetectorModel, rng: np.random.Generator, horizon_ns: float
) -> np.ndarray:
    """Sequential non-paralyzable gating, optionally spawning afterpulses."""
    dead_ns = det.dead_time_us * 1e3
    p_after = det.afterpulse_probability
    accepted: list[float] = []
    blocked_until = -math.inf
    if p_after == 0.0:
        for t in times_ns:
            if t >= blocked_until:
                accepted.append(t)
                blocked_until = t + dead_ns
        return np.asarray(accepted)
    # Afterpulse candidates interleave with real events; a heap keeps the
    # merged stream ordered without rebuilding the array. Spawning stops at
    # the observation horizon, which also terminates the cascade at
    # afterpulse probability 1.
    heap = list(times_ns)
    heapify(heap)
    while heap:
        t = heappop(heap)
        if t < blocked_until:
            continue
        accepted.append(t)
        blocked_until = t + dead_ns
        if rng.random() < p_after:
            candidate = t + dead_ns + rng.exponential(dead_ns)
            if candidate < horizon_ns:
                heappush(heap, candidate)
    return np.asarray(accepted)


def simulate_detection(
    arrivals,
    det: DetectorModel,
    duration_s: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Stochastic detector response to a photon arrival stream.

    Args:
        arrivals: array-like of (time_ns, survival_probability) rows, time
            sorted; a 1-D array is taken as times with unit survival.
        det: detector parameters.
        duration_s: observation window for dark-count generation, seconds.
        rng: random generator (caller owns the substream).

    Returns:
        Sorted detection timestamps in ns. Each arrival fires with
        probability QE x survival, detected times are smeared by the
        Gaussian jitter, homogeneous Poisson dark counts are merged in, and
        a non-paralyzable dead time gates the combined stream.

    Raises:
        DomainError: arrival times not sorted, or negative duration.
    """
    if duration_s < 0:
        raise DomainError(f"duration must be >= 0, got {duration_s} s")
    arr = np.asarray(arrivals, dtype=float)
    if arr.size == 0:
        times = np.empty(0)
        survival = np.empty(0)
    elif arr.ndim == 1:
        times, survival = arr, np.ones_like(arr)
    elif arr.ndim == 2 and arr.shape[1] == 2:
        times, survival = arr[:, 0], arr[:, 1]
    else:
        raise DomainError(f"arrivals must be (N,) times or (N, 2) pairs, got shape {arr.shape}")
    if times.size and np.any(np.diff(times) < 0):
        raise DomainError("arrival times must be sorted ascending")
    if survival.size and (survival.min() < 0 or survival.max() > 1):
        raise DomainError("survival probabilities must be in [0, 1]")

    fired = times[rng.random(times.size) < det.quantum_efficiency * survival]
    sigma = det.jitter_sigma_ns()
    if sigma > 0 and fired.size:
        fired = fired + rng.normal(0.0, sigma, fired.size)

    n_dark = rng.poisson(det.dark_count_rate_hz * duration_s)
    darks = rng.uniform(0.0, duration_s * 1e9, n_dark)

    stream = np.sort(np.concatenate([fired, darks]))
    if det.dead_time_us == 0.0 and det.afterpulse_probability == 0.0:
        return stream
    horizon_ns = max(duration_s * 1e9, float(stream[-1]) if stream.size else 0.0)
    return _dead_time_pass(stream, det, rng, horizon_ns)


def build_histogram(
    detections_ns,
    sync_period_ns: float,
    bin_width_ps: float,
    origin_ns: float = 0.0,
    sync_pulses: int = 0,
) -> TacHistogram:
    """Fold detection timestamps on the sync period and bin them.

    The folded coordinate is (t - origin) mod period; total counts are
    conserved for every bin width.
    """
    if sync_period_ns <= 0:
        raise DomainError(f"sync period must be > 0, got {sync_period_ns}")
    width_ns = bin_width_ps * 1e-3
    if width_ns <= 0:
        raise DomainError(f"bin width must be > 0, got {bin_width_ps}")
    n_bins = max(1, math.ceil(sync_period_ns / width_ns - 1e-9))
    t = np.asarray(detections_ns, dtype=float)
    folded = np.mod(t - origin_ns, sync_period_ns)
    idx = np.minimum((folded / width_ns).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    return TacHistogram(
        bin_width_ps=bin_width_ps, origin_ns=origin_ns, counts=counts, sync_pulses=sync_pulses
    )


def peak_fwhm(hist: TacHistogram, peak_seed_ns: float, search_half_width_ns: float = 1.5) -> float:
    """Full width at half maximum of the peak nearest the seed position.

    Finds the local maximum within the search range and walks outward to
    the half-maximum crossings, locating each by linear interpolation
    between bin centers.

    Raises:
        DomainError: the identified peak bin holds fewer than 100 counts
            (stated in the error), or the crossings lie outside the
            histogram.
    """
    centers = hist.bin_centers_ns()
    counts = hist.counts.astype(float)
    in_range = np.abs(centers - peak_seed_ns) <= search_half_width_ns
    if not np.any(in_range):
        raise DomainError(
            f"no histogram bins within {search_half_width_ns} ns of {peak_seed_ns} ns"
        )
    region = np.flatnonzero(in_range)
    peak_idx = region[np.argmax(counts[region])]
    peak = counts[peak_idx]
    if peak < 100:
        raise DomainError(
            f"peak near {peak_seed_ns} ns has only {int(peak)} counts in its "
            f"maximum bin; need >= 100 for a stable width"
        )
    half = 0.5 * peak

    def crossing(step: int) -> float:
        i = peak_idx
        while 0 <= i + step < counts.size and counts[i + step] >= half:
            i += step
        j = i + step
        if not 0 <= j < counts.size:
            raise DomainError(
                f"half-maximum crossing walks off the histogram edge near "
                f"{peak_seed_ns} ns; peak is truncated"
            )
        # Linear interpolation between the last bin >= half and first < half.
        c1, c2 = counts[i], counts[j]
        frac = (c1 - half) / (c1 - c2)
        return centers[i] + frac * (centers[j] - centers[i])

    return crossing(+1) - crossing(-1)


def _gaussian_window_capture(mu_ns: float, sigma_ns: float, lo: float, hi: float) -> float:
    """P(lo <= X < hi) for X ~ Normal(mu, sigma); tolerates sigma = 0."""
    if sigma_ns == 0:
        return 1.0 if lo <= mu_ns < hi else 0.0
    z = 1.0 / (sigma_ns * math.sqrt(2.0))
    return 0.5 * (math.erf((hi - mu_ns) * z) - math.erf((lo - mu_ns) * z))


def sca_counts(
    source,
    window: ScaWindow,
    sync_period_ns: float | None = None,
    peak_sigma_ns: float | None = None,
    peak_separation_ns: float | None = None,
    side_to_central_ratio: float = 0.5,
) -> ScaResult:
    """Counts inside the SCA window, with a side-peak leakage estimate.

    Args:
        source: a TacHistogram (bins counted by center position) or raw
            detection timestamps (folded when ``sync_period_ns`` is given).
        window: selection window, assumed centered on the middle peak for
            the leakage model.
        sync_period_ns: folding period for raw timestamps.
        peak_sigma_ns: Gaussian width of each arrival peak; enables the
            leakage estimate together with ``peak_separation_ns``.
        peak_separation_ns: spacing of the side peaks from the central one.
        side_to_central_ratio: area of each side peak relative to the
            central one; 1/2 for a balanced interferometer pair at
            mid-fringe.

    Returns:
        ScaResult with the integer window count and, when the peak model is
        supplied, the modeled fraction of window counts that leaked in from
        the side peaks (None otherwise).
    """
    lo, hi = window.bounds()
    if isinstance(source, TacHistogram):
        centers = source.bin_centers_ns()
        inside = (centers >= lo) & (centers < hi)
        count = int(source.counts[inside].sum())
    else:
        t = np.asarray(source, dtype=float)
        if sync_period_ns is not None:
            t = np.mod(t, sync_period_ns)
        count = int(np.count_nonzero((t >= lo) & (t < hi)))

    leakage = None
    if peak_sigma_ns is not None and peak_separation_ns is not None:
        if peak_sigma_ns <= 0 or peak_separation_ns <= 0:
            raise DomainError("peak model needs positive sigma and separation")
        central = _gaussian_window_capture(window.center_ns, peak_sigma_ns, lo, hi)
        sides = sum(
            _gaussian_window_capture(window.center_ns + s * peak_separation_ns, peak_sigma_ns, lo, hi)
            for s in (-1.0, 1.0)
        )
        weighted_sides = side_to_central_ratio * sides
        total = central + weighted_sides
        leakage = weighted_sides / total if total > 0 else 0.0
    return ScaResult(counts=count, leakage_fraction=leakage)


@dataclass(frozen=True)
class VisibilityFit:
    """Sinusoid fit N(beta) = offset + amplitude cos(beta - phase_offset)."""

    v_raw: float
    v_net: float
    amplitude: float
    offset: float
    phase_offset_rad: float
    residual_rms: float


def extract_visibility(
    points,
    background: float = 0.0,
    max_relative_residual: float = 0.2,
) -> VisibilityFit:
    """Fringe visibility by least-squares sinusoid fit.

    Fits N(beta) = A + C cos(beta - beta0) over the (phase, counts) points
    and reports V_raw = C/A and V_net = C/(A - B) for the supplied
    per-point background B.

    Raises:
        DomainError: fewer than 3 distinct phases, span below one full
            period, negative counts, or background >= fitted offset.
        FitError: relative residual above ``max_relative_residual`` (the
            data is not a sinusoid of the assumed period).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError(f"points must be (N, 2) of (phase, counts), got shape {pts.shape}")
    phases, counts = pts[:, 0], pts[:, 1]
    if np.any(counts < 0):
        raise DomainError("fringe counts must be >= 0")
    if background < 0:
        raise DomainError(f"background must be >= 0, got {background}")
    if np.unique(phases).size < 3:
        raise DomainError("need at least 3 distinct phases to fit a sinusoid")
    span = phases.max() - phases.min()
    if span < 2.0 * math.pi * (1.0 - 1e-6):
        raise DomainError(
            f"phase span {span:.4f} rad covers less than one fringe period"
        )
    basis = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    coef, *_ = np.linalg.lstsq(basis, counts, rcond=None)
    offset, p, q = coef
    amplitude = math.hypot(p, q)
    phase_offset = math.atan2(q, p)
    residuals = counts - basis @ coef
    residual_rms = float(np.sqrt(np.mean(residuals**2)))
    if offset <= 0:
        raise DomainError("fitted offset is not positive; no signal to normalize by")
    if residual_rms > max_relative_residual * offset:
        raise FitError(
            f"fringe is not sinusoidal: residual rms {residual_rms:.4g} exceeds "
            f"{max_relative_residual:.0%} of the offset {offset:.4g}"
        )
    if background >= offset:
        raise DomainError(
            f"background {background:.4g} >= fitted offset {offset:.4g}; "
            f"net visibility undefined"
        )
    v_raw = amplitude / offset
    v_net = amplitude / (offset - background)
    return VisibilityFit(
        v_raw=v_raw,
        v_net=v_net,
        amplitude=amplitude,
        offset=float(offset),
        phase_offset_rad=phase_offset,
        residual_rms=residual_rms,
    )


def visibility_max_min(counts) -> float:
    """Contrast (max - min)/(max + min); the textbook two-point estimator."""
    c = np.asarray(counts, dtype=float)
    if c.size < 2:
        raise DomainError("need at least 2 points for a max/min contrast")
    if np.any(c < 0):
        raise DomainError("counts must be >= 0")
    hi, lo = c.max(), c.min()
    if hi + lo == 0:
        return 0.0
    return (hi - lo) / (hi + lo)
