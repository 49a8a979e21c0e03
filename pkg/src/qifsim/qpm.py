"""Dispersion and quasi-phase-matching engine.

Wavelengths are in micrometers, temperatures in kelvin, poling periods in
micrometers, crystal lengths in centimeters, and phase mismatches in rad/um
throughout. The dispersion backend is a temperature-dependent Sellmeier
model for the extraordinary index of congruent lithium niobate, loaded from
a flat key-value data file so the coefficient choice stays auditable and
replaceable (see ``data/lithium_niobate_ne.txt``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from scipy.optimize import brentq

from .errors import ConfigError, DomainError, SolverError

__all__ = [
    "SellmeierModel",
    "QpmConfig",
    "load_sellmeier_file",
    "default_sellmeier",
    "refractive_index",
    "dfg_output_wavelength",
    "phase_mismatch",
    "solve_poling_period",
    "qpm_acceptance",
    "solve_pump_wavelength",
]

PUMP_SEARCH_BRACKET_UM = (1.3, 1.8)

# Residual tolerance for the QPM solvers, rad/um.
SOLVER_TOL_RAD_UM = 1e-9

# Energy-conservation gate for phase_mismatch inputs, 1/um. Far below any
# physical linewidth; catches inconsistent triples, not detunings.
ENERGY_TOL_PER_UM = 1e-6


@dataclass(frozen=True)
class SellmeierModel:
    """Named coefficient set for the temperature-dependent extraordinary index.

    The functional form is the single-oscillator-plus-UV-pole expansion

        n_e^2 = a1 + b1 f + (a2 + b2 f)/(lam^2 - (a3 + b3 f)^2)
                + (a4 + b4 f)/(lam^2 - a5^2) - a6 lam^2

    with f = (t - 24.5)(t + 570.82) and t the temperature in Celsius.

    Attributes:
        name: identifier of the coefficient set.
        a: six dispersion coefficients a1..a6.
        b: four thermo-optic coefficients b1..b4.
        wavelength_range_um: inclusive validity range for the wavelength.
        temperature_range_k: inclusive validity range for the temperature.
        reference: literature citation carried along from the data file.
    """

    name: str
    a: tuple[float, float, float, float, float, float]
    b: tuple[float, float, float, float]
    wavelength_range_um: tuple[float, float]
    temperature_range_k: tuple[float, float]
    reference: str = ""

    def __post_init__(self) -> None:
        if len(self.a) != 6 or len(self.b) != 4:
            raise DomainError(
                f"Sellmeier set {self.name!r} needs 6 a and 4 b coefficients, "
                f"got {len(self.a)} and {len(self.b)}"
            )
        lo, hi = self.wavelength_range_um
        tlo, thi = self.temperature_range_k
        if not (0 < lo < hi) or not (0 < tlo < thi):
            raise DomainError(f"Sellmeier set {self.name!r} has an empty validity range")

    def index(self, wavelength_um: float, temperature_k: float) -> float:
        """Evaluate n_e; validity is enforced, never extrapolated."""
        lo, hi = self.wavelength_range_um
        if not lo <= wavelength_um <= hi:
            raise DomainError(
                f"wavelength {wavelength_um} um outside Sellmeier validity "
                f"[{lo}, {hi}] um"
            )
        tlo, thi = self.temperature_range_k
        if not tlo <= temperature_k <= thi:
            raise DomainError(
                f"temperature {temperature_k} K outside Sellmeier validity "
                f"[{tlo}, {thi}] K"
            )
        t = temperature_k - 273.15
        f = (t - 24.5) * (t + 570.82)
        a1, a2, a3, a4, a5, a6 = self.a
        b1, b2, b3, b4 = self.b
        lam2 = wavelength_um * wavelength_um
        n2 = (
            a1
            + b1 * f
            + (a2 + b2 * f) / (lam2 - (a3 + b3 * f) ** 2)
            + (a4 + b4 * f) / (lam2 - a5 * a5)
            - a6 * lam2
        )
        return math.sqrt(n2)


@dataclass(frozen=True)
class QpmConfig:
    """Quasi-phase-matching geometry.

    Attributes:
        poling_period_um: grating period of the sign-reversed nonlinearity.
        crystal_length_cm: interaction length.
        temperature_k: crystal temperature.
        order: QPM order m, odd and positive.
    """

    poling_period_um: float
    crystal_length_cm: float
    temperature_k: float
    order: int = 1

    def __post_init__(self) -> None:
        if self.poling_period_um <= 0:
            raise DomainError(f"poling period must be > 0, got {self.poling_period_um}")
        if self.crystal_length_cm <= 0:
            raise DomainError(f"crystal length must be > 0, got {self.crystal_length_cm}")
        if self.order < 1 or self.order % 2 == 0:
            raise DomainError(f"QPM order must be odd and >= 1, got {self.order}")


def _parse_keyvalue_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_sellmeier_file(path: str | Path) -> SellmeierModel:
    """Load a coefficient set from a flat key-value text file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Sellmeier file not found: {path}")
    kv = _parse_keyvalue_file(path)
    try:
        return SellmeierModel(
            name=kv.get("name", path.stem),
            a=tuple(float(kv[f"a{i}"]) for i in range(1, 7)),
            b=tuple(float(kv[f"b{i}"]) for i in range(1, 5)),
            wavelength_range_um=(
                float(kv["wavelength_min_um"]),
                float(kv["wavelength_max_um"]),
            ),
            temperature_range_k=(
                float(kv["temperature_min_k"]),
                float(kv["temperature_max_k"]),
            ),
            reference=kv.get("reference", ""),
        )
    except KeyError as exc:
        raise ConfigError(f"Sellmeier file {path} is missing key {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ConfigError(f"Sellmeier file {path} has a non-numeric value: {exc}") from exc


@lru_cache(maxsize=1)
def default_sellmeier() -> SellmeierModel:
    """The bundled congruent lithium niobate extraordinary-index set."""
    with resources.as_file(
        resources.files("qifsim.data").joinpath("lithium_niobate_ne.txt")
    ) as path:
        return load_sellmeier_file(path)


def refractive_index(
    wavelength_um: float, temperature_k: float, model: SellmeierModel | None = None
) -> float:
    """Extraordinary refractive index n_e(lambda, T).

    Args:
        wavelength_um: vacuum wavelength in micrometers.
        temperature_k: crystal temperature in kelvin.
        model: coefficient set; defaults to the bundled one.

    Raises:
        DomainError: outside the model validity range.
    """
    model = model if model is not None else default_sellmeier()
    return model.index(wavelength_um, temperature_k)


def dfg_output_wavelength(signal_um: float, pump_um: float) -> float:
    """Difference-frequency output wavelength, 1/out = 1/signal - 1/pump.

    The signal must be the most energetic wave (shortest wavelength).
    """
    if signal_um <= 0 or pump_um <= 0:
        raise DomainError("wavelengths must be positive")
    if signal_um >= pump_um:
        raise DomainError(
            f"difference-frequency mixing needs signal < pump, "
            f"got signal {signal_um} um >= pump {pump_um} um"
        )
    return 1.0 / (1.0 / signal_um - 1.0 / pump_um)


def phase_mismatch(
    signal_um: float,
    pump_um: float,
    output_um: float,
    cfg: QpmConfig,
    model: SellmeierModel | None = None,
) -> float:
    """Signed quasi-phase mismatch in rad/um.

    Delta_k = 2 pi (n_s/lam_s - n_p/lam_p - n_o/lam_o - m/Lambda), zero
    exactly on the grating-compensated momentum balance. The input triple
    must satisfy energy conservation; a violation is an input error, not a
    detuning.
    """
    balance = 1.0 / signal_um - 1.0 / pump_um - 1.0 / output_um
    if abs(balance) > ENERGY_TOL_PER_UM:
        raise DomainError(
            f"energy conservation violated by {balance:.3e} 1/um "
            f"(limit {ENERGY_TOL_PER_UM:.0e}); triple "
            f"({signal_um}, {pump_um}, {output_um}) um is inconsistent"
        )
    model = model if model is not None else default_sellmeier()
    t = cfg.temperature_k
    return 2.0 * math.pi * (
        model.index(signal_um, t) / signal_um
        - model.index(pump_um, t) / pump_um
        - model.index(output_um, t) / output_um
        - cfg.order / cfg.poling_period_um
    )


def _bulk_mismatch_per_um(
    signal_um: float, pump_um: float, temperature_k: float, model: SellmeierModel
) -> float:
    """Grating-free momentum imbalance n_s/lam_s - n_p/lam_p - n_o/lam_o, 1/um."""
    output_um = dfg_output_wavelength(signal_um, pump_um)
    return (
        model.index(signal_um, temperature_k) / signal_um
        - model.index(pump_um, temperature_k) / pump_um
        - model.index(output_um, temperature_k) / output_um
    )


def solve_poling_period(
    signal_um: float,
    pump_um: float,
    temperature_k: float,
    order: int = 1,
    model: SellmeierModel | None = None,
) -> float:
    """Poling period (um) that quasi-phase matches the DFG triple.

    Root of the mismatch as a function of 1/Lambda via bracketed Brent
    search. The residual is linear in 1/Lambda, so convergence is immediate;
    bracketing keeps the solver derivative-free and sign-checked.

    Raises:
        SolverError: the bulk mismatch is not positive, so no positive
            period can compensate it (the error states the sign).
    """
    model = model if model is not None else default_sellmeier()
    bulk = _bulk_mismatch_per_um(signal_um, pump_um, temperature_k, model)
    if bulk <= 0:
        raise SolverError(
            f"no positive poling period: bulk mismatch is "
            f"{'zero' if bulk == 0 else 'negative'} ({bulk:.6e} 1/um) for "
            f"({signal_um}, {pump_um}) um at {temperature_k} K"
        )
    output_um = dfg_output_wavelength(signal_um, pump_um)
    cfg_for = lambda period: QpmConfig(period, 1.0, temperature_k, order)

    def residual(inv_period: float) -> float:
        return phase_mismatch(signal_um, pump_um, output_um, cfg_for(1.0 / inv_period), model)

    lo, hi = 1e-9, bulk / order + 1.0
    inv = brentq(residual, lo, hi, xtol=1e-15, rtol=8.9e-16)
    period = 1.0 / inv
    if abs(residual(inv)) > SOLVER_TOL_RAD_UM:
        raise SolverError(
            f"poling-period search left residual {residual(inv):.3e} rad/um"
        )
    return period


def qpm_acceptance(delta_k_rad_um: float, length_cm: float) -> float:
    """Spectral acceptance factor sinc^2(Delta_k L / 2), in [0, 1].

    Peaks at 1 for zero mismatch, first null at Delta_k L / 2 = pi.
    """
    if length_cm <= 0:
        raise DomainError(f"crystal length must be > 0, got {length_cm}")
    x = 0.5 * delta_k_rad_um * (length_cm * 1e4)
    if x == 0.0:
        return 1.0
    return (math.sin(x) / x) ** 2


def solve_pump_wavelength(
    poling_period_um: float,
    signal_um: float,
    temperature_k: float,
    order: int = 1,
    model: SellmeierModel | None = None,
) -> float:
    """Pump wavelength (um) that phase matches at the given period and T.

    Scans the fixed search bracket [1.3, 1.8] um for sign changes of the
    mismatch and refines each with bracketed Brent search. The mismatch is
    symmetric under exchanging the pump and output waves, so two roots can
    coexist; the one with the pump redder than the output (pump wavelength
    above twice the signal wavelength) is returned, which is the
    conventional down-conversion operating point. Enables temperature
    tuning curves lambda_p(T).

    Raises:
        SolverError: no sign change inside the bracket; the message reports
            the mismatch sign at both endpoints.
    """
    model = model if model is not None else default_sellmeier()
    lo, hi = PUMP_SEARCH_BRACKET_UM
    if signal_um >= lo:
        raise DomainError(
            f"signal {signal_um} um must lie below the pump search bracket "
            f"[{lo}, {hi}] um"
        )
    cfg = QpmConfig(poling_period_um, 1.0, temperature_k, order)

    def residual(pump_um: float) -> float:
        output_um = dfg_output_wavelength(signal_um, pump_um)
        return phase_mismatch(signal_um, pump_um, output_um, cfg, model)

    n_scan = 128
    xs = [lo + (hi - lo) * i / (n_scan - 1) for i in range(n_scan)]
    fs = [residual(x) for x in xs]
    root = None
    for x0, x1, f0, f1 in zip(xs, xs[1:], fs, fs[1:]):
        if f0 == 0.0:
            root = x0
        elif f0 * f1 < 0:
            root = brentq(residual, x0, x1, xtol=1e-12, rtol=8.9e-16)
    if fs[-1] == 0.0:
        root = xs[-1]
    if root is None:
        raise SolverError(
            f"no quasi-phase-matched pump in [{lo}, {hi}] um at "
            f"Lambda = {poling_period_um} um, T = {temperature_k} K: mismatch is "
            f"{fs[0]:+.3e} rad/um at {lo} um and {fs[-1]:+.3e} rad/um at {hi} um "
            f"with no sign change"
        )
    return root
