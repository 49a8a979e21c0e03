"""Scenario files: one INI-style config describing a full experiment.

A scenario aggregates every component model (source, interferometers,
crystal, pump, loss chains, noise, detector, acquisition, repeater link)
plus the run controls. Keys are named after the physical symbols they
carry. Parsing is strict: unknown sections or keys, missing keys, and
malformed values are config errors that name the file, section, and key.

The serialized form is canonical (fixed section and key order, repr
floats), so its SHA-256 digest identifies the physics of a run and a
parse/serialize round trip is the identity.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import conversion, qpm
from .detection import DetectorModel, ScaWindow
from .errors import ConfigError, DomainError
from .qpm import QpmConfig
from .repeater import LinkConfig
from .timebin import Interferometer, PulseSource

__all__ = [
    "RepeaterSettings",
    "Scenario",
    "load_scenario",
    "load_reference_scenario",
    "parse_scenario",
    "serialize_scenario",
    "scenario_digest",
]


@dataclass(frozen=True)
class RepeaterSettings:
    """Repeater-link comparison inputs carried by a scenario.

    ``interface_efficiency`` of None means "use this scenario's own
    conversion budget".
    """

    link_length_km: float
    attenuation_native_db_per_km: float
    attenuation_telecom_db_per_km: float
    system_efficiency: float
    interface_efficiency: float | None
    protocol: str
    attempt_rate_hz: float
    length_grid_km: tuple[float, float, int]

    def __post_init__(self) -> None:
        start, stop, n = self.length_grid_km
        if n < 1 or stop < start or start < 0:
            raise DomainError(
                f"length grid must be 0 <= start <= stop with n >= 1, got "
                f"{start}:{stop}:{n}"
            )


@dataclass(frozen=True)
class Scenario:
    """Machine-readable description of one full experimental run."""

    source: PulseSource
    preparation: Interferometer
    analysis: Interferometer
    qpm: QpmConfig
    signal_wavelength_um: float
    pump: conversion.PumpField
    eta_norm_per_w_cm2: float
    unit_conversion_survival: bool
    extra_visibility_penalty: float
    chain_pre: conversion.LossChain
    chain_post: conversion.LossChain
    noise: conversion.NoiseModel
    detector: DetectorModel
    sca: ScaWindow
    histogram_bin_width_ps: float
    tac_offset_ns: float
    pulses_per_point: int
    mc_photons_per_point: int
    master_seed: int
    repeater: RepeaterSettings

    def __post_init__(self) -> None:
        dt_p, dt_a = self.preparation.delta_tau_ns, self.analysis.delta_tau_ns
        if abs(dt_p - dt_a) > 0.01 * dt_p:
            raise ConfigError(
                f"interferometer delays differ beyond 1%: preparation "
                f"{dt_p} ns vs analysis {dt_a} ns"
            )
        if self.signal_wavelength_um <= 0:
            raise ConfigError(
                f"signal wavelength must be > 0, got {self.signal_wavelength_um}"
            )
        if self.eta_norm_per_w_cm2 < 0:
            raise ConfigError(
                f"eta_norm_per_W_cm2 must be >= 0, got {self.eta_norm_per_w_cm2}"
            )
        if not 0.0 <= self.extra_visibility_penalty <= 1.0:
            raise ConfigError(
                f"extra_visibility_penalty must be in [0, 1], got "
                f"{self.extra_visibility_penalty}"
            )
        if self.histogram_bin_width_ps <= 0:
            raise ConfigError(
                f"histogram_bin_width_ps must be > 0, got {self.histogram_bin_width_ps}"
            )
        if self.pulses_per_point < 0 or self.mc_photons_per_point < 0:
            raise ConfigError("pulse and photon counts must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must be a u64, got {self.master_seed}")

    # Derived quantities used across the engine.

    def sync_period_ns(self) -> float:
        return 1e3 / self.source.repetition_rate_mhz

    def duration_s(self, pulses: int) -> float:
        return pulses / (self.source.repetition_rate_mhz * 1e6)

    def output_wavelength_um(self) -> float:
        return qpm.dfg_output_wavelength(self.signal_wavelength_um, self.pump.wavelength_um)

    def internal_efficiency(self, power_w: float | None = None) -> float:
        power = self.pump.power_w if power_w is None else power_w
        return conversion.internal_conversion_efficiency(
            power, self.eta_norm_per_w_cm2, self.qpm.crystal_length_cm
        )

    def eta_qi(self, power_w: float | None = None) -> float:
        """Analytic end-to-end conversion budget at the given pump power."""
        return conversion.end_to_end_efficiency(
            self.chain_pre, self.internal_efficiency(power_w), self.chain_post
        )

    def conversion_survival(self) -> float:
        """Per-photon survival the stochastic engine actually applies.

        1 when the scenario decouples counting statistics from the
        conversion budget (unit_conversion_survival), otherwise the
        physical budget itself.
        """
        return 1.0 if self.unit_conversion_survival else self.eta_qi()

    def pump_coherence_factor(self) -> float:
        return conversion.pump_coherence_visibility_factor(
            self.preparation.delta_tau_ns, self.pump.coherence_time_ns
        )

    def noise_rate_hz(self) -> float:
        return conversion.noise_rate(self.pump, self.output_wavelength_um(), self.noise)

    def repeater_link(self, length_km: float | None = None) -> LinkConfig:
        r = self.repeater
        eta = r.interface_efficiency if r.interface_efficiency is not None else self.eta_qi()
        return LinkConfig(
            length_km=r.link_length_km if length_km is None else length_km,
            attenuation_native_db_per_km=r.attenuation_native_db_per_km,
            attenuation_telecom_db_per_km=r.attenuation_telecom_db_per_km,
            interface_efficiency=eta,
            system_efficiency=r.system_efficiency,
            protocol=r.protocol,
            attempt_rate_hz=r.attempt_rate_hz,
        )

    def warn_if_unresolved(self) -> None:
        self.source.warn_if_unresolved(self.preparation.delta_tau_ns)


class _Section:
    """Typed, consumed-key-tracking view of one INI section."""

    def __init__(self, origin: str, name: str, values: dict[str, str]):
        self.origin = origin
        self.name = name
        self._values = dict(values)
        self._taken: set[str] = set()

    def _raw(self, key: str) -> str:
        if key not in self._values:
            raise ConfigError(f"{self.origin}: section [{self.name}] is missing key {key!r}")
        self._taken.add(key)
        return self._values[key]

    def text(self, key: str) -> str:
        return self._raw(key)

    def floating(self, key: str) -> float:
        raw = self._raw(key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(
                f"{self.origin}: [{self.name}] {key} = {raw!r} is not a number"
            ) from exc

    def integer(self, key: str) -> int:
        raw = self._raw(key)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(
                f"{self.origin}: [{self.name}] {key} = {raw!r} is not an integer"
            ) from exc

    def boolean(self, key: str) -> bool:
        raw = self._raw(key).lower()
        if raw not in ("true", "false"):
            raise ConfigError(
                f"{self.origin}: [{self.name}] {key} = {raw!r} must be true or false"
            )
        return raw == "true"

    def remaining(self) -> dict[str, str]:
        """All not-yet-taken keys, in file order (for stage lists)."""
        return {k: v for k, v in self._values.items() if k not in self._taken}

    def finish(self) -> None:
        leftovers = sorted(set(self._values) - self._taken)
        if leftovers:
            raise ConfigError(
                f"{self.origin}: section [{self.name}] has unknown keys {leftovers}"
            )


_SECTIONS = (
    "source",
    "preparation_interferometer",
    "analysis_interferometer",
    "qpm",
    "pump",
    "conversion",
    "chain_pre",
    "chain_post",
    "noise",
    "detector",
    "acquisition",
    "repeater",
)


def _parse_chain(section: _Section) -> conversion.LossChain:
    stages = []
    for name, raw in section.remaining().items():
        section._taken.add(name)
        parts = raw.split()
        if len(parts) != 2 or parts[1] not in ("fraction", "dB"):
            raise ConfigError(
                f"{section.origin}: [{section.name}] {name} = {raw!r}; expected "
                f"'<value> fraction' or '<value> dB'"
            )
        try:
            value = float(parts[0])
        except ValueError as exc:
            raise ConfigError(
                f"{section.origin}: [{section.name}] {name} = {raw!r} is not numeric"
            ) from exc
        try:
            stages.append(conversion.LossStage(name=name, value=value, unit=parts[1]))
        except DomainError as exc:
            raise ConfigError(f"{section.origin}: [{section.name}] {name}: {exc}") from exc
    try:
        return conversion.LossChain(tuple(stages))
    except DomainError as exc:
        raise ConfigError(f"{section.origin}: [{section.name}]: {exc}") from exc


def _parse_grid(origin: str, raw: str) -> tuple[float, float, int]:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{origin}: length_grid_km = {raw!r}; expected start:stop:n")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"{origin}: length_grid_km = {raw!r} has a bad field") from exc


def parse_scenario(text: str, origin: str = "<string>") -> Scenario:
    """Parse scenario text; ConfigError messages carry ``origin`` as the file."""
    parser = configparser.ConfigParser(
        interpolation=None,
        inline_comment_prefixes=("#",),
        comment_prefixes=("#",),
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: malformed scenario file: {exc}") from exc

    present = set(parser.sections())
    missing = [s for s in _SECTIONS if s not in present]
    if missing:
        raise ConfigError(f"{origin}: missing sections {missing}")
    unknown = sorted(present - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{origin}: unknown sections {unknown}")

    sec = {name: _Section(origin, name, dict(parser[name])) for name in _SECTIONS}

    def build(section: _Section, factory, **kwargs):
        try:
            return factory(**kwargs)
        except (DomainError, ConfigError) as exc:
            raise ConfigError(f"{origin}: [{section.name}]: {exc}") from exc

    s = sec["source"]
    source = build(
        s,
        PulseSource,
        repetition_rate_mhz=s.floating("repetition_rate_mhz"),
        pulse_fwhm_ns=s.floating("pulse_fwhm_ns"),
        mean_photon_number=s.floating("mean_photon_number"),
        coherence_time_ns=s.floating("coherence_time_ns"),
        cw_background_fraction=s.floating("cw_background_fraction"),
        pulse_shape=s.text("pulse_shape"),
    )

    def ifo(section: _Section) -> Interferometer:
        return build(
            section,
            Interferometer,
            delta_tau_ns=section.floating("delta_tau_ns"),
            phase_rad=section.floating("phase_rad"),
            transmission=section.floating("transmission"),
            splitting_ratio=section.floating("splitting_ratio"),
            normalize_forward=section.boolean("normalize_forward"),
        )

    preparation = ifo(sec["preparation_interferometer"])
    analysis = ifo(sec["analysis_interferometer"])

    q = sec["qpm"]
    qpm_cfg = build(
        q,
        QpmConfig,
        poling_period_um=q.floating("poling_period_um"),
        crystal_length_cm=q.floating("crystal_length_cm"),
        temperature_k=q.floating("temperature_k"),
        order=q.integer("order"),
    )
    signal_wavelength_um = q.floating("signal_wavelength_um")

    p = sec["pump"]
    pump = build(
        p,
        conversion.PumpField,
        power_w=p.floating("power_w"),
        wavelength_um=p.floating("wavelength_um"),
        coherence_time_ns=p.floating("coherence_time_ns"),
    )

    c = sec["conversion"]
    eta_norm = c.floating("eta_norm_per_W_cm2")
    unit_survival = c.boolean("unit_conversion_survival")
    extra_penalty = c.floating("extra_visibility_penalty")

    chain_pre = _parse_chain(sec["chain_pre"])
    chain_post = _parse_chain(sec["chain_post"])

    n = sec["noise"]
    noise = build(
        n,
        conversion.NoiseModel,
        spdc_coeff_hz_per_w=n.floating("spdc_coeff_hz_per_w"),
        raman_coeff_hz_per_w=n.floating("raman_coeff_hz_per_w"),
        pump_extinction_db=n.floating("pump_extinction_db"),
        target_band_coeff_hz_per_w=n.floating("target_band_coeff_hz_per_w"),
        pump_prefiltered=n.boolean("pump_prefiltered"),
    )

    d = sec["detector"]
    detector = build(
        d,
        DetectorModel,
        quantum_efficiency=d.floating("quantum_efficiency"),
        dark_count_rate_hz=d.floating("dark_count_rate_hz"),
        dead_time_us=d.floating("dead_time_us"),
        jitter_fwhm_ps=d.floating("jitter_fwhm_ps"),
        afterpulse_probability=d.floating("afterpulse_probability"),
    )

    a = sec["acquisition"]
    sca = build(
        a, ScaWindow, center_ns=a.floating("sca_center_ns"), width_ns=a.floating("sca_width_ns")
    )
    histogram_bin_width_ps = a.floating("histogram_bin_width_ps")
    tac_offset_ns = a.floating("tac_offset_ns")
    pulses_per_point = a.integer("pulses_per_point")
    mc_photons_per_point = a.integer("mc_photons_per_point")
    master_seed = a.integer("master_seed")

    r = sec["repeater"]
    raw_eta = r.text("interface_efficiency")
    if raw_eta == "from_budget":
        interface_eta: float | None = None
    else:
        try:
            interface_eta = float(raw_eta)
        except ValueError as exc:
            raise ConfigError(
                f"{origin}: [repeater] interface_efficiency = {raw_eta!r}; expected "
                f"a fraction or 'from_budget'"
            ) from exc
    repeater = build(
        r,
        RepeaterSettings,
        link_length_km=r.floating("link_length_km"),
        attenuation_native_db_per_km=r.floating("attenuation_native_db_per_km"),
        attenuation_telecom_db_per_km=r.floating("attenuation_telecom_db_per_km"),
        system_efficiency=r.floating("system_efficiency"),
        interface_efficiency=interface_eta,
        protocol=r.text("protocol"),
        attempt_rate_hz=r.floating("attempt_rate_hz"),
        length_grid_km=_parse_grid(origin, r.text("length_grid_km")),
    )

    for section in sec.values():
        section.finish()

    try:
        return Scenario(
            source=source,
            preparation=preparation,
            analysis=analysis,
            qpm=qpm_cfg,
            signal_wavelength_um=signal_wavelength_um,
            pump=pump,
            eta_norm_per_w_cm2=eta_norm,
            unit_conversion_survival=unit_survival,
            extra_visibility_penalty=extra_penalty,
            chain_pre=chain_pre,
            chain_post=chain_post,
            noise=noise,
            detector=detector,
            sca=sca,
            histogram_bin_width_ps=histogram_bin_width_ps,
            tac_offset_ns=tac_offset_ns,
            pulses_per_point=pulses_per_point,
            mc_photons_per_point=mc_photons_per_point,
            master_seed=master_seed,
            repeater=repeater,
        )
    except (DomainError, ConfigError) as exc:
        raise ConfigError(f"{origin}: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    """Read and parse a scenario file.

    Raises:
        ConfigError: missing file or any parse/validation failure; the
            message names the file and the offending section and key.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(), origin=str(path))


def load_reference_scenario() -> Scenario:
    """The scenario bundled with the package."""
    with resources.as_file(
        resources.files("qifsim.data").joinpath("reference.scenario")
    ) as path:
        return load_scenario(path)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_scenario(s: Scenario) -> str:
    """Canonical text form; parsing it back reproduces ``s`` exactly."""
    out = io.StringIO()

    def section(name: str, pairs) -> None:
        out.write(f"[{name}]\n")
        for key, value in pairs:
            out.write(f"{key} = {_fmt(value)}\n")
        out.write("\n")

    section(
        "source",
        [
            ("repetition_rate_mhz", s.source.repetition_rate_mhz),
            ("pulse_fwhm_ns", s.source.pulse_fwhm_ns),
            ("pulse_shape", s.source.pulse_shape),
            ("mean_photon_number", s.source.mean_photon_number),
            ("coherence_time_ns", s.source.coherence_time_ns),
            ("cw_background_fraction", s.source.cw_background_fraction),
        ],
    )
    for name, ifo in (
        ("preparation_interferometer", s.preparation),
        ("analysis_interferometer", s.analysis),
    ):
        section(
            name,
            [
                ("delta_tau_ns", ifo.delta_tau_ns),
                ("phase_rad", ifo.phase_rad),
                ("transmission", ifo.transmission),
                ("splitting_ratio", ifo.splitting_ratio),
                ("normalize_forward", ifo.normalize_forward),
            ],
        )
    section(
        "qpm",
        [
            ("poling_period_um", s.qpm.poling_period_um),
            ("crystal_length_cm", s.qpm.crystal_length_cm),
            ("temperature_k", s.qpm.temperature_k),
            ("order", s.qpm.order),
            ("signal_wavelength_um", s.signal_wavelength_um),
        ],
    )
    section(
        "pump",
        [
            ("power_w", s.pump.power_w),
            ("wavelength_um", s.pump.wavelength_um),
            ("coherence_time_ns", s.pump.coherence_time_ns),
        ],
    )
    section(
        "conversion",
        [
            ("eta_norm_per_W_cm2", s.eta_norm_per_w_cm2),
            ("unit_conversion_survival", s.unit_conversion_survival),
            ("extra_visibility_penalty", s.extra_visibility_penalty),
        ],
    )
    for name, chain in (("chain_pre", s.chain_pre), ("chain_post", s.chain_post)):
        section(name, [(st.name, f"{_fmt(st.value)} {st.unit}") for st in chain.stages])
    section(
        "noise",
        [
            ("spdc_coeff_hz_per_w", s.noise.spdc_coeff_hz_per_w),
            ("raman_coeff_hz_per_w", s.noise.raman_coeff_hz_per_w),
            ("pump_extinction_db", s.noise.pump_extinction_db),
            ("target_band_coeff_hz_per_w", s.noise.target_band_coeff_hz_per_w),
            ("pump_prefiltered", s.noise.pump_prefiltered),
        ],
    )
    section(
        "detector",
        [
            ("quantum_efficiency", s.detector.quantum_efficiency),
            ("dark_count_rate_hz", s.detector.dark_count_rate_hz),
            ("dead_time_us", s.detector.dead_time_us),
            ("jitter_fwhm_ps", s.detector.jitter_fwhm_ps),
            ("afterpulse_probability", s.detector.afterpulse_probability),
        ],
    )
    section(
        "acquisition",
        [
            ("sca_center_ns", s.sca.center_ns),
            ("sca_width_ns", s.sca.width_ns),
            ("histogram_bin_width_ps", s.histogram_bin_width_ps),
            ("tac_offset_ns", s.tac_offset_ns),
            ("pulses_per_point", s.pulses_per_point),
            ("mc_photons_per_point", s.mc_photons_per_point),
            ("master_seed", s.master_seed),
        ],
    )
    r = s.repeater
    grid = ":".join([repr(r.length_grid_km[0]), repr(r.length_grid_km[1]), str(r.length_grid_km[2])])
    section(
        "repeater",
        [
            ("link_length_km", r.link_length_km),
            ("attenuation_native_db_per_km", r.attenuation_native_db_per_km),
            ("attenuation_telecom_db_per_km", r.attenuation_telecom_db_per_km),
            ("system_efficiency", r.system_efficiency),
            (
                "interface_efficiency",
                "from_budget" if r.interface_efficiency is None else repr(r.interface_efficiency),
            ),
            ("protocol", r.protocol),
            ("attempt_rate_hz", r.attempt_rate_hz),
            ("length_grid_km", grid),
        ],
    )
    return out.getvalue()


def scenario_digest(s: Scenario) -> str:
    """12-hex-character SHA-256 digest of the canonical serialization."""
    return hashlib.sha256(serialize_scenario(s).encode()).hexdigest()[:12]
