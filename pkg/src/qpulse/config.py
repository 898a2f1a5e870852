"""Experiment configuration: TOML documents with explicit units.

A configuration is a TOML document.  Dimensional values are strings carrying
their unit (``"100 fs"``, ``"5 pi"``, ``"1/1ns"``, ``"2 GHz"``, ``"8000 fs^2"``);
dimensionless normalized values are bare numbers (``alpha_norm = 0.8``).

Example
-------
::

    protocol = "arp"
    run = "evolve"

    [pulse]
    theta = "5 pi"
    tau0 = "100 fs"
    alpha_norm = 0.8

    [emitter]
    gamma = "1/1ns"
    gamma_ph = "1/10ns"
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .pulseshape import DEFAULT_N_SAMPLES, DEFAULT_OVERSAMPLE, DEFAULT_SPAN_FACTOR, PulseSpec
from .propagator import DEFAULT_ATOL, DEFAULT_RTOL
from .quantum import EmitterParams
from .sweeps import Axis, SweepPlan
from .units import FREQ_UNITS, TIME_UNITS, spectral_fwhm

log = logging.getLogger(__name__)

PROTOCOLS = ("rabi", "arp", "narp")
RUN_TYPES = ("pulse", "evolve", "sweep", "spectrum")
FORMATS = ("csv", "json")
PUBLICATION_COUNT = 201

# exact reciprocals, so "1/1ns" is 1e9 and not 1/1e-9
PER_TIME = {"s": 1.0, "ns": 1e9, "ps": 1e12, "fs": 1e15}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


class ConfigError(ValueError):
    """The configuration is malformed, incomplete or inconsistent."""


def _quantity(value, key: str) -> tuple[float, str]:
    if isinstance(value, bool) or not isinstance(value, str):
        raise ConfigError(f"{key}: missing unit (expected a string such as '100 fs', got {value!r})")
    m = re.fullmatch(rf"\s*({_NUM})\s*(.*?)\s*", value)
    if m is None:
        raise ConfigError(f"{key}: cannot parse quantity {value!r}")
    if not m.group(2):
        raise ConfigError(f"{key}: missing unit in {value!r}")
    return float(m.group(1)), m.group(2)


def parse_time(value, key: str) -> float:
    num, unit = _quantity(value, key)
    if unit not in TIME_UNITS:
        raise ConfigError(f"{key}: unknown time unit {unit!r}; use one of {sorted(TIME_UNITS)}")
    return num * TIME_UNITS[unit]


def parse_frequency(value, key: str) -> float:
    """Ordinary-frequency units become angular; ``rad/s`` passes through."""
    num, unit = _quantity(value, key)
    if unit not in FREQ_UNITS:
        raise ConfigError(f"{key}: unknown frequency unit {unit!r}; use one of {sorted(FREQ_UNITS)}")
    return num * FREQ_UNITS[unit]


def parse_rate(value, key: str) -> float:
    """Decay rates: ``"1/1ns"``, ``"1/10 ns"``, ``"1e9 1/s"`` or ``"1e9/s"``."""
    if isinstance(value, str):
        m = re.fullmatch(rf"\s*1\s*/\s*({_NUM})\s*([a-z]+)\s*", value)
        if m and m.group(2) in PER_TIME:
            lifetime = float(m.group(1))
            if lifetime == 0:
                raise ConfigError(f"{key}: zero lifetime in {value!r}")
            return PER_TIME[m.group(2)] / lifetime
        m = re.fullmatch(rf"\s*({_NUM})\s*(?:1\s*)?/\s*([a-z]+)\s*", value)
        if m and m.group(2) in PER_TIME:
            return float(m.group(1)) * PER_TIME[m.group(2)]
    num, unit = _quantity(value, key)
    raise ConfigError(f"{key}: unknown rate unit {unit!r}; use e.g. '1/1ns' or '1e9 1/s'")


def parse_angle(value, key: str) -> float:
    num, unit = _quantity(value, key)
    if unit == "pi":
        return num * math.pi
    if unit == "rad":
        return num
    raise ConfigError(f"{key}: unknown angle unit {unit!r}; use 'pi' or 'rad'")


def parse_chirp(value, key: str) -> float:
    num, unit = _quantity(value, key)
    m = re.fullmatch(r"([a-z]+)\^2", unit)
    if m is None or m.group(1) not in TIME_UNITS:
        raise ConfigError(f"{key}: unknown chirp unit {unit!r}; use e.g. 'fs^2'")
    return num * TIME_UNITS[m.group(1)] ** 2


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a dimensionless number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return float(value)


def _integer(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return value


def _check_keys(table: dict, allowed: set[str], where: str) -> None:
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


@dataclass(frozen=True)
class Numerics:
    n_samples: int = DEFAULT_N_SAMPLES
    span_factor: float = DEFAULT_SPAN_FACTOR
    oversample: int = DEFAULT_OVERSAMPLE
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL


@dataclass(frozen=True)
class TimeGrid:
    start: float
    stop: float
    count: int

    def values(self):
        import numpy as np

        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SweepSettings:
    axes: tuple[Axis, ...]
    closed_system: bool = True


@dataclass(frozen=True)
class SpectrumSettings:
    omega_min: float
    omega_max: float
    omega_count: int
    t_grid: TimeGrid
    tau_max: float | None = None
    apodization: float | None = None
    onset_fraction: float = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str
    run: str
    pulse: PulseSpec
    emitter: EmitterParams
    numerics: Numerics = field(default_factory=Numerics)
    evolve_grid: TimeGrid | None = None
    sweep: SweepSettings | None = None
    spectrum: SpectrumSettings | None = None
    out_dir: str = "out"
    fmt: str = "csv"
    name: str = "experiment"
    normalized: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Fully resolved configuration in SI units (angular frequencies).

        The output directory is left out: it does not change the experiment.
        """
        d = asdict(self)
        d.pop("normalized")
        d.pop("out_dir")
        return d

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.resolved(), sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def sweep_plan(self) -> SweepPlan:
        if self.sweep is None:
            raise ConfigError("no [sweep] section")
        n = self.numerics
        return SweepPlan(
            axes=self.sweep.axes,
            baseline=self.pulse,
            params=self.emitter,
            closed_system=self.sweep.closed_system,
            n_samples=n.n_samples,
            span_factor=n.span_factor,
            oversample=n.oversample,
            rtol=n.rtol,
            atol=n.atol,
        )

    def with_publication_grid(self) -> "ExperimentConfig":
        """Same experiment with every sweep axis at the publication resolution."""
        if self.sweep is None:
            return self
        axes = tuple(replace(a, count=PUBLICATION_COUNT) for a in self.sweep.axes)
        return replace(self, sweep=replace(self.sweep, axes=axes))

    def provenance(self) -> dict:
        return {
            "name": self.name,
            "protocol": self.protocol,
            "run": self.run,
            "config_hash": self.config_hash,
            "config": self.resolved(),
            "normalized": self.normalized,
        }


def _pick(table: dict, abs_key: str, norm_key: str, parse, to_abs, where: str):
    """Resolve a value given either absolutely or normalized; both must agree."""
    a = parse(table[abs_key], f"{where}.{abs_key}") if abs_key in table else None
    n = to_abs(_number(table[norm_key], f"{where}.{norm_key}")) if norm_key in table else None
    if a is not None and n is not None:
        if not math.isclose(a, n, rel_tol=1e-9, abs_tol=0.0):
            raise ConfigError(
                f"{where}: contradictory {abs_key}={table[abs_key]!r} and "
                f"{norm_key}={table[norm_key]!r}"
            )
    if a is not None:
        return a
    return n


def _parse_pulse(table: dict, emitter_gamma: float) -> tuple[PulseSpec, dict]:
    where = "pulse"
    allowed = {
        "theta", "tau0", "alpha", "alpha_norm", "delta", "delta_norm", "delta_over_gamma",
        "carrier_offset",
    }
    _check_keys(table, allowed, where)
    for key in ("theta", "tau0"):
        if key not in table:
            raise ConfigError(f"{where}: missing required key {key!r}")
    theta = parse_angle(table["theta"], "pulse.theta")
    tau0 = parse_time(table["tau0"], "pulse.tau0")
    if not tau0 > 0:
        raise ConfigError("pulse.tau0 must be positive")
    g0 = spectral_fwhm(tau0)
    alpha = _pick(table, "alpha", "alpha_norm", parse_chirp, lambda v: v * tau0**2, where) or 0.0
    if "delta_over_gamma" in table:
        if "delta" in table or "delta_norm" in table:
            raise ConfigError("pulse: give only one of delta, delta_norm, delta_over_gamma")
        ratio = _number(table["delta_over_gamma"], "pulse.delta_over_gamma")
        if emitter_gamma <= 0:
            raise ConfigError("pulse.delta_over_gamma needs a positive emitter.gamma")
        log.warning(
            "delta_over_gamma=%g gives a notch of %.3g rad/s, %.2e of Gamma0; "
            "such a notch is unresolvable on the spectral grid",
            ratio, ratio * emitter_gamma, ratio * emitter_gamma / g0,
        )
        delta = ratio * emitter_gamma
    else:
        delta = _pick(table, "delta", "delta_norm", parse_frequency, lambda v: v * g0, where) or 0.0
    carrier = (
        parse_frequency(table["carrier_offset"], "pulse.carrier_offset")
        if "carrier_offset" in table
        else 0.0
    )
    try:
        spec = PulseSpec(theta, tau0, alpha, delta, carrier)
    except ValueError as exc:
        raise ConfigError(f"pulse: {exc}") from exc
    normalized = {
        "theta_in_pi": theta / math.pi,
        "alpha_over_tau0_sq": alpha / tau0**2,
        "delta_over_Gamma0": delta / g0,
        "tau0_fs": tau0 / 1e-15,
        "alpha_fs2": alpha / 1e-30,
        "delta_THz": delta / FREQ_UNITS["THz"],
        "Gamma0_THz": g0 / FREQ_UNITS["THz"],
    }
    return spec, normalized


def _parse_emitter(table: dict) -> EmitterParams:
    _check_keys(table, {"detuning", "gamma", "gamma_ph"}, "emitter")
    det = parse_frequency(table["detuning"], "emitter.detuning") if "detuning" in table else 0.0
    gamma = parse_rate(table["gamma"], "emitter.gamma") if "gamma" in table else 0.0
    gph = parse_rate(table["gamma_ph"], "emitter.gamma_ph") if "gamma_ph" in table else 0.0
    try:
        return EmitterParams(det, gamma, gph)
    except ValueError as exc:
        raise ConfigError(f"emitter: {exc}") from exc


def _parse_numerics(table: dict) -> Numerics:
    _check_keys(table, {"n_samples", "span_factor", "oversample", "rtol", "atol"}, "numerics")
    d = Numerics()
    out = Numerics(
        n_samples=_integer(table.get("n_samples", d.n_samples), "numerics.n_samples"),
        span_factor=_number(table.get("span_factor", d.span_factor), "numerics.span_factor"),
        oversample=_integer(table.get("oversample", d.oversample), "numerics.oversample"),
        rtol=_number(table.get("rtol", d.rtol), "numerics.rtol"),
        atol=_number(table.get("atol", d.atol), "numerics.atol"),
    )
    if out.n_samples < 1024 or out.n_samples & (out.n_samples - 1):
        raise ConfigError(f"numerics.n_samples must be a power of two >= 1024, got {out.n_samples}")
    if out.oversample < 1 or out.oversample & (out.oversample - 1):
        raise ConfigError(f"numerics.oversample must be a power of two, got {out.oversample}")
    if not out.span_factor >= 8:
        raise ConfigError(f"numerics.span_factor must be >= 8, got {out.span_factor}")
    if not 1e-12 <= out.rtol <= 1e-3:
        raise ConfigError(f"numerics.rtol must lie in [1e-12, 1e-3], got {out.rtol}")
    if not out.atol > 0:
        raise ConfigError("numerics.atol must be positive")
    return out


def _parse_time_grid(table: dict, where: str) -> TimeGrid:
    _check_keys(table, {"t_min", "t_max", "t_count"}, where)
    for key in ("t_min", "t_max", "t_count"):
        if key not in table:
            raise ConfigError(f"{where}: missing required key {key!r}")
    grid = TimeGrid(
        parse_time(table["t_min"], f"{where}.t_min"),
        parse_time(table["t_max"], f"{where}.t_max"),
        _integer(table["t_count"], f"{where}.t_count"),
    )
    if grid.count < 2 or not grid.stop > grid.start:
        raise ConfigError(f"{where}: need t_max > t_min and t_count >= 2")
    return grid


_AXIS_PARSERS = {"theta": parse_angle, "alpha": parse_chirp, "delta": parse_frequency}


def _parse_axis(table: dict, where: str) -> Axis:
    _check_keys(table, {"name", "min", "max", "count", "normalization"}, where)
    for key in ("name", "min", "max", "count"):
        if key not in table:
            raise ConfigError(f"{where}: missing required key {key!r}")
    name = table["name"]
    if name not in _AXIS_PARSERS:
        raise ConfigError(f"{where}.name: {name!r} is not one of {sorted(_AXIS_PARSERS)}")
    norm = table.get("normalization", "absolute")
    if norm == "absolute":
        lo = _AXIS_PARSERS[name](table["min"], f"{where}.min")
        hi = _AXIS_PARSERS[name](table["max"], f"{where}.max")
    else:
        lo = _number(table["min"], f"{where}.min")
        hi = _number(table["max"], f"{where}.max")
    try:
        return Axis(name, lo, hi, _integer(table["count"], f"{where}.count"), norm)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_sweep(table: dict) -> SweepSettings:
    _check_keys(table, {"axes", "closed_system"}, "sweep")
    axes_t = table.get("axes")
    if not isinstance(axes_t, list) or not axes_t:
        raise ConfigError("sweep: needs one or two [[sweep.axes]] tables")
    axes = tuple(_parse_axis(a, f"sweep.axes[{i}]") for i, a in enumerate(axes_t))
    closed = table.get("closed_system", True)
    if not isinstance(closed, bool):
        raise ConfigError("sweep.closed_system must be a boolean")
    return SweepSettings(axes, closed)


def _parse_spectrum(table: dict) -> SpectrumSettings:
    allowed = {
        "omega_min", "omega_max", "omega_count", "t_min", "t_max", "t_count",
        "tau_max", "apodization", "onset_fraction",
    }
    _check_keys(table, allowed, "spectrum")
    for key in ("omega_min", "omega_max", "omega_count"):
        if key not in table:
            raise ConfigError(f"spectrum: missing required key {key!r}")
    grid = _parse_time_grid(
        {k: table[k] for k in ("t_min", "t_max", "t_count") if k in table}, "spectrum"
    )
    s = SpectrumSettings(
        omega_min=parse_frequency(table["omega_min"], "spectrum.omega_min"),
        omega_max=parse_frequency(table["omega_max"], "spectrum.omega_max"),
        omega_count=_integer(table["omega_count"], "spectrum.omega_count"),
        t_grid=grid,
        tau_max=parse_time(table["tau_max"], "spectrum.tau_max") if "tau_max" in table else None,
        apodization=(
            parse_time(table["apodization"], "spectrum.apodization")
            if "apodization" in table
            else None
        ),
        onset_fraction=_number(table.get("onset_fraction", 0.1), "spectrum.onset_fraction"),
    )
    if s.omega_count < 2 or not s.omega_max > s.omega_min:
        raise ConfigError("spectrum: need omega_max > omega_min and omega_count >= 2")
    if not 0 < s.onset_fraction < 1:
        raise ConfigError("spectrum.onset_fraction must lie in (0, 1)")
    return s


def _check_protocol(protocol: str, spec: PulseSpec, swept: set[str]) -> None:
    chirped = spec.alpha != 0 or "alpha" in swept
    notched = spec.delta_notch > 0 or "delta" in swept
    if protocol == "rabi" and (chirped or notched):
        raise ConfigError("protocol 'rabi' requires an unchirped pulse without a notch")
    if protocol == "arp" and (not chirped or notched):
        raise ConfigError("protocol 'arp' requires a chirp and no notch")
    if protocol == "narp" and not notched:
        raise ConfigError("protocol 'narp' requires a spectral notch")


def parse_config(text: str, name: str = "experiment") -> ExperimentConfig:
    """Parse and validate a TOML experiment description."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    top = {"protocol", "run", "pulse", "emitter", "numerics", "evolve", "sweep", "spectrum", "output"}
    _check_keys(doc, top, "config")

    protocol = doc.get("protocol", "")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"protocol: {protocol!r} is not one of {list(PROTOCOLS)}")
    run = doc.get("run", "")
    if run not in RUN_TYPES:
        raise ConfigError(f"run: {run!r} is not one of {list(RUN_TYPES)}")
    if "pulse" not in doc:
        raise ConfigError("config: missing [pulse] section")

    emitter = _parse_emitter(doc.get("emitter", {}))
    pulse, normalized = _parse_pulse(doc["pulse"], emitter.gamma)
    numerics = _parse_numerics(doc.get("numerics", {}))
    evolve_grid = _parse_time_grid(doc["evolve"], "evolve") if "evolve" in doc else None
    sweep = _parse_sweep(doc["sweep"]) if "sweep" in doc else None
    spectrum = _parse_spectrum(doc["spectrum"]) if "spectrum" in doc else None
    if run == "sweep" and sweep is None:
        raise ConfigError("run 'sweep' needs a [sweep] section")
    if run == "spectrum" and spectrum is None:
        raise ConfigError("run 'spectrum' needs a [spectrum] section")
    swept = {a.name for a in sweep.axes} if (sweep is not None and run == "sweep") else set()
    _check_protocol(protocol, pulse, swept)

    output = doc.get("output", {})
    _check_keys(output, {"dir", "format"}, "output")
    fmt = output.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"output.format: {fmt!r} is not one of {list(FORMATS)}")
    out_dir = output.get("dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("output.dir must be a non-empty string")

    return ExperimentConfig(
        protocol=protocol,
        run=run,
        pulse=pulse,
        emitter=emitter,
        numerics=numerics,
        evolve_grid=evolve_grid,
        sweep=sweep,
        spectrum=spectrum,
        out_dir=out_dir,
        fmt=fmt,
        name=name,
        normalized=normalized,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, name=path.stem)


def recipe_names() -> list[str]:
    from importlib import resources

    root = resources.files("qpulse") / "recipes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_recipe(name: str) -> ExperimentConfig:
    from importlib import resources

    names = recipe_names()
    if name not in names:
        raise ConfigError(f"unknown recipe {name!r}; available: {names}")
    text = (resources.files("qpulse") / "recipes" / f"{name}.toml").read_text()
    return parse_config(text, name=name)

