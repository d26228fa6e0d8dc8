"""INI config parsing for the CLI.

Flat key = value files with one section per concern ([system],
[optimizer], [estimation], [scenario], [oracle]).  Powers and Rician
factors accept linear values or a dB suffix ("10 dB" / "10 dBW" means
10^(10/10) W, "-90 dBm" converts from milliwatts); angles are radians;
positions are "x, y" pairs in meters.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .channel import SystemConfig
from .experiments import SWEEP_VARIABLES, ScenarioSpec


class ConfigError(ValueError):
    """Config file problem with section/field context."""


_SWEEP_ALIASES = {
    "n": "num_ris_elements",
    "num_ris_elements": "num_ris_elements",
    "k": "num_users",
    "num_users": "num_users",
    "rician": "rician_factor",
    "rician_factor": "rician_factor",
    "p_t": "transmit_power",
    "transmit_power": "transmit_power",
    "l": "pilot_length",
    "pilot_length": "pilot_length",
    "d1": "ris_distance",
    "ris_distance": "ris_distance",
    "slot": "slot_length",
    "slot_length": "slot_length",
}


def parse_power(text: str, where: str = "") -> float:
    """Linear watts, or '<x> dB'/'dBW' (10^(x/10) W) or '<x> dBm'."""
    t = text.strip()
    low = t.lower()
    try:
        if low.endswith("dbm"):
            return 10.0 ** ((float(t[:-3]) - 30.0) / 10.0)
        if low.endswith("dbw"):
            return 10.0 ** (float(t[:-3]) / 10.0)
        if low.endswith("db"):
            return 10.0 ** (float(t[:-2]) / 10.0)
        return float(t)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse power value {text!r}") from None


def parse_position(text: str, where: str = "") -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ConfigError(f"{where}: expected 'x, y', got {text!r}")
    return float(parts[0]), float(parts[1])


def parse_positions(text: str, where: str = "") -> tuple[tuple[float, float], ...]:
    return tuple(
        parse_position(chunk, where) for chunk in text.split(";") if chunk.strip()
    )


def _value_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


@dataclass
class OptimizerSettings:
    tol: float = 1e-3
    max_iters: int = 100
    init: str = "matched-filter"
    inner_sweeps: int = 1
    backend: str | None = None


@dataclass
class EstimationSettings:
    pilot_length: int | None = None
    pilot_power: float = 7.0
    uplink_noise_power: float | None = None
    pilot_symbols: str = "ones"


@dataclass
class RunConfig:
    """Everything a CLI subcommand may need, parsed and validated."""

    system: SystemConfig = field(default_factory=SystemConfig)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    estimation: EstimationSettings = field(default_factory=EstimationSettings)
    scenario: ScenarioSpec | None = None
    oracle_levels: int = 16
    oracle_precoder: str = "mmse"
    has_estimation_section: bool = False


_POWER_FIELDS = {"transmit_power", "noise_power", "rician_factor_G", "rician_factor_h"}
_POSITION_FIELDS = {"bs_position", "ris_position", "user_disk_center"}


def _parse_system(section) -> SystemConfig:
    kwargs = {}
    known = {f.name: f for f in fields(SystemConfig)}
    for key in section:
        if key not in known:
            raise ConfigError(f"[system]: unknown field {key!r}")
        raw = section[key]
        where = f"[system] {key}"
        if key == "rician_factor_h" and ("," in raw or ";" in raw):
            kwargs[key] = tuple(
                parse_power(part, where)
                for part in raw.replace(";", ",").split(",")
                if part.strip()
            )
        elif key in _POWER_FIELDS:
            kwargs[key] = parse_power(raw, where)
        elif key in _POSITION_FIELDS:
            kwargs[key] = parse_position(raw, where)
        elif key == "user_positions":
            kwargs[key] = parse_positions(raw, where)
        elif key in ("num_bs_antennas", "num_ris_elements", "num_users", "rng_seed"):
            kwargs[key] = int(raw)
        else:
            kwargs[key] = float(raw)
    cfg = SystemConfig(**kwargs)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(f"[system]: {exc}") from None
    return cfg


def dump_system_config(cfg: SystemConfig, path) -> None:
    """Write a SystemConfig back to an INI [system] section (round-trips)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    sec = {}
    for f in fields(SystemConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name in _POSITION_FIELDS:
            sec[f.name] = f"{value[0]!r}, {value[1]!r}"
        elif f.name == "user_positions":
            sec[f.name] = "; ".join(f"{x!r}, {y!r}" for x, y in value)
        elif f.name == "rician_factor_h" and not isinstance(value, (int, float)):
            sec[f.name] = ", ".join(repr(float(v)) for v in value)
        else:
            sec[f.name] = repr(value)
    parser["system"] = sec
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keep field-name case (rician_factor_G)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    out = RunConfig()
    if parser.has_section("system"):
        out.system = _parse_system(parser["system"])

    if parser.has_section("optimizer"):
        sec = parser["optimizer"]
        out.optimizer = OptimizerSettings(
            tol=sec.getfloat("tol", fallback=1e-3),
            max_iters=sec.getint("max_iters", fallback=100),
            init=sec.get("init", fallback="matched-filter"),
            inner_sweeps=sec.getint("inner_sweeps", fallback=1),
            backend=sec.get("backend", fallback=None),
        )

    if parser.has_section("estimation"):
        sec = parser["estimation"]
        out.has_estimation_section = True
        out.estimation = EstimationSettings(
            pilot_length=sec.getint("pilot_length", fallback=None),
            pilot_power=parse_power(sec.get("pilot_power", "7"), "[estimation] pilot_power"),
            uplink_noise_power=(
                parse_power(sec["uplink_noise_power"], "[estimation] uplink_noise_power")
                if "uplink_noise_power" in sec
                else None
            ),
            pilot_symbols=sec.get("pilot_symbols", fallback="ones"),
        )

    if parser.has_section("oracle"):
        sec = parser["oracle"]
        out.oracle_levels = sec.getint("levels", fallback=16)
        out.oracle_precoder = sec.get("precoder", fallback="mmse")

    if parser.has_section("scenario"):
        sec = parser["scenario"]
        if "sweep" not in sec:
            raise ConfigError("[scenario]: missing required field 'sweep'")
        if "values" not in sec:
            raise ConfigError("[scenario]: missing required field 'values'")
        sweep = _SWEEP_ALIASES.get(sec["sweep"].strip().lower())
        if sweep is None:
            raise ConfigError(
                f"[scenario]: unknown sweep {sec['sweep']!r} (have {SWEEP_VARIABLES})"
            )
        algorithms = tuple(
            a.strip() for a in sec.get("algorithms", "fp-perfect").split(",") if a.strip()
        )
        spec = ScenarioSpec(
            config=out.system,
            name=sec.get("name", fallback="scenario"),
            sweep=sweep,
            values=_value_list(sec["values"]),
            trials=sec.getint("trials", fallback=200),
            algorithms=algorithms,
            seed=out.system.rng_seed,
            metric=sec.get("metric", fallback="sum_rate"),
            pilot_length=out.estimation.pilot_length,
            pilot_power=out.estimation.pilot_power,
            uplink_noise_power=out.estimation.uplink_noise_power,
            slot_length=sec.getint("slot_length", fallback=512),
            tol=out.optimizer.tol,
            max_iters=out.optimizer.max_iters,
            random_phase_draws=sec.getint("random_phase_draws", fallback=100),
            oracle_levels=out.oracle_levels,
            oracle_precoder=out.oracle_precoder,
        )
        try:
            spec.validate()
        except ValueError as exc:
            raise ConfigError(f"[scenario]: {exc}") from None
        out.scenario = spec

    return out
