"""Experiment configuration and its flat ``section.key = value`` text format.

Example::

    # desk preset
    ofdm.fft_size = 512
    sweep.schemes = ldc, sc-dbp:1, mc-dbp:16
    sweep.power_grid_dbm = -2, 0, 2

Blank lines and ``#`` comments are ignored. Every key must be known;
``constants.*`` keys are checked against the values built into the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from .. import compensation, metrics
from ..channel import MANAKOV_FACTOR, FiberParams, LinkConfig
from ..compensation import CompensationScheme, parse_scheme
from ..errors import ConfigError
from ..ofdm import PILOT_SEED, OfdmConfig
from .superchannel import SuperchannelPlan

PRESETS = ("desk", "paper")
AUTO = "auto"


@dataclass(frozen=True)
class SweepConfig:
    schemes: tuple[CompensationScheme, ...] = (
        compensation.Ldc(),
        compensation.ScDbp(1),
        compensation.McDbp(16),
        compensation.Pctw(),
        compensation.ScDbpPctw(1),
    )
    power_grid_dbm: tuple[float, ...] = (0.0,)
    distance_grid_spans: tuple[int, ...] = (25,)
    reference_spans: int | None = None  # distance for Q-vs-power; default: largest grid point
    n_ofdm_symbols: int = 20  # including training
    n_seeds: int = 1

    @property
    def q_reference_spans(self) -> int:
        return self.reference_spans if self.reference_spans is not None else max(self.distance_grid_spans)


@dataclass(frozen=True)
class ExperimentConfig:
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    superchannel: SuperchannelPlan = field(default_factory=SuperchannelPlan)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    seed: int = 1
    noise_enabled: bool = True

    def __post_init__(self) -> None:
        s = self.sweep
        if not s.schemes or not s.power_grid_dbm or not s.distance_grid_spans:
            raise ConfigError("scheme, power and distance grids must be non-empty")
        if min(s.distance_grid_spans) < 1:
            raise ConfigError("distances are counted in spans and must be >= 1")
        if len(set(s.distance_grid_spans)) != len(s.distance_grid_spans):
            raise ConfigError("distance grid has duplicates")
        if len(set(s.power_grid_dbm)) != len(s.power_grid_dbm):
            raise ConfigError("power grid has duplicates")
        if len({sc.label for sc in s.schemes}) != len(s.schemes):
            raise ConfigError("scheme list has duplicates")
        if s.reference_spans is not None and s.reference_spans not in s.distance_grid_spans:
            raise ConfigError("reference_spans must be on the distance grid")
        if s.n_ofdm_symbols < self.ofdm.training_symbols + 1:
            raise ConfigError("n_ofdm_symbols must exceed training_symbols")
        if s.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    def with_seed(self, seed: int) -> ExperimentConfig:
        return replace(self, seed=seed)


# -- text format -----------------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _optional(conv: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda text: None if text.lower() == AUTO else conv(text)


def _list(conv: Callable[[str], Any]) -> Callable[[str], tuple]:
    return lambda text: tuple(conv(part) for part in text.split(",") if part.strip())


def _fmt(value: Any) -> str:
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if hasattr(value, "label"):
        return value.label
    return str(value)


_CONVERTERS: dict[str, dict[str, Callable[[str], Any]]] = {
    "ofdm": {
        "fft_size": _int,
        "data_subcarriers": _int,
        "pilot_subcarriers": _int,
        "cp_fraction": float,
        "training_symbols": _int,
        "qam_order": _int,
        "sample_rate_hz": float,
    },
    "fiber": {
        "length_km": float,
        "alpha_db_per_km": float,
        "dispersion_ps_nm_km": float,
        "gamma_per_w_km": float,
        "pmd_ps_sqrt_km": float,
        "reference_wavelength_nm": float,
    },
    "link": {
        "edfa_gain_db": _optional(float),
        "edfa_nf_db": float,
        "tx_linewidth_hz": float,
        "lo_linewidth_hz": float,
        "pmd_enabled": _bool,
        "forward_steps_per_span": _int,
    },
    "superchannel": {
        "n_channels": _int,
        "spacing_hz": float,
        "oversampling": _optional(_int),
        "measured_channel": _optional(_int),
    },
    "sweep": {
        "schemes": _list(parse_scheme),
        "power_grid_dbm": _list(float),
        "distance_grid_spans": _list(_int),
        "reference_spans": _optional(_int),
        "n_ofdm_symbols": _int,
        "n_seeds": _int,
    },
    "run": {
        "seed": _int,
        "noise_enabled": _bool,
    },
}


def design_constants() -> dict[str, Any]:
    """Values fixed in code that shape every result; recorded in run metadata."""
    return {
        "fec_ber_limit": metrics.FEC_BER_LIMIT,
        "min_confident_errors": metrics.MIN_CONFIDENT_ERRORS,
        "evm_floor_db": metrics.EVM_FLOOR_DB,
        "real_mults_per_complex": metrics.REAL_MULTS_PER_COMPLEX,
        "manakov_factor": MANAKOV_FACTOR,
        "selection_guard": compensation.DEFAULT_GUARD,
        "pilot_seed": PILOT_SEED,
    }


def _section_values(cfg: ExperimentConfig) -> dict[str, dict[str, Any]]:
    link = cfg.link
    return {
        "ofdm": {f.name: getattr(cfg.ofdm, f.name) for f in fields(cfg.ofdm)},
        "fiber": {f.name: getattr(link.fiber, f.name) for f in fields(link.fiber)},
        "link": {k: getattr(link, k) for k in _CONVERTERS["link"]},
        "superchannel": {f.name: getattr(cfg.superchannel, f.name) for f in fields(cfg.superchannel)},
        "sweep": {f.name: getattr(cfg.sweep, f.name) for f in fields(cfg.sweep)},
        "run": {"seed": cfg.seed, "noise_enabled": cfg.noise_enabled},
    }


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply ``section.key = value`` lines on top of ``base`` (defaults if None)."""
    values = _section_values(base if base is not None else ExperimentConfig())
    constants = design_constants()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        section, _, name = key.partition(".")
        if not sep or not name:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        if section == "constants":
            if name not in constants:
                raise ConfigError(f"line {lineno}: unknown constant {key!r}")
            if not math.isclose(float(value), float(constants[name]), rel_tol=1e-12):
                raise ConfigError(f"line {lineno}: {key} = {value} differs from built-in {constants[name]!r}")
            continue
        conv = _CONVERTERS.get(section, {}).get(name)
        if conv is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[section][name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return _build(values)


def _build(values: dict[str, dict[str, Any]]) -> ExperimentConfig:
    try:
        fiber = FiberParams(**values["fiber"])
        return ExperimentConfig(
            ofdm=OfdmConfig(**values["ofdm"]),
            link=LinkConfig(n_spans=max(values["sweep"]["distance_grid_spans"]), fiber=fiber, **values["link"]),
            superchannel=SuperchannelPlan(**values["superchannel"]),
            sweep=SweepConfig(**values["sweep"]),
            **values["run"],
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def format_config(cfg: ExperimentConfig, with_constants: bool = True) -> str:
    """Render every config value (and the design constants) in the text format."""
    lines = []
    for section, items in _section_values(cfg).items():
        for name, value in items.items():
            lines.append(f"{section}.{name} = {_fmt(value)}")
        lines.append("")
    if with_constants:
        for name, value in design_constants().items():
            lines.append(f"constants.{name} = {_fmt(value)}")
    return "\n".join(lines).rstrip() + "\n"


def load_config(path: str | Path | None = None, preset: str | None = None) -> ExperimentConfig:
    """Preset (if any) first, then the file on top of it."""
    base = load_preset(preset) if preset is not None else None
    if path is None:
        if base is None:
            raise ConfigError("need a config file, a preset, or both")
        return base
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base)


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")
    text = resources.files(__package__).joinpath("presets", f"{name}.cfg").read_text()
    return parse_config(text)
