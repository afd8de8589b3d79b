"""Run configuration: TOML file plus environment overrides."""

import logging
import os
import tomllib
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Literal

import numpy as np

from lvrt_pinn.dataset import GridSpec
from lvrt_pinn.dynamics import ConverterParams
from lvrt_pinn.errors import ConfigError
from lvrt_pinn.pinn import LossWeights, TrainConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "LVRT_"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class CollocationConfig:
    """Physics collocation sampling."""

    n_points: int = 10_000

    def __post_init__(self):
        if self.n_points < 0:
            raise ValueError(f"n_points must be >= 0, got {self.n_points}")


@dataclass(frozen=True)
class MilpConfig:
    """Bounds and solver settings of the MILP stage.

    Attributes:
        bounds_source: ``interval`` or ``lp-tightened`` big-M constants
        tightening_passes: passes of LP tightening (1 = single front-to-back pass)
        node_limit: branch-and-bound node limit per solve
    """

    bounds_source: Literal["interval", "lp-tightened"] = "lp-tightened"
    tightening_passes: int = 1
    node_limit: int = 1_000_000

    def __post_init__(self):
        if self.bounds_source not in ("interval", "lp-tightened"):
            raise ValueError(
                f"bounds_source must be 'interval' or 'lp-tightened', got {self.bounds_source!r}"
            )
        if self.tightening_passes < 1:
            raise ValueError(f"tightening_passes must be >= 1, got {self.tightening_passes}")
        if self.node_limit < 1:
            raise ValueError(f"node_limit must be >= 1, got {self.node_limit}")


@dataclass(frozen=True)
class AnalysisConfig:
    """Boundary sweeps and the simulator reference.

    Attributes:
        epsilons: LVRT margins swept by ``boundary`` [pu]
        mus: power fractions swept by ``power-boundary``
        delta_V_start: first dip magnitude of the sweep grid [pu]
        delta_V_stop: last dip magnitude of the sweep grid [pu]
        delta_V_step: spacing of the sweep grid [pu]
        workers: threads solving sweep points
        ground_truth_tol: bisection tolerance of the simulator reference [s]
        record_timing: write solve times; off gives byte-identical curve files
    """

    epsilons: tuple[float, ...] = (0.0, 0.025, 0.05)
    mus: tuple[float, ...] = (0.25, 0.5, 0.55, 0.6, 0.75, 0.9, 0.95, 0.98)
    delta_V_start: float = 0.2
    delta_V_stop: float = 0.8
    delta_V_step: float = 0.01
    workers: int = 1
    ground_truth_tol: float = 1e-4
    record_timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "epsilons", tuple(float(v) for v in self.epsilons))
        object.__setattr__(self, "mus", tuple(float(v) for v in self.mus))
        if any(e < 0 for e in self.epsilons):
            raise ValueError(f"epsilons must be non-negative, got {self.epsilons}")
        if any(not 0 <= m <= 1 for m in self.mus):
            raise ValueError(f"mus must lie in [0, 1], got {self.mus}")
        if self.delta_V_step <= 0 or self.delta_V_stop < self.delta_V_start:
            raise ValueError("delta_V grid needs step > 0 and stop >= start")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def delta_V_grid(self) -> np.ndarray:
        """Sweep magnitudes from start to stop inclusive, rounded to 1e-12."""
        n = int(np.floor((self.delta_V_stop - self.delta_V_start) / self.delta_V_step + 1e-9)) + 1
        return np.round(self.delta_V_start + self.delta_V_step * np.arange(n), 12)


@dataclass(frozen=True)
class PathsConfig:
    data_dir: str = "data"
    model: str = "artifacts/model.json"
    bounds: str = "artifacts/bounds.csv"
    output_dir: str = "results"


@dataclass(frozen=True)
class LoggingConfig:
    level: str = "INFO"

    def __post_init__(self):
        object.__setattr__(self, "level", self.level.upper())
        if self.level not in LOG_LEVELS:
            raise ValueError(f"level must be one of {LOG_LEVELS}, got {self.level!r}")


@dataclass(frozen=True)
class RunConfig:
    """Complete configuration of one pipeline run."""

    converter: ConverterParams = field(default_factory=ConverterParams)
    grid: GridSpec = field(default_factory=GridSpec)
    collocation: CollocationConfig = field(default_factory=CollocationConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    milp: MilpConfig = field(default_factory=MilpConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    seed: int = 0

    def snapshot(self) -> dict[str, Any]:
        """Plain-data copy embedded in output metadata."""
        data = {
            "converter": self.converter.to_dict(),
            "grid": self.grid.to_dict(),
            "collocation": asdict(self.collocation),
            "training": self.training.to_dict(),
            "loss": asdict(self.loss),
            "milp": asdict(self.milp),
            "analysis": asdict(self.analysis),
            "paths": asdict(self.paths),
            "logging": asdict(self.logging),
            "seed": self.seed,
        }
        data["training"].pop("weights", None)
        data["analysis"]["epsilons"] = list(self.analysis.epsilons)
        data["analysis"]["mus"] = list(self.analysis.mus)
        return data


SECTIONS: dict[str, type] = {
    "converter": ConverterParams,
    "grid": GridSpec,
    "collocation": CollocationConfig,
    "training": TrainConfig,
    "loss": LossWeights,
    "milp": MilpConfig,
    "analysis": AnalysisConfig,
    "paths": PathsConfig,
    "logging": LoggingConfig,
}

# Supplied from elsewhere in the file, never read from the section itself
_DERIVED_FIELDS = {"training": {"weights", "seed"}}


def _defaults(cls: type) -> dict[str, Any]:
    values = {}
    for f in fields(cls):
        if f.default is not MISSING:
            values[f.name] = f.default
        elif f.default_factory is not MISSING:
            values[f.name] = f.default_factory()
    return values


def _coerce(section: str, name: str, value: Any, default: Any) -> Any:
    """Convert a TOML or environment value to the type of the field's default."""
    where = f"[{section}] {name}"
    from_env = isinstance(value, str) and not isinstance(default, str)
    try:
        if isinstance(default, bool):
            if from_env:
                lowered = value.strip().lower()
                if lowered not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(value)
                return lowered in ("1", "true", "yes")
            if not isinstance(value, bool):
                raise TypeError(type(value).__name__)
            return value
        if isinstance(default, int):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError(type(value).__name__)
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise TypeError("bool")
            return float(value)
        if isinstance(default, tuple):
            items = [v.strip() for v in value.split(",") if v.strip()] if from_env else list(value)
            item_type = type(default[0]) if default else float
            return tuple(item_type(v) for v in items)
        if isinstance(default, str):
            if not isinstance(value, str):
                raise TypeError(type(value).__name__)
            return value
    except (TypeError, ValueError) as e:
        raise ConfigError(
            f"{where}: expected {type(default).__name__}, got {value!r}", operation="config.load"
        ) from e
    return value


def _env_field(cls: type, name: str) -> str:
    """Resolve an upper-cased environment field name to the dataclass field it means."""
    matches = [f.name for f in fields(cls) if f.name.lower() == name.lower()]
    if name in matches:
        return name
    # Unmatched names pass through so _build reports them as unknown fields
    return matches[0] if matches else name.lower()


def _env_overrides(data: dict[str, Any]) -> dict[str, Any]:
    """Overlay ``LVRT_<SECTION>__<FIELD>`` variables onto the parsed file."""
    merged = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    for key, raw in os.environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX) :]
        if name.lower() == "log_level":
            merged.setdefault("logging", {})["level"] = raw
        elif name.lower() == "seed":
            merged["seed"] = raw
        elif "__" in name:
            section, field_name = name.split("__", 1)
            section = section.lower()
            if section not in SECTIONS:
                raise ConfigError(f"{key}: unknown section [{section}]", operation="config.load")
            merged.setdefault(section, {})[_env_field(SECTIONS[section], field_name)] = raw
    return merged


def _build(
    section: str, cls: type, values: dict[str, Any], extra: dict[str, Any] | None = None
) -> Any:
    defaults = _defaults(cls)
    derived = _DERIVED_FIELDS.get(section, set())
    unknown = sorted(set(values) - (set(defaults) - derived))
    if unknown:
        raise ConfigError(
            f"[{section}] unknown field(s): {', '.join(unknown)}", operation="config.load"
        )
    kwargs = {name: _coerce(section, name, value, defaults[name]) for name, value in values.items()}
    kwargs.update(extra or {})
    try:
        instance = cls(**kwargs)
        if isinstance(instance, ConverterParams):
            instance.validate()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}] {e}", operation="config.load") from e
    return instance


def parse_config(data: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from parsed TOML data (environment overrides applied).

    Raises:
        ConfigError: On an unknown section or field, a mistyped value or a
            violated invariant
    """
    data = _env_overrides(data)
    unknown = sorted(k for k in data if k not in SECTIONS and k != "seed")
    if unknown:
        raise ConfigError(
            f"Unknown configuration section(s): {', '.join(unknown)}", operation="config.load"
        )
    for name in SECTIONS:
        if name in data and not isinstance(data[name], dict):
            raise ConfigError(f"[{name}] must be a table", operation="config.load")
    seed = _coerce("top-level", "seed", data.get("seed", 0), 0)

    loss = _build("loss", LossWeights, data.get("loss", {}))
    sections = {
        name: _build(name, cls, data.get(name, {}))
        for name, cls in SECTIONS.items()
        if name not in ("training", "loss")
    }
    training = _build(
        "training", TrainConfig, data.get("training", {}), {"weights": loss, "seed": seed}
    )
    return RunConfig(training=training, loss=loss, seed=seed, **sections)


def load_config(config_path: str | Path | None = None) -> RunConfig:
    """Load the run configuration.

    Args:
        config_path: TOML file; None uses defaults plus environment overrides

    Returns:
        Validated RunConfig

    Raises:
        FileNotFoundError: If the config file doesn't exist
        ConfigError: If the file is malformed or a value is invalid
    """
    if config_path is None:
        return parse_config({})
    config_file = Path(config_path)
    if not config_file.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")
    with open(config_file, "rb") as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid TOML in {config_path}: {e}", operation="config.load") from e
    config = parse_config(data)
    logger.debug(f"Loaded configuration from {config_path}")
    return config
