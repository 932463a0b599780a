"""
Experiment configuration.

A configuration is a flat TOML table. Every key has a built-in default;
values from a file override the defaults and command-line flags override
the file.
"""

import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import toml

from .errors import ConfigError

logger = logging.getLogger(__name__)

#: Keys that change how a run executes but not what it computes.
EXECUTION_KEYS = ("threads", "out_dir")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every setting of an experiment run, with its default."""

    nx: int = 65
    ny: int = 33
    x_min: float = 0.0
    x_max: float = 2.0
    y_min: float = 0.0
    y_max: float = 1.0
    interface_x: float = 0.75
    alpha_min: float = -1.0
    alpha_max: float = 1.0
    alpha_count: int = 6
    beta_min: float = -1.0
    beta_max: float = 1.0
    beta_count: int = 6
    gamma_min: float = 0.5
    gamma_max: float = 1.5
    gamma_count: int = 6
    sensor_target: int = 200
    sensor_radius_factor: float = 3.0
    kernel: str = "bump"
    M_max: int = 15
    tol: float = 1e-12
    products: List[str] = field(default_factory=lambda: ["L2", "H1"])
    epsilon: float = 1e-3
    series: int = 16
    noise_M: int = 5
    trials: int = 10_000
    seed: int = 0
    threads: int = 1
    out_dir: str = "results"

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def ranges(self) -> Tuple[Tuple[float, float], ...]:
        return (
            (self.alpha_min, self.alpha_max),
            (self.beta_min, self.beta_max),
            (self.gamma_min, self.gamma_max),
        )

    @property
    def counts(self) -> Tuple[int, int, int]:
        return (self.alpha_count, self.beta_count, self.gamma_count)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """Build a configuration from a flat mapping, coercing values.

        Raises:
            ConfigError: On unknown keys, wrong types or invalid values
        """
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"Unknown config keys: {unknown}")
        values = {
            key: _coerce(key, known[key].type, value) for key, value in data.items()
        }
        return cls(**values)

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = toml.loads(text)
        except toml.TomlDecodeError as e:
            raise ConfigError(f"Invalid TOML: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_toml(self) -> str:
        return toml.dumps(self.to_dict())

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with the given keys replaced; ``None`` values are ignored."""
        data = self.to_dict()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig.from_dict(data)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the canonical TOML dump, execution keys left out."""
        data = {k: v for k, v in self.to_dict().items() if k not in EXECUTION_KEYS}
        return hashlib.sha256(toml.dumps(data).encode("utf-8")).hexdigest()


def _coerce(key: str, kind: Any, value: Any) -> Any:
    if kind in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{key}' must be an integer, got {value!r}")
        if float(value) != int(value):
            raise ConfigError(f"'{key}' must be an integer, got {value!r}")
        return int(value)
    if kind in (float, "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{key}' must be a number, got {value!r}")
        return float(value)
    if kind in (str, "str"):
        if not isinstance(value, str):
            raise ConfigError(f"'{key}' must be a string, got {value!r}")
        return value
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(v, str) for v in value
    ):
        raise ConfigError(f"'{key}' must be a list of strings, got {value!r}")
    return [v.upper() for v in value]


def _validate(config: ExperimentConfig) -> None:
    checks = [
        (config.nx >= 3 and config.ny >= 3, "nx and ny must be at least 3"),
        (config.x_max > config.x_min, "x_max must exceed x_min"),
        (config.y_max > config.y_min, "y_max must exceed y_min"),
        (
            config.x_min < config.interface_x < config.x_max,
            "interface_x must lie strictly inside (x_min, x_max)",
        ),
        (min(config.counts) >= 1, "parameter counts must be positive"),
        (
            all(lo <= hi for lo, hi in config.ranges),
            "parameter ranges must satisfy min <= max",
        ),
        (config.sensor_target >= 1, "sensor_target must be positive"),
        (config.sensor_radius_factor > 0, "sensor_radius_factor must be positive"),
        (config.kernel in ("bump", "box"), "kernel must be 'bump' or 'box'"),
        (config.M_max >= 1, "M_max must be positive"),
        (config.tol >= 0, "tol must be nonnegative"),
        (
            len(config.products) > 0
            and all(p in ("L2", "H1") for p in config.products),
            "products must be a nonempty subset of ['L2', 'H1']",
        ),
        (config.epsilon >= 0, "epsilon must be nonnegative"),
        (config.series >= 1, "series must be positive"),
        (config.noise_M >= 1, "noise_M must be positive"),
        (config.trials >= 1, "trials must be positive"),
        (config.seed >= 0, "seed must be nonnegative"),
        (config.threads >= 1, "threads must be positive"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)


def load_config(
    path: Optional[Union[str, Path]] = None, **overrides: Any
) -> ExperimentConfig:
    """Load a configuration file and apply flag overrides.

    Args:
        path: TOML file; defaults only when None
        **overrides: Flag values; ``None`` means "not given"

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: If the file is missing, malformed or invalid
    """
    config = ExperimentConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file '{path}' does not exist")
        logger.debug("Loading config from %s", path)
        config = ExperimentConfig.from_toml(path.read_text(encoding="utf-8"))
    return config.with_overrides(**overrides)
