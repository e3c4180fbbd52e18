"""Configuration module: experiment settings from INI files, presets and flags."""
import configparser
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from client import DhtParams, StopRule
from errors import ConfigError, ExportError
from network import GammaScope, NetworkParams
from routing_table import BucketFill
from workload import OriginPolicy, SamplingSpec, SeedingSpec

PRESET_DIR = Path(__file__).resolve().parent.parent / "presets"

EXPERIMENTS = ("hops", "sampling", "seeding")
SECTIONS = ("run", "netsim", "dht", "workload")

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}

Range = Tuple[float, float]

# NetworkParams field -> INI key, for error messages.
_PARAM_KEYS = {
    "conn_delay_range": "delay_ms",
    "fast_delay_range": "fast_delay_ms",
    "slow_delay_range": "slow_delay_ms",
}


def _option(section: str, default: Any = None):
    return field(default=default, metadata={"section": section})


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Fully resolved parameters of one run.

    Field names are the INI keys; each field's metadata names its section.
    """
    experiment: str = _option("run", "")
    seed: int = _option("run", 1)
    repeat: int = _option("run", 1)
    workers: int = _option("run", 1)
    out: str = _option("run", "results")

    node_count: int = _option("netsim", 12000)
    fast_error_rate: float = _option("netsim", 0.10)
    slow_error_rate: float = _option("netsim", 0.0)
    delay_ms: Range = _option("netsim", (90.0, 420.0))
    fast_delay_ms: Range = _option("netsim", (5.0, 50.0))
    slow_delay_ms: Range = _option("netsim", (2000.0, 5000.0))
    gamma_ms: float = _option("netsim", 0.0)
    gamma_scope: GammaScope = _option("netsim", GammaScope.CALLEE)
    persist_load: bool = _option("netsim", False)

    k: int = _option("dht", 20)
    alpha: int = _option("dht", 3)
    beta: int = _option("dht", 20)
    stop_rule: StopRule = _option("dht", StopRule.CLOSEST_QUERIED)
    stall_limit: int = _option("dht", 4)
    bucket_fill: BucketFill = _option("dht", BucketFill.RANDOM)

    rows: int = _option("workload", 512)
    cols: int = _option("workload", 512)
    sample_count: int = _option("workload", 262_144)
    queries_per_node: int = _option("workload", 80)
    sets: int = _option("workload", 100)
    seeders: int = _option("workload", 1)
    origin_policy: OriginPolicy = _option("workload", OriginPolicy.FIXED)

    @property
    def experiment_id(self) -> str:
        return f"{self.experiment}-s{self.seed}"

    def network_params(self) -> NetworkParams:
        return NetworkParams(
            node_count=self.node_count,
            fast_error_rate=self.fast_error_rate,
            slow_error_rate=self.slow_error_rate,
            conn_delay_range=self.delay_ms,
            fast_delay_range=self.fast_delay_ms,
            slow_delay_range=self.slow_delay_ms,
            gamma_ms=self.gamma_ms,
            gamma_scope=self.gamma_scope,
            persist_load=self.persist_load,
            bucket_fill=self.bucket_fill,
        )

    def dht_params(self) -> DhtParams:
        return DhtParams(k=self.k, alpha=self.alpha, beta=self.beta,
                         stop_rule=self.stop_rule, stall_limit=self.stall_limit)

    def sampling_spec(self) -> SamplingSpec:
        return SamplingSpec(queries_per_node=self.queries_per_node, sets=self.sets,
                            origin_policy=self.origin_policy, find_value=self.experiment != "hops")

    def seeding_spec(self) -> SeedingSpec:
        return SeedingSpec(sample_count=self.sample_count, seeders=self.seeders)

    def validate(self) -> "ExperimentConfig":
        """
        Check every setting before any simulation starts.

        Raises:
            ConfigError: naming the first invalid key
        """
        if not self.experiment:
            raise ConfigError("experiment", f"is required (one of {', '.join(EXPERIMENTS)})")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        for key in ("repeat", "workers"):
            if getattr(self, key) < 1:
                raise ConfigError(key, f"must be >= 1, got {getattr(self, key)}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be non-negative, got {self.seed}")
        if not self.out:
            raise ConfigError("out", "output directory must not be empty")

        try:
            self.network_params()
        except ConfigError as e:
            key = _PARAM_KEYS.get(e.key, e.key)
            raise ConfigError(key, str(e).partition(": ")[2]) from None
        self.dht_params()
        self.sampling_spec()
        self.seeding_spec()

        for key in ("rows", "cols"):
            if not 1 <= getattr(self, key) <= 1 << 16:
                raise ConfigError(key, f"must be in [1, 65536], got {getattr(self, key)}")
        block_size = self.rows * self.cols
        if self.sample_count > block_size:
            raise ConfigError("sample_count", f"cannot exceed rows * cols = {block_size}, got {self.sample_count}")
        if self.queries_per_node > block_size:
            raise ConfigError("queries_per_node", f"cannot exceed rows * cols = {block_size}, got {self.queries_per_node}")
        if self.seeders > self.node_count:
            raise ConfigError("seeders", f"cannot exceed node_count = {self.node_count}, got {self.seeders}")
        return self

    def sections(self) -> Dict[str, Dict[str, str]]:
        """Settings grouped by INI section, rendered as INI values."""
        grouped: Dict[str, Dict[str, str]] = {name: {} for name in SECTIONS}
        for f in fields(self):
            grouped[f.metadata["section"]][f.name] = format_value(getattr(self, f.name))
        return grouped

    def snapshot(self) -> Dict[str, Dict[str, Any]]:
        """JSON-friendly view for aggregates: enums by value, ranges as [min, max]."""
        grouped: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            grouped[f.metadata["section"]][f.name] = value
        return grouped


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_DEFAULTS = ExperimentConfig()


def format_value(value: Any) -> str:
    """
    Render a setting the way the INI grammar writes it.

    Examples:
        (50.0, 300.0) -> "50:300"
        0.015 -> "0.015"
        True -> "true"
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return ":".join(format_value(v) for v in value)
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def parse_range(key: str, text: str) -> Range:
    """
    Parse a MIN:MAX range in milliseconds.

    Raises:
        ConfigError: if the text is malformed, negative or inverted
    """
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(key, f"expected MIN:MAX, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(key, f"expected numbers in MIN:MAX, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise ConfigError(key, f"range must satisfy 0 <= MIN <= MAX, got {text!r}")
    return lo, hi


def convert_value(key: str, raw: str) -> Any:
    """
    Convert a raw INI or flag string to the type of the named setting.

    Raises:
        ConfigError: if key is unknown or raw does not parse
    """
    if key not in _FIELDS:
        raise ConfigError(key, "unknown setting")
    default = getattr(_DEFAULTS, key)
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(f"expected true or false, got {text!r}")
        if isinstance(default, Enum):
            return type(default)(text.lower())
        if isinstance(default, tuple):
            return parse_range(key, text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ConfigError:
        raise
    except ValueError as e:
        if isinstance(default, Enum):
            choices = ", ".join(member.value for member in type(default))
            raise ConfigError(key, f"must be one of {choices}, got {text!r}") from None
        raise ConfigError(key, f"invalid value {text!r} ({e})") from None


def resolve_config_path(name: Union[str, Path]) -> Path:
    """
    Map --config to a file: an existing path, or the name of a shipped preset.

    Raises:
        ConfigError: if neither exists
    """
    path = Path(name)
    if path.is_file():
        return path
    preset = PRESET_DIR / f"{Path(name).stem}.ini"
    if preset.is_file():
        return preset
    raise ConfigError("config", f"no config file or preset named {str(name)!r}")


def available_presets() -> list:
    return sorted(p.stem for p in PRESET_DIR.glob("*.ini"))


def read_config_file(path: Path) -> Dict[str, Any]:
    """
    Read an INI file into converted settings.

    Raises:
        ConfigError: on unknown sections or keys, keys placed in the wrong
            section, or unparsable values
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",), default_section="__unused__")
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except configparser.Error as e:
        raise ConfigError("config", f"{path}: {e}") from None
    except OSError as e:
        raise ConfigError("config", f"could not read {path}: {e}") from None

    values: Dict[str, Any] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, f"unknown section (expected one of {', '.join(SECTIONS)})")
        for key, raw in parser.items(section):
            if key not in _FIELDS:
                raise ConfigError(key, f"unknown key in [{section}]")
            expected = _FIELDS[key].metadata["section"]
            if expected != section:
                raise ConfigError(key, f"belongs in [{expected}], found in [{section}]")
            values[key] = convert_value(key, raw)
    return values


def parse_config(path: Optional[Union[str, Path]] = None,
                 overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Resolve a run's configuration: built-in defaults, then the file, then flags.

    Args:
        path: INI file or preset name (optional)
        overrides: Settings from command-line flags; strings are converted
            like INI values, None entries are ignored

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: naming the offending key
    """
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(resolve_config_path(path)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values[key] = convert_value(key, value) if isinstance(value, str) else value
    unknown = set(values) - set(_FIELDS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown setting")
    return replace(_DEFAULTS, **values).validate()


def render_config(config: ExperimentConfig) -> str:
    """INI text of a resolved config; parse_config accepts it back unchanged."""
    lines = []
    for section, values in config.sections().items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in values.items())
        lines.append("")
    return "\n".join(lines)


def write_config(config: ExperimentConfig, path: Path) -> Path:
    """
    Echo a resolved config to path.

    Raises:
        ExportError: if the file cannot be written
    """
    output_path = Path(path)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(render_config(config))
    except OSError as e:
        raise ExportError(output_path, e) from e
    return output_path
