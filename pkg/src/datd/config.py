"""Scenario configuration: knobs, the flat config-file format, entity rosters."""

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping

_DIRECTIONS = ("down", "symmetric")


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated oracle deployment.

    ``alpha`` and ``beta`` are the malicious fractions of sources and nodes;
    ``gamma`` the credibility discount factor; ``omega`` the tamper range;
    ``tau`` the probability that a task is high-value. Value ranges are in
    price units. ``dropout`` is a per-entity, per-task absence probability
    and defaults to full participation.
    """

    seed: int
    n_sources: int = 20
    n_nodes: int = 20
    alpha: float = 0.4
    beta: float = 0.3
    gamma: float = 0.5
    omega: float = 0.5
    tau: float = 0.1
    n_tasks: int = 100
    truth_range: tuple = (0.0, 100.0)
    low_value_range: tuple = (1.0, 100.0)
    high_value_range: tuple = (100.0, 10000.0)
    noise_fraction: float = 0.01
    dropout: float = 0.0
    coordinated: bool = False
    direction: str = "down"
    high_value_threshold: float = 100.0

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError("seed must be an integer")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for name in ("n_sources", "n_nodes", "n_tasks"):
            count = getattr(self, name)
            if not isinstance(count, int) or isinstance(count, bool) or count < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("alpha", "beta", "dropout"):
            fraction = getattr(self, name)
            if not 0.0 <= fraction < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        if not self.omega >= 0.0:
            raise ValueError("omega must be non-negative")
        if not self.noise_fraction >= 0.0:
            raise ValueError("noise_fraction must be non-negative")
        if not self.high_value_threshold > 0.0:
            raise ValueError("high_value_threshold must be positive")
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"direction must be one of {_DIRECTIONS}")
        for name in ("truth_range", "low_value_range", "high_value_range"):
            rng = getattr(self, name)
            if (
                len(rng) != 2
                or not all(math.isfinite(float(v)) for v in rng)
                or not float(rng[0]) < float(rng[1])
            ):
                raise ValueError(f"{name} must be an increasing (low, high) pair")
            object.__setattr__(self, name, (float(rng[0]), float(rng[1])))


_FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ScenarioConfig))
_RANGE_FIELDS = ("truth_range", "low_value_range", "high_value_range")
_INT_FIELDS = ("seed", "n_sources", "n_nodes", "n_tasks")
_BOOL_FIELDS = ("coordinated",)
_STR_FIELDS = ("direction",)


def make_config(**overrides) -> ScenarioConfig:
    """Build a config from field overrides, rejecting unknown keys."""
    unknown = set(overrides) - set(_FIELD_NAMES)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ScenarioConfig(**overrides)


def _parse_value(key: str, raw: str):
    if key in _INT_FIELDS:
        return int(raw)
    if key in _BOOL_FIELDS:
        lowered = raw.lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"{key} must be true or false, got {raw!r}")
        return lowered == "true"
    if key in _STR_FIELDS:
        return raw
    if key in _RANGE_FIELDS:
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ValueError(f"{key} must be 'low, high', got {raw!r}")
        return (float(parts[0]), float(parts[1]))
    return float(raw)


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines into a typed override mapping.

    Blank lines and ``#`` comments are skipped; keys must be ScenarioConfig
    field names.
    """
    overrides: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELD_NAMES:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        overrides[key] = _parse_value(key, raw.strip())
    return overrides


def _format_value(key: str, value) -> str:
    if key in _RANGE_FIELDS:
        return f"{value[0]!r}, {value[1]!r}"
    if key in _BOOL_FIELDS:
        return "true" if value else "false"
    if key in _STR_FIELDS:
        return value
    return repr(value)


def format_config(config: ScenarioConfig) -> str:
    """Render a config as the flat file format, one field per line."""
    lines = [
        f"{name} = {_format_value(name, getattr(config, name))}"
        for name in _FIELD_NAMES
    ]
    return "\n".join(lines) + "\n"


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config_text(handle.read())


def entity_ids(prefix: str, n: int) -> list:
    """Zero-padded ids whose lexicographic order is numeric order."""
    width = max(2, len(str(n - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def source_ids(config: ScenarioConfig) -> list:
    return entity_ids("s", config.n_sources)


def node_ids(config: ScenarioConfig) -> list:
    return entity_ids("n", config.n_nodes)


def _malicious_count(fraction: float, n: int) -> int:
    # nudge before flooring so fractions like 0.29 * 100 land on 29, not 28
    return int(fraction * n + 1e-9)


def malicious_sources(config: ScenarioConfig) -> frozenset:
    """The first floor(alpha * n_sources) source ids."""
    return frozenset(source_ids(config)[: _malicious_count(config.alpha, config.n_sources)])


def malicious_nodes(config: ScenarioConfig) -> frozenset:
    """The first floor(beta * n_nodes) node ids."""
    return frozenset(node_ids(config)[: _malicious_count(config.beta, config.n_nodes)])
