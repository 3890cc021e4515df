"""Scenario configuration and the flat ``dotted.key = value`` document format.

Grammar (one setting per line)::

    # comment
    area.width = 4500
    speed.legit = [[0.5, 1.5], [2.7, 13.9]]
    routing.protocol = epidemic

Blank lines and ``#`` comments are ignored.  A value is parsed as JSON
(numbers, arrays, ``null``, quoted strings); anything that is not valid JSON
is taken as a bare string.  Keys not listed in :data:`KEYS` are rejected.
Omitted keys take the defaults below (the evaluation scenario: 4500 x 3400 m,
48 legit nodes plus 5 wormhole pairs, 12 h).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum


class Protocol(str, Enum):
    EPIDEMIC = "epidemic"
    SPRAY_AND_WAIT = "sprayandwait"
    PROPHET = "prophet"
    FIRST_CONTACT = "firstcontact"

    @classmethod
    def parse(cls, text: str | Protocol) -> Protocol:
        if isinstance(text, Protocol):
            return text
        key = str(text).strip().lower().replace("_", "").replace("-", "")
        for p in cls:
            if p.value == key:
                return p
        raise ValueError(f"unknown routing protocol {text!r}")


class ZVariant(str, Enum):
    STANDARD = "standard"
    MODIFIED = "modified"
    LOCAL = "local"
    DYNAMIC = "dynamic"


DEFAULT_Z_THRESHOLD = {
    ZVariant.STANDARD: 2.5,
    ZVariant.MODIFIED: 3.5,
    ZVariant.LOCAL: 2.5,
    ZVariant.DYNAMIC: 2.5,
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending setting."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigParseError(ConfigError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}", message)
        self.lineno = lineno


@dataclass(frozen=True)
class DetectorParams:
    z_variant: ZVariant = ZVariant.MODIFIED
    z_threshold: float | None = None  # None -> per-variant default
    similarity_threshold: float = 0.1
    audit_window: float = 600.0
    warmup: float = 1800.0
    sliding_window: float = 3600.0
    count_window: float | None = None  # relay/traffic horizon; None -> since time 0
    mutual_best: bool = True  # bind only ends that are each other's top traffic counterpart
    confirm_runs: int = 2  # consecutive runs a pair must pass before it is declared
    min_neighbors: int = 3  # smaller neighbor sets are too thin to judge similarity on

    def __post_init__(self):
        object.__setattr__(self, "z_variant", ZVariant(self.z_variant))

    @property
    def threshold(self) -> float:
        if self.z_threshold is None:
            return DEFAULT_Z_THRESHOLD[self.z_variant]
        return self.z_threshold

    def validate(self, sim_duration: float | None = None) -> None:
        if not self.threshold > 0:
            raise ConfigError("detector.z_threshold", "must be > 0")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ConfigError("detector.similarity_threshold", "must lie in [0, 1]")
        if not self.audit_window > 0:
            raise ConfigError("detector.audit_window", "must be > 0")
        if self.warmup < 0:
            raise ConfigError("detector.warmup", "must be >= 0")
        if not self.sliding_window > 0:
            raise ConfigError("detector.sliding_window", "must be > 0")
        if self.count_window is not None and not self.count_window > 0:
            raise ConfigError("detector.count_window", "must be > 0")
        if self.confirm_runs < 1:
            raise ConfigError("detector.confirm_runs", "must be >= 1")
        if self.min_neighbors < 0:
            raise ConfigError("detector.min_neighbors", "must be >= 0")
        if sim_duration is not None and sim_duration > 0 and self.warmup >= sim_duration:
            raise ConfigError("detector.warmup", "must be < sim.duration")


@dataclass(frozen=True)
class ScenarioConfig:
    area_width: float = 4500.0
    area_height: float = 3400.0
    num_legit_nodes: int = 48
    num_wormhole_pairs: int = 5
    sim_duration: float = 12 * 3600.0
    tick: float = 1.0
    legit_radio_range: float = 10.0
    wormhole_radio_range: float = 500.0
    legit_speed_ranges: tuple[tuple[float, float], ...] = ((0.5, 1.5), (2.7, 13.9))
    wormhole_speed_range: tuple[float, float] = (7.0, 10.0)
    legit_buffer: int = 5_000_000
    wormhole_buffer: int = 50_000_000
    legit_bitrate: float = 250_000.0
    wormhole_tunnel_bitrate: float = 10_000_000.0
    message_size_range: tuple[int, int] = (500_000, 1_000_000)
    message_interval_range: tuple[float, float] = (25.0, 35.0)
    routing_protocol: Protocol = Protocol.EPIDEMIC
    spray_copies: int = 6
    prophet_p_init: float = 0.75
    prophet_beta: float = 0.25
    prophet_gamma: float = 0.98
    prophet_aging_unit: float = 30.0
    detector_params: DetectorParams = field(default_factory=DetectorParams)
    rng_seed: int = 1
    position_interval: float = 0.0  # 0 disables POS records in the trace

    def __post_init__(self):
        object.__setattr__(self, "routing_protocol", Protocol.parse(self.routing_protocol))
        object.__setattr__(
            self, "legit_speed_ranges", tuple(tuple(map(float, r)) for r in self.legit_speed_ranges)
        )
        object.__setattr__(self, "wormhole_speed_range", tuple(map(float, self.wormhole_speed_range)))
        object.__setattr__(self, "message_size_range", tuple(map(int, self.message_size_range)))
        object.__setattr__(
            self, "message_interval_range", tuple(map(float, self.message_interval_range))
        )

    @property
    def num_nodes(self) -> int:
        return self.num_legit_nodes + 2 * self.num_wormhole_pairs

    def with_total_nodes(self, total: int) -> ScenarioConfig:
        """Return a copy whose population (legit + wormhole) equals ``total``."""
        return replace(self, num_legit_nodes=total - 2 * self.num_wormhole_pairs)

    def validate(self) -> ScenarioConfig:
        positive = {
            "area.width": self.area_width,
            "area.height": self.area_height,
            "sim.tick": self.tick,
            "radio.legit_range": self.legit_radio_range,
            "radio.wormhole_range": self.wormhole_radio_range,
            "buffer.legit": self.legit_buffer,
            "buffer.wormhole": self.wormhole_buffer,
            "bitrate.legit": self.legit_bitrate,
            "bitrate.tunnel": self.wormhole_tunnel_bitrate,
            "routing.spray_copies": self.spray_copies,
            "routing.prophet_aging_unit": self.prophet_aging_unit,
        }
        for key, value in positive.items():
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(key, f"must be > 0, got {value!r}")
        if not self.sim_duration >= 0:
            raise ConfigError("sim.duration", "must be >= 0")
        if self.sim_duration > 0 and self.tick > self.sim_duration:
            raise ConfigError("sim.tick", "must be <= sim.duration")
        if self.num_legit_nodes < 0:
            raise ConfigError("nodes.legit", "must be >= 0")
        if self.num_wormhole_pairs < 0:
            raise ConfigError("nodes.wormhole_pairs", "must be >= 0")
        if self.num_wormhole_pairs > 0 and self.num_legit_nodes < 1:
            raise ConfigError("nodes.legit", "a scenario with wormholes needs legit nodes")
        ranges = {
            "speed.wormhole": self.wormhole_speed_range,
            "message.size": self.message_size_range,
            "message.interval": self.message_interval_range,
        }
        for i, r in enumerate(self.legit_speed_ranges):
            ranges[f"speed.legit[{i}]"] = r
        if not self.legit_speed_ranges:
            raise ConfigError("speed.legit", "needs at least one range")
        for key, (lo, hi) in ranges.items():
            if not 0 < lo <= hi:
                raise ConfigError(key, f"need 0 < min <= max, got ({lo}, {hi})")
        if self.message_size_range[1] > self.legit_buffer:
            raise ConfigError("message.size", "largest message exceeds the legit buffer")
        for key, p in (
            ("routing.prophet_p_init", self.prophet_p_init),
            ("routing.prophet_beta", self.prophet_beta),
            ("routing.prophet_gamma", self.prophet_gamma),
        ):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(key, "must lie in [0, 1]")
        if self.position_interval < 0:
            raise ConfigError("trace.position_interval", "must be >= 0")
        self.detector_params.validate(self.sim_duration)
        return self


# dotted key -> (owner, attribute); owner "d" means DetectorParams
KEYS: dict[str, tuple[str, str]] = {
    "area.width": ("s", "area_width"),
    "area.height": ("s", "area_height"),
    "nodes.legit": ("s", "num_legit_nodes"),
    "nodes.wormhole_pairs": ("s", "num_wormhole_pairs"),
    "sim.duration": ("s", "sim_duration"),
    "sim.tick": ("s", "tick"),
    "sim.seed": ("s", "rng_seed"),
    "radio.legit_range": ("s", "legit_radio_range"),
    "radio.wormhole_range": ("s", "wormhole_radio_range"),
    "speed.legit": ("s", "legit_speed_ranges"),
    "speed.wormhole": ("s", "wormhole_speed_range"),
    "buffer.legit": ("s", "legit_buffer"),
    "buffer.wormhole": ("s", "wormhole_buffer"),
    "bitrate.legit": ("s", "legit_bitrate"),
    "bitrate.tunnel": ("s", "wormhole_tunnel_bitrate"),
    "message.size": ("s", "message_size_range"),
    "message.interval": ("s", "message_interval_range"),
    "routing.protocol": ("s", "routing_protocol"),
    "routing.spray_copies": ("s", "spray_copies"),
    "routing.prophet_p_init": ("s", "prophet_p_init"),
    "routing.prophet_beta": ("s", "prophet_beta"),
    "routing.prophet_gamma": ("s", "prophet_gamma"),
    "routing.prophet_aging_unit": ("s", "prophet_aging_unit"),
    "trace.position_interval": ("s", "position_interval"),
    "detector.z_variant": ("d", "z_variant"),
    "detector.z_threshold": ("d", "z_threshold"),
    "detector.similarity_threshold": ("d", "similarity_threshold"),
    "detector.audit_window": ("d", "audit_window"),
    "detector.warmup": ("d", "warmup"),
    "detector.sliding_window": ("d", "sliding_window"),
    "detector.count_window": ("d", "count_window"),
    "detector.mutual_best": ("d", "mutual_best"),
    "detector.confirm_runs": ("d", "confirm_runs"),
    "detector.min_neighbors": ("d", "min_neighbors"),
}

_INT_ATTRS = {
    "num_legit_nodes",
    "num_wormhole_pairs",
    "rng_seed",
    "legit_buffer",
    "wormhole_buffer",
    "spray_copies",
    "confirm_runs",
    "min_neighbors",
}


def parse_document(text: str) -> dict[str, object]:
    """Parse the flat key/value grammar into a ``{dotted_key: value}`` dict."""
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigParseError(lineno, f"expected 'key = value', got {raw!r}")
        if " " in key:
            raise ConfigParseError(lineno, f"malformed key {key!r}")
        if not value:
            raise ConfigParseError(lineno, f"missing value for {key!r}")
        if key in out:
            raise ConfigParseError(lineno, f"duplicate key {key!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            if value[0] in "[{\"":
                raise ConfigParseError(lineno, f"malformed value for {key!r}: {value}") from None
            out[key] = value
    return out


def _coerce(key: str, attr: str, value):
    try:
        if attr in _INT_ATTRS:
            if isinstance(value, bool) or not float(value).is_integer():
                raise ValueError
            return int(value)
        if attr == "legit_speed_ranges":
            return tuple((float(lo), float(hi)) for lo, hi in value)
        if attr in ("wormhole_speed_range", "message_size_range", "message_interval_range"):
            lo, hi = value
            return (lo, hi)
        if attr == "routing_protocol":
            return Protocol.parse(value)
        if attr == "mutual_best":
            if not isinstance(value, bool):
                raise ValueError
            return value
        if attr == "z_variant":
            return ZVariant(str(value).lower())
        if attr in ("z_threshold", "count_window") and value is None:
            return None
        if isinstance(value, bool):
            raise ValueError
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r}") from None


def config_from_mapping(values: dict[str, object], base: ScenarioConfig | None = None) -> ScenarioConfig:
    base = base or ScenarioConfig()
    scen: dict[str, object] = {}
    det: dict[str, object] = {}
    for key, value in values.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown setting")
        owner, attr = KEYS[key]
        (scen if owner == "s" else det)[attr] = _coerce(key, attr, value)
    params = replace(base.detector_params, **det)
    try:
        cfg = replace(base, detector_params=params, **scen)
    except ValueError as exc:
        raise ConfigError("config", str(exc)) from None
    return cfg.validate()


def load_config(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Parse and validate a scenario document; omitted keys keep the defaults."""
    return config_from_mapping(parse_document(text), base)


def _fmt(value) -> str:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return json.dumps(_listify(value))
    return json.dumps(value)


def _listify(value):
    if isinstance(value, tuple):
        return [_listify(v) for v in value]
    return value


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize ``cfg`` in the document grammar; ``load_config`` inverts it."""
    lines = []
    for key, (owner, attr) in KEYS.items():
        obj = cfg if owner == "s" else cfg.detector_params
        lines.append(f"{key} = {_fmt(getattr(obj, attr))}")
    return "\n".join(lines) + "\n"


def scenario_fields() -> list[str]:
    return [f.name for f in fields(ScenarioConfig)]
