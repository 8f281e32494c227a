import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from .bath import BathModel
from .errors import ConfigError
from .twoqubit import PureStateAmplitudes, TwoQubitParams

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger(__name__)

DEFAULT_CONFIG: Dict[str, Any] = {
    "bath": {
        "type": "discrete",
        "temperature": 0.0,
        "modes": [],
        "eta_c": 0.0,
        "omega_c": 1.0,
    },
    "model": {"omega_a": 1.0, "omega_b": 1.0, "j": 0.0},
    "state": {"a1": [1.0, 0.0], "a2": [0.0, 0.0], "a3": [0.0, 0.0], "a4": [0.0, 0.0]},
    "time": {"t_max": 10.0, "steps": 1000, "substeps": 10},
    "sweep": {
        "key": None,
        "values": None,
        "start": None,
        "stop": None,
        "count": None,
        "fit_rates": False,
        "window": None,
        "oracle": False,
    },
    "verify": {
        "oracle_tolerance": 1e-6,
        "order_min": 8.0,
        "order_max": 32.0,
        "concurrence_tolerance": 1e-9,
        "purity_tolerance": 1e-9,
        "substeps": None,
    },
}

# Amplitudes further than this from unit norm are renormalized with a warning
RENORMALIZE_WARN_TOL = 1e-6

# Sections whose scalars a sweep may vary
SWEEPABLE = ("bath", "model", "state", "time")

# Bath keys each bath type reads
BATH_KEYS = {
    "discrete": ("temperature", "modes"),
    "ohmic": ("temperature", "eta_c", "omega_c"),
}


@dataclass(frozen=True)
class SweepConfig:
    """Parameter scan over one scalar config key.

    Attributes:
        key (str): Dotted path of the swept value, e.g. bath.temperature
        values (Tuple[float, ...]): Points in sweep order
        fit_rates (bool): Whether to fit concurrence and coherence decay rates
        window (Optional[Tuple[float, float]]): Fit window, None for [5 tau_phi, 10 tau_phi]
        oracle (bool): Use the Runge-Kutta integrator instead of the closed form
    """

    key: str
    values: Tuple[float, ...]
    fit_rates: bool = False
    window: Optional[Tuple[float, float]] = None
    oracle: bool = False


@dataclass(frozen=True)
class VerifyConfig:
    oracle_tolerance: float = 1e-6
    order_min: float = 8.0
    order_max: float = 32.0
    concurrence_tolerance: float = 1e-9
    purity_tolerance: float = 1e-9
    substeps: Optional[int] = None


@dataclass(frozen=True)
class RunConfig:
    """Validated simulation scenario.

    Attributes:
        bath (BathModel): Bath realization
        params (TwoQubitParams): Two-qubit Hamiltonian parameters
        state (PureStateAmplitudes): Initial pure state
        t_max (float): Final time
        steps (int): Grid intervals
        substeps (int): Runge-Kutta steps per grid interval
        sweep (Optional[SweepConfig]): Scan definition, if present
        verify (VerifyConfig): Tolerances for the verification suite
        raw (Dict[str, Any]): Parsed YAML document, used to apply sweep overrides
        lines (Dict[str, int]): 1-based line of every dotted key in the source
        source (str): Where the config was read from
    """

    bath: BathModel
    params: TwoQubitParams
    state: PureStateAmplitudes
    t_max: float
    steps: int
    substeps: int
    sweep: Optional[SweepConfig]
    verify: VerifyConfig
    raw: Dict[str, Any] = field(repr=False, compare=False, default_factory=dict)
    lines: Dict[str, int] = field(repr=False, compare=False, default_factory=dict)
    source: str = ""


def _line_map(node: yaml.Node, prefix: str = "") -> Dict[str, int]:
    """Map dotted key paths to the 1-based line where each key appears."""
    lines = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}{key_node.value}"
            lines[path] = key_node.start_mark.line + 1
            lines.update(_line_map(value_node, f"{path}."))
    elif isinstance(node, yaml.SequenceNode):
        for index, item in enumerate(node.value):
            path = f"{prefix}{index}"
            lines[path] = item.start_mark.line + 1
            lines.update(_line_map(item, f"{path}."))
    return lines


class _Reader:
    """Typed access to one config document with line-anchored errors."""

    def __init__(self, raw: Dict[str, Any], lines: Dict[str, int], source: str):
        self.raw = raw
        self.lines = lines
        self.source = source

    def error(self, path: str, message: str) -> ConfigError:
        # fall back to the closest enclosing key that has a line
        probe = path
        while probe and probe not in self.lines:
            probe = probe.rpartition(".")[0]
        return ConfigError(f"{path}: {message}", self.lines.get(probe), self.source)

    def section(self, name: str) -> Dict[str, Any]:
        value = self.raw.get(name) or {}
        if not isinstance(value, dict):
            raise self.error(name, "expected a mapping")
        return value

    def get(self, section: str, key: str) -> Any:
        return self.section(section).get(key, DEFAULT_CONFIG[section][key])

    def number(self, section: str, key: str, value: Any = None, path: str = "") -> float:
        value = self.get(section, key) if value is None else value
        path = path or f"{section}.{key}"
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise self.error(path, "must be finite")
        return float(value)

    def integer(self, section: str, key: str, minimum: int) -> int:
        value = self.get(section, key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(f"{section}.{key}", f"expected an integer, got {value!r}")
        if value < minimum:
            raise self.error(f"{section}.{key}", f"must be >= {minimum}, got {value}")
        return value


def _parse_bath(reader: _Reader) -> BathModel:
    kind = reader.get("bath", "type")
    temperature = reader.number("bath", "temperature")
    try:
        if kind == "discrete":
            modes = reader.get("bath", "modes")
            if not isinstance(modes, list) or not modes:
                raise reader.error("bath.modes", "a discrete bath needs a non-empty list of modes")
            pairs = []
            for index, mode in enumerate(modes):
                path = f"bath.modes.{index}"
                if not isinstance(mode, dict) or set(mode) != {"g", "omega"}:
                    raise reader.error(path, "each mode needs exactly the keys g and omega")
                g = reader.number("bath", "modes", mode["g"], f"{path}.g")
                omega = reader.number("bath", "modes", mode["omega"], f"{path}.omega")
                if g < 0:
                    raise reader.error(f"{path}.g", f"must be >= 0, got {g}")
                if omega <= 0:
                    raise reader.error(f"{path}.omega", f"must be positive, got {omega}")
                pairs.append((g, omega))
            bath = BathModel.discrete(pairs, temperature)
        elif kind == "ohmic":
            eta_c = reader.number("bath", "eta_c")
            omega_c = reader.number("bath", "omega_c")
            bath = BathModel.ohmic_bath(eta_c, omega_c, temperature)
        else:
            raise reader.error("bath.type", f"expected 'discrete' or 'ohmic', got {kind!r}")
    except ConfigError:
        raise
    except ValueError as e:
        raise reader.error("bath", str(e)) from e
    return bath


def _parse_state(reader: _Reader) -> PureStateAmplitudes:
    amplitudes = []
    for key in ("a1", "a2", "a3", "a4"):
        pair = reader.get("state", key)
        path = f"state.{key}"
        if not isinstance(pair, list) or len(pair) != 2:
            raise reader.error(path, f"expected [re, im], got {pair!r}")
        re_part = reader.number("state", key, pair[0], path)
        im_part = reader.number("state", key, pair[1], path)
        amplitudes.append(complex(re_part, im_part))
    return normalize_amplitudes(amplitudes, lambda msg: reader.error("state", msg))


def normalize_amplitudes(amplitudes: List[complex], on_error=None) -> PureStateAmplitudes:
    """Normalize user amplitudes, warning when they were off by more than 1e-6."""
    norm = float(np.sum(np.abs(np.asarray(amplitudes, dtype=complex)) ** 2))
    if norm == 0.0:
        message = "amplitudes are all zero"
        raise on_error(message) if on_error else ValueError(message)
    if abs(norm - 1.0) > RENORMALIZE_WARN_TOL:
        logger.warning(f"Amplitudes have sum |a|^2 = {norm:.9g}; renormalizing")
    return PureStateAmplitudes.normalized(amplitudes)


def _parse_sweep(reader: _Reader) -> Optional[SweepConfig]:
    if "sweep" not in reader.raw:
        return None
    key = reader.get("sweep", "key")
    if not isinstance(key, str):
        raise reader.error("sweep.key", "expected a dotted key such as bath.temperature")
    target = resolve_key(reader.raw, key) if key.split(".")[0] in SWEEPABLE else None
    if isinstance(target, bool) or not isinstance(target, (int, float)):
        raise reader.error("sweep.key", f"unknown or non-scalar sweep key {key!r}")
    head, _, rest = key.partition(".")
    kind = reader.get("bath", "type")
    if head == "bath" and rest.split(".")[0] not in BATH_KEYS.get(kind, ()):
        raise reader.error("sweep.key", f"{key!r} has no effect on a bath of type {kind!r}")

    values = reader.get("sweep", "values")
    if values is not None:
        if not isinstance(values, list) or not values:
            raise reader.error("sweep.values", "expected a non-empty list of numbers")
        points = tuple(reader.number("sweep", "values", v) for v in values)
    else:
        start = reader.number("sweep", "start")
        stop = reader.number("sweep", "stop")
        count = reader.integer("sweep", "count", 1)
        points = tuple(float(v) for v in np.linspace(start, stop, count))

    window = reader.get("sweep", "window")
    if window is not None:
        if not isinstance(window, list) or len(window) != 2:
            raise reader.error("sweep.window", "expected [t_start, t_stop]")
        window = tuple(reader.number("sweep", "window", v) for v in window)
        if not window[0] < window[1]:
            raise reader.error("sweep.window", "start must precede stop")
    return SweepConfig(
        key=key,
        values=points,
        fit_rates=bool(reader.get("sweep", "fit_rates")),
        window=window,
        oracle=bool(reader.get("sweep", "oracle")),
    )


def _parse_verify(reader: _Reader) -> VerifyConfig:
    substeps = reader.get("verify", "substeps")
    if substeps is not None:
        substeps = reader.integer("verify", "substeps", 1)
    return VerifyConfig(
        oracle_tolerance=reader.number("verify", "oracle_tolerance"),
        order_min=reader.number("verify", "order_min"),
        order_max=reader.number("verify", "order_max"),
        concurrence_tolerance=reader.number("verify", "concurrence_tolerance"),
        purity_tolerance=reader.number("verify", "purity_tolerance"),
        substeps=substeps,
    )


def resolve_key(raw: Dict[str, Any], key: str) -> Any:
    """Value at a dotted path of the merged config, or None when absent."""
    head, _, rest = key.partition(".")
    node: Any = raw.get(head, DEFAULT_CONFIG.get(head))
    if node is None or not rest:
        return node
    defaults = DEFAULT_CONFIG.get(head, {})
    for depth, part in enumerate(rest.split(".")):
        if isinstance(node, dict):
            fallback = defaults.get(part) if depth == 0 else None
            node = node.get(part, fallback)
        elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        else:
            return None
    return node


def build_config(
    raw: Dict[str, Any], lines: Optional[Dict[str, int]] = None, source: str = ""
) -> RunConfig:
    """Validate a parsed document into a RunConfig.

    Raises:
        ConfigError: On the first invalid entry, with its source line when known
    """
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", 1, source)
    lines = lines or {}
    reader = _Reader(raw, lines, source)
    for name in raw:
        if name not in DEFAULT_CONFIG:
            raise reader.error(name, "unknown section")

    t_max = reader.number("time", "t_max")
    if t_max <= 0:
        raise reader.error("time.t_max", f"must be positive, got {t_max}")
    try:
        params = TwoQubitParams(
            omega_a=reader.number("model", "omega_a"),
            omega_b=reader.number("model", "omega_b"),
            j=reader.number("model", "j"),
        )
    except ValueError as e:
        raise reader.error("model", str(e)) from e

    return RunConfig(
        bath=_parse_bath(reader),
        params=params,
        state=_parse_state(reader),
        t_max=t_max,
        steps=reader.integer("time", "steps", 2),
        substeps=reader.integer("time", "substeps", 1),
        sweep=_parse_sweep(reader),
        verify=_parse_verify(reader),
        raw=raw,
        lines=lines,
        source=source,
    )


def _read_document(text: str, source: str) -> Tuple[Any, Dict[str, int]]:
    """Parsed YAML plus the line of every dotted key."""
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid YAML: {getattr(e, 'problem', None) or e}", line, source) from e
    lines = _line_map(node) if node is not None else {}
    return ({} if raw is None else raw), lines


def _read_file(config_path: str) -> str:
    try:
        with open(config_path, "r") as file:
            return file.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", None, config_path) from e


def parse_config(text: str, source: str = "") -> RunConfig:
    """Parse YAML text into a RunConfig with line-anchored errors."""
    raw, lines = _read_document(text, source)
    return build_config(raw, lines, source)


def load_config(config_path: str) -> RunConfig:
    """Load a scenario from a YAML file.

    Args:
        config_path (str): Path to the YAML config

    Returns:
        RunConfig: Validated scenario

    Raises:
        ConfigError: If the file is unreadable or invalid
    """
    config = parse_config(_read_file(config_path), config_path)
    logger.info(f"Loaded configuration from {config_path}")
    return config


def load_bath(config_path: str) -> BathModel:
    """Read only the bath section of a config file."""
    raw, lines = _read_document(_read_file(config_path), config_path)
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", 1, config_path)
    return _parse_bath(_Reader({"bath": raw.get("bath") or {}}, lines, config_path))


def with_override(config: RunConfig, key: str, value: float) -> RunConfig:
    """Copy of the config with one dotted scalar replaced, revalidated."""
    raw = copy.deepcopy(config.raw)
    if isinstance(resolve_key(raw, key), int) and float(value).is_integer():
        value = int(value)
    head, _, rest = key.partition(".")
    section = raw.setdefault(head, {})
    parts = rest.split(".")
    node: Any = section
    for part in parts[:-1]:
        node = node[int(part)] if isinstance(node, list) else node[part]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return build_config(raw, config.lines, config.source)
