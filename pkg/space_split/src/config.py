"""
Experiment configuration: one flat record, read from INI-like or JSON text.

    [experiment]
    mode = sweep
    map = baker
    sweep = 0.0, 0.05, 0.1, 0.15, 0.2
    n_steps = 1e6
    k_grid = 1, 2, 3, 5, 8, 11, 16, 20
    seeds = 0, 1, 2
"""

import configparser
import json
import math
import re
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError
from .oracles import FdConfig
from .registry import available_maps, get_map, get_observable
from .s3core import DEFAULT_K_GRID, DEFAULT_WARMUP, S3Config

MODES = ("run", "sweep", "converge", "scaling", "lyapunov", "fd")
FORMATS = ("csv", "json")
SCALING_AXES = ("n", "k")

# Short spellings accepted in config files
KEY_ALIASES = {
    "map": "map_name",
    "n": "n_steps",
    "t": "warmup",
    "k": "select_k",
    "seed": "seeds",
    "fmt": "format",
}

# Field name -> value kind used when coercing text
_KINDS = {
    "mode": "str",
    "map_name": "str",
    "params": "floats",
    "perturb_dir": "floats",
    "observable": "str",
    "n_steps": "int",
    "warmup": "int",
    "k_grid": "ints",
    "select_k": "int?",
    "seeds": "ints",
    "n_chains": "int",
    "deterministic_init": "bool",
    "center_observable": "bool",
    "sweep": "floats",
    "delta_s": "float",
    "fd_samples": "int",
    "fd_warmup": "int",
    "fd_chains": "int",
    "reference": "float?",
    "fit_degree": "int?",
    "scaling_axis": "str",
    "scaling_n": "ints",
    "probe_steps": "int",
    "vary_frame": "bool",
    "workers": "int?",
    "output": "str",
    "format": "str",
    "timestamp": "bool",
}

_TRUE = {"1", "yes", "true", "on"}
_FALSE = {"0", "no", "false", "off"}


@dataclass
class ExperimentConfig:
    mode: str = "run"
    map_name: str = "baker"
    # None falls back to the map class defaults
    params: Optional[Tuple[float, ...]] = None
    perturb_dir: Optional[Tuple[float, ...]] = None
    observable: str = ""
    n_steps: int = 1_000_000
    warmup: int = DEFAULT_WARMUP
    k_grid: Tuple[int, ...] = DEFAULT_K_GRID
    select_k: Optional[int] = None
    seeds: Tuple[int, ...] = (0,)
    n_chains: int = 1
    deterministic_init: bool = False
    center_observable: bool = False
    sweep: Tuple[float, ...] = ()
    delta_s: float = 0.01
    fd_samples: int = 1_000_000
    fd_warmup: int = DEFAULT_WARMUP
    fd_chains: int = 1
    reference: Optional[float] = None
    fit_degree: Optional[int] = None
    scaling_axis: str = "n"
    scaling_n: Tuple[int, ...] = (10_000, 100_000, 1_000_000, 10_000_000)
    probe_steps: int = 400
    vary_frame: bool = False
    workers: Optional[int] = None
    output: str = ""
    format: str = "csv"
    timestamp: bool = True

    # ------------------------------------------------------------------
    # Resolution and validation
    # ------------------------------------------------------------------
    def resolved(self):
        """Copy with params, perturb_dir and observable filled in from the map defaults."""
        self._check_map_name()
        cls = get_map(self.map_name)
        return replace(
            self,
            map_name=self.map_name.strip().lower(),
            params=tuple(float(p) for p in (self.params if self.params is not None else cls.DEFAULT_PARAMS)),
            perturb_dir=tuple(
                float(p) for p in (self.perturb_dir if self.perturb_dir is not None else cls.DEFAULT_PERTURB_DIR)
            ),
            observable=self.observable or cls.DEFAULT_OBSERVABLE,
            k_grid=tuple(sorted(set(int(k) for k in self.k_grid))),
        )

    def _check_map_name(self):
        if self.map_name.strip().lower() not in available_maps():
            raise ConfigError(
                f"No map named '{self.map_name}'. Available: {available_maps()}", ("map_name",)
            )

    def validate(self):
        """
        Check every cross-field rule and return the resolved config.

        Raises:
            ConfigError: naming the offending fields.
        """
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode '{self.mode}'. Available: {list(MODES)}", ("mode",))
        if self.format not in FORMATS:
            raise ConfigError(f"Unknown format '{self.format}'. Available: {list(FORMATS)}", ("format",))
        cfg = self.resolved()
        try:
            map_system = cfg.build_map()
        except ValueError as exc:
            raise ConfigError(str(exc), ("params", "perturb_dir")) from exc
        try:
            get_observable(cfg.observable, map_system)
        except ValueError as exc:
            raise ConfigError(str(exc), ("observable",)) from exc

        if cfg.warmup < 1:
            raise ConfigError(f"warmup must be >= 1, got {cfg.warmup}", ("warmup",))
        if not cfg.k_grid or min(cfg.k_grid) < 0:
            raise ConfigError(f"k_grid must hold non-negative integers, got {list(cfg.k_grid)}", ("k_grid",))
        k_max = max(cfg.k_grid)
        if cfg.n_steps <= cfg.warmup + k_max:
            raise ConfigError(
                f"n_steps ({cfg.n_steps}) must exceed warmup ({cfg.warmup}) + max(k_grid) ({k_max})",
                ("n_steps", "warmup", "k_grid"),
            )
        if cfg.select_k is not None and cfg.select_k not in cfg.k_grid:
            raise ConfigError(f"select_k {cfg.select_k} is not in k_grid {list(cfg.k_grid)}", ("select_k", "k_grid"))
        if not cfg.seeds:
            raise ConfigError("seeds must not be empty", ("seeds",))
        if cfg.n_chains < 1 or cfg.fd_chains < 1:
            raise ConfigError("n_chains and fd_chains must be >= 1", ("n_chains", "fd_chains"))
        if any(b <= a for a, b in zip(cfg.sweep, cfg.sweep[1:])):
            raise ConfigError(f"sweep must be strictly increasing, got {list(cfg.sweep)}", ("sweep",))
        if not cfg.delta_s > 0:
            raise ConfigError(f"delta_s must be > 0, got {cfg.delta_s}", ("delta_s",))
        if cfg.fd_samples <= cfg.fd_warmup:
            raise ConfigError(
                f"fd_samples ({cfg.fd_samples}) must exceed fd_warmup ({cfg.fd_warmup})", ("fd_samples", "fd_warmup")
            )
        if cfg.reference is not None and not math.isfinite(cfg.reference):
            raise ConfigError(f"reference must be finite, got {cfg.reference}", ("reference",))
        if cfg.workers is not None and cfg.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {cfg.workers}", ("workers",))

        if cfg.mode == "sweep":
            if not cfg.sweep:
                raise ConfigError("sweep mode needs a non-empty sweep grid", ("sweep",))
            if cfg.fit_degree is not None and not 0 <= cfg.fit_degree < len(cfg.sweep):
                raise ConfigError(
                    f"fit_degree must be in [0, {len(cfg.sweep) - 1}], got {cfg.fit_degree}", ("fit_degree", "sweep")
                )
        if cfg.mode == "converge":
            if len(cfg.seeds) < 2:
                raise ConfigError("converge mode needs at least two seeds", ("seeds",))
            if cfg.probe_steps < 1:
                raise ConfigError(f"probe_steps must be >= 1, got {cfg.probe_steps}", ("probe_steps",))
        if cfg.mode == "scaling":
            if cfg.scaling_axis not in SCALING_AXES:
                raise ConfigError(
                    f"Unknown scaling_axis '{cfg.scaling_axis}'. Available: {list(SCALING_AXES)}", ("scaling_axis",)
                )
            if cfg.scaling_axis == "n":
                short = [n for n in cfg.scaling_n if n <= cfg.warmup + k_max]
                if not cfg.scaling_n or short:
                    raise ConfigError(
                        f"scaling_n values must exceed warmup + max(k_grid) ({cfg.warmup + k_max}), got {short or []}",
                        ("scaling_n",),
                    )
        return cfg

    # ------------------------------------------------------------------
    # Builders
    # ------------------------------------------------------------------
    def build_map(self, s=0.0):
        """The configured map, shifted by ``s`` along perturb_dir."""
        map_system = get_map(self.map_name, self.params, self.perturb_dir)
        return map_system.shifted(s) if s else map_system

    def build_observable(self, map_system=None):
        return get_observable(self.observable, map_system)

    def s3_config(self, seed, n_steps=None, n_chains=None):
        return S3Config(
            n_steps=self.n_steps if n_steps is None else n_steps,
            warmup=self.warmup,
            k_grid=self.k_grid,
            select_k=self.select_k,
            n_chains=self.n_chains if n_chains is None else n_chains,
            seed=seed,
            deterministic_init=self.deterministic_init,
            center_observable=self.center_observable,
        )

    def fd_config(self, seed):
        return FdConfig(
            delta_s=self.delta_s,
            n_samples=self.fd_samples,
            warmup=self.fd_warmup,
            seed=seed,
            n_chains=self.fd_chains,
        )

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------
    def to_dict(self):
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data):
        """Build from a mapping; text values are coerced, unknown keys rejected."""
        values = {}
        unknown = []
        for raw_key, raw_value in data.items():
            key = _canonical_key(raw_key)
            if key not in _KINDS:
                unknown.append(raw_key)
                continue
            values[key] = _coerce(key, raw_value)
        if unknown:
            raise ConfigError(
                f"Unknown config key(s) {unknown}. Available: {sorted(_KINDS)}", tuple(unknown)
            )
        return cls(**values)


def _canonical_key(key):
    key = str(key).strip()
    lowered = key.lower()
    return KEY_ALIASES.get(lowered, lowered)


def _split(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return list(value)
    text = str(value).strip().strip("[]()")
    return [item for item in (part.strip() for part in text.split(",")) if item]


def _to_int(key, value):
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {value!r}", (key,)) from None
    if not number.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {value!r}", (key,))
    return int(number)


def _to_float(key, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}", (key,)) from None


def _to_bool(key, value):
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigError(f"{key}: expected true/false, got {value!r}", (key,))


def _coerce(key, value):
    kind = _KINDS[key]
    if kind.endswith("?"):
        if value is None or str(value).strip().lower() in ("", "none", "null"):
            return None
        kind = kind[:-1]
    if kind == "str":
        return str(value).strip().lower() if key != "output" else str(value).strip()
    if kind == "int":
        return _to_int(key, value)
    if kind == "float":
        return _to_float(key, value)
    if kind == "bool":
        return _to_bool(key, value)
    if kind == "ints":
        return tuple(_to_int(key, item) for item in _split(value))
    return tuple(_to_float(key, item) for item in _split(value))


def _read_ini(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not re.search(r"^\s*\[", text, re.MULTILINE):
        text = "[experiment]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"Malformed config text: {exc}") from exc
    data = {}
    for section in parser.sections():
        data.update(parser.items(section))
    return data


def parse_config(path=None, text=None, overrides=None):
    """
    Read, merge and validate an experiment config.

    Args:
        path: INI-like or JSON file.
        text: config text (used when ``path`` is None).
        overrides (dict): values applied last, e.g. command-line flags.

    Returns:
        ExperimentConfig: validated, with map defaults resolved.

    Raises:
        ConfigError: on parse failures, unknown keys or invalid values.
    """
    is_json = False
    if path is not None:
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        is_json = path.suffix.lower() == ".json"
    text = text or ""
    is_json = is_json or text.lstrip().startswith("{")

    if is_json:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Malformed JSON config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("JSON config must be an object")
    else:
        data = _read_ini(text)

    merged = {_canonical_key(k): v for k, v in data.items()}
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[_canonical_key(key)] = value
    return ExperimentConfig.from_dict(merged).validate()
