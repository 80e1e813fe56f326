"""Run configuration: flat ``key = value`` files layered over built-in defaults.

Resolution order, lowest to highest priority: built-in defaults, config file,
``BCSIM_<key>`` environment variables, command-line flags.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelParams

NORMALIZATIONS = ("global-max", "per-spectrum", "none")
ENV_PREFIX = "BCSIM_"

_MODEL_KEYS = ("g_X", "g_B", "kappa", "chi", "delta", "delta_c", "gamma", "pump", "gamma_phase")
_FLOAT_KEYS = _MODEL_KEYS + (
    "fwhm", "detuning_start", "detuning_stop", "detuning_step",
    "freq_start", "freq_stop", "freq_step", "fit_window_start", "fit_window_stop", "omega_ref_eV",
)
_INT_KEYS = ("absolute_axis", "workers")
_INT_LIST_KEYS = ("n_max",)
_STR_KEYS = ("normalize", "out")
VALID_KEYS = _FLOAT_KEYS + _INT_KEYS + _INT_LIST_KEYS + _STR_KEYS

DEFAULTS: dict[str, object] = {
    **{k: getattr(ModelParams(), k) for k in _MODEL_KEYS},
    "n_max": (2,),
    "fwhm": 23.0,
    "normalize": "global-max",
    "detuning_start": -500.0, "detuning_stop": 250.0, "detuning_step": 5.0,
    "freq_start": -600.0, "freq_stop": 300.0, "freq_step": 1.0,
    "fit_window_start": -300.0, "fit_window_stop": -100.0,
    "omega_ref_eV": 1.32166,
    "absolute_axis": 0,
    "workers": 1,
    "out": "out",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Inclusive uniform grid ``start, start + step, ..., stop`` in ueV."""
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError(f"grid step must be > 0, got {self.step}")
        if not self.start < self.stop:
            raise ConfigError(f"grid start must be < stop, got {self.start}:{self.stop}")
        n = (self.stop - self.start) / self.step
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"grid {self}: (stop - start) is not a multiple of step")

    @property
    def size(self) -> int:
        return int(round((self.stop - self.start) / self.step)) + 1

    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.size)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be start:stop:step, got {text!r}")
        try:
            vals = [float(s) for s in parts]
        except ValueError:
            raise ConfigError(f"grid must be numeric start:stop:step, got {text!r}") from None
        return cls(*vals)


@dataclass(frozen=True)
class RunSpec:
    template: ModelParams
    detuning: GridSpec
    freq: GridSpec
    n_max: tuple[int, ...]
    fwhm: float
    normalize: str
    out: str
    fit_window: tuple[float, float]
    omega_ref_eV: float
    absolute_axis: bool
    workers: int

    def to_keys(self) -> dict[str, object]:
        d = {k: getattr(self.template, k) for k in _MODEL_KEYS}
        d.update(n_max=self.n_max, fwhm=self.fwhm, normalize=self.normalize,
                 detuning_start=self.detuning.start, detuning_stop=self.detuning.stop,
                 detuning_step=self.detuning.step, freq_start=self.freq.start,
                 freq_stop=self.freq.stop, freq_step=self.freq.step,
                 fit_window_start=self.fit_window[0], fit_window_stop=self.fit_window[1],
                 omega_ref_eV=self.omega_ref_eV, absolute_axis=int(self.absolute_axis),
                 workers=self.workers, out=self.out)
        return d

    def dumps(self) -> str:
        """Config text that parses back to this exact RunSpec."""
        lines = ["# resolved run configuration"]
        for k, v in self.to_keys().items():
            lines.append(f"{k} = {format_value(v)}")
        return "\n".join(lines) + "\n"


def format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def convert_value(key: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _INT_LIST_KEYS:
            vals = tuple(int(s) for s in raw.split(","))
            if not vals:
                raise ValueError
            return vals
    except ValueError:
        raise ConfigError(f"{where}: value for {key!r} is not numeric: {raw!r}") from None
    return raw


def check_key(key: str, where: str):
    if key not in VALID_KEYS:
        raise ConfigError(f"{where}: unknown key {key!r}; valid keys: {', '.join(VALID_KEYS)}")


def read_config_file(path) -> dict[str, object]:
    """Parse one config file into typed key/value pairs (no defaults applied)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        where = f"{path}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        check_key(key, where)
        out[key] = convert_value(key, raw, where)
    return out


def env_overrides(environ=None) -> dict[str, object]:
    """``BCSIM_<key>`` variables; the key part may be given as written or upper-cased."""
    environ = os.environ if environ is None else environ
    upper = {k.upper(): k for k in VALID_KEYS}
    out = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        tail = name[len(ENV_PREFIX):]
        key = tail if tail in VALID_KEYS else upper.get(tail, tail)
        check_key(key, f"environment variable {name}")
        out[key] = convert_value(key, raw, f"environment variable {name}")
    return out


def build_runspec(values: dict[str, object]) -> RunSpec:
    v = {**DEFAULTS, **values}
    if v["normalize"] not in NORMALIZATIONS:
        raise ConfigError(f"normalize must be one of {NORMALIZATIONS}, got {v['normalize']!r}")
    if any(n < 1 for n in v["n_max"]):
        raise ConfigError(f"n_max values must be >= 1, got {v['n_max']}")
    if v["fwhm"] < 0:
        raise ConfigError(f"fwhm must be >= 0, got {v['fwhm']}")
    if v["workers"] < 1:
        raise ConfigError(f"workers must be >= 1, got {v['workers']}")
    if v["absolute_axis"] not in (0, 1):
        raise ConfigError(f"absolute_axis must be 0 or 1, got {v['absolute_axis']}")
    if not v["fit_window_start"] < v["fit_window_stop"]:
        raise ConfigError("fit_window_start must be < fit_window_stop")
    try:
        template = ModelParams(**{k: float(v[k]) for k in _MODEL_KEYS}, n_max=int(v["n_max"][0]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunSpec(
        template=template,
        detuning=GridSpec(v["detuning_start"], v["detuning_stop"], v["detuning_step"]),
        freq=GridSpec(v["freq_start"], v["freq_stop"], v["freq_step"]),
        n_max=tuple(int(n) for n in v["n_max"]),
        fwhm=float(v["fwhm"]),
        normalize=str(v["normalize"]),
        out=str(v["out"]),
        fit_window=(float(v["fit_window_start"]), float(v["fit_window_stop"])),
        omega_ref_eV=float(v["omega_ref_eV"]),
        absolute_axis=bool(v["absolute_axis"]),
        workers=int(v["workers"]),
    )


def parse_config(path=None, flags: dict | None = None, environ=None) -> RunSpec:
    """Resolve a RunSpec from defaults, an optional file, the environment and flags.

    ``flags`` holds already-typed overrides keyed like the config file.
    Pass ``environ={}`` to ignore the process environment.
    """
    values: dict[str, object] = {}
    if path is not None:
        values.update(read_config_file(path))
    values.update(env_overrides(environ))
    for key, val in (flags or {}).items():
        check_key(key, "command line")
        values[key] = val
    return build_runspec(values)


def replace_spec(spec: RunSpec, **changes) -> RunSpec:
    return dataclasses.replace(spec, **changes)
