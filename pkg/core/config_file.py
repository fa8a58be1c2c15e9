"""JSON simulation config: schema, defaults, validation and content hash.

A config document looks like

    {
      "schema": "kanesim.config.v1",
      "device": {"profile": "sech", "b_ac": 0.00073},
      "dephasing": {"tau_e_us": 500, "tau_n_us": 50000},
      "grid": {"tau_e_s": {"start": 1e-6, "stop": 1e-2, "num": 6}, "tau_n_s": [1e-4, 1e-2]}
    }

Every omitted key takes its default; unknown keys are rejected.
"""
import copy
import hashlib
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from core import config as settings
from core.dynamics import DephasingParams, Frame, IntegratorConfig, Method
from core.errors import ConfigError
from core.gate import CnotConfig, ErrorMetric
from core.hamiltonian import PhysicalConstants
from core.pulses import ProfileKind, ReverseOrder, StageDurations, check_j_max
from core.result_store import load_json

SCHEMA = "kanesim.config.v1"

DEFAULTS = {
    "schema": SCHEMA,
    "constants": PhysicalConstants().as_dict(),
    "device": {
        "b_z": 2.0,
        "a2": 1.706,
        "delta_a1": 0.02,
        "j_max": 810.0,
        "profile": ProfileKind.LINSIN.value,
        "b_ac": None,
        "reverse_order": ReverseOrder.MIRRORED.value,
        "error_metric": ErrorMetric.NUCLEAR.value,
    },
    "durations": StageDurations().as_dict(),
    "dephasing": {"tau_e_us": None, "tau_n_us": None},
    "integrator": IntegratorConfig().as_dict(),
    "grid": {
        "tau_e_s": {"start": 1e-6, "stop": 1e-2, "num": 12},
        "tau_n_s": {"start": 1e-4, "stop": 1e2, "num": 12},
    },
}

_NULLABLE = {"device.b_ac", "dephasing.tau_e_us", "dephasing.tau_n_us"}
_STRINGS = {
    "device.profile": [k.value for k in ProfileKind if k is not ProfileKind.HOLD],
    "device.reverse_order": [k.value for k in ReverseOrder],
    "device.error_metric": [k.value for k in ErrorMetric],
    "integrator.frame": [k.value for k in Frame],
    "integrator.method": [k.value for k in Method],
}


@dataclass(frozen=True)
class SweepGrid:
    """Dephasing times in seconds, each axis positive and strictly increasing."""

    tau_e_s: tuple
    tau_n_s: tuple

    def __post_init__(self):
        for key, values in (("grid.tau_e_s", self.tau_e_s), ("grid.tau_n_s", self.tau_n_s)):
            if not values:
                raise ConfigError("grid axis is empty", key=key)
            if len(values) > settings.KANESIM_MAX_GRID:
                raise ConfigError(f"{len(values)} points exceed the cap of {settings.KANESIM_MAX_GRID}", key=key)
            if any(not (v > 0 and math.isfinite(v)) for v in values):
                raise ConfigError("dephasing times must be positive and finite", key=key)
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError("values must be strictly increasing", key=key)

    @property
    def points(self):
        return [(tau_e, tau_n) for tau_e in self.tau_e_s for tau_n in self.tau_n_s]

    @property
    def size(self):
        return len(self.tau_e_s) * len(self.tau_n_s)


def _axis(entry, key):
    if isinstance(entry, list):
        if any(not _is_number(v) for v in entry):
            raise ConfigError("grid values must be numbers", key=key)
        return tuple(float(v) for v in entry)
    if isinstance(entry, dict):
        unknown = set(entry) - {"start", "stop", "num"}
        if unknown:
            raise ConfigError("unknown key", key=f"{key}.{sorted(unknown)[0]}")
        try:
            start, stop, num = entry["start"], entry["stop"], entry["num"]
        except KeyError as e:
            raise ConfigError("missing key", key=f"{key}.{e.args[0]}") from None
        if not (_is_number(start) and _is_number(stop) and start > 0 and stop > 0):
            raise ConfigError("start and stop must be positive numbers", key=key)
        if not isinstance(num, int) or isinstance(num, bool) or num < 1:
            raise ConfigError("num must be a positive integer", key=f"{key}.num")
        if num == 1:
            return (float(start),)
        return tuple(float(v) for v in np.logspace(math.log10(start), math.log10(stop), num))
    raise ConfigError("expected a list or a {start, stop, num} object", key=key)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _merge(defaults, given, path):
    if not isinstance(given, dict):
        raise ConfigError("expected an object", key=path or "<root>")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        dotted = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError("unknown key", key=dotted)
        if path == "" and key == "grid":
            out[key] = _merge_grid(defaults[key], value)
        elif isinstance(defaults[key], dict):
            out[key] = _merge(defaults[key], value, dotted)
        else:
            out[key] = _check_scalar(dotted, value)
    return out


def _merge_grid(defaults, given):
    if not isinstance(given, dict):
        raise ConfigError("expected an object", key="grid")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise ConfigError("unknown key", key=f"grid.{key}")
        _axis(value, f"grid.{key}")
        out[key] = value
    return out


def _check_scalar(dotted, value):
    if value is None:
        if dotted in _NULLABLE:
            return None
        raise ConfigError("may not be null", key=dotted)
    if dotted == "schema":
        if value != SCHEMA:
            raise ConfigError(f"unsupported schema {value!r}; expected {SCHEMA!r}", key=dotted)
        return value
    if dotted in _STRINGS:
        if value not in _STRINGS[dotted]:
            raise ConfigError(f"must be one of {', '.join(_STRINGS[dotted])}", key=dotted)
        return value
    if not _is_number(value):
        raise ConfigError(f"expected a number, got {value!r}", key=dotted)
    if not math.isfinite(value):
        raise ConfigError("must be finite", key=dotted)
    return float(value)


def resolve_document(document):
    """Fully-defaulted copy of `document`, validated against the schema."""
    return _merge(DEFAULTS, document or {}, "")


def canonical_json(document):
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


def config_hash(document):
    """SHA-256 of the resolved document's canonical JSON."""
    return hashlib.sha256(canonical_json(resolve_document(document)).encode("utf-8")).hexdigest()


def verify_hash(document, expected):
    return config_hash(document) == expected


def build_config(resolved):
    """CnotConfig from a resolved document."""
    device = resolved["device"]
    dephasing = resolved["dephasing"]
    config = CnotConfig(
        consts=PhysicalConstants(**resolved["constants"]),
        b_z=device["b_z"],
        a2=device["a2"],
        delta_a1=device["delta_a1"],
        j_max=device["j_max"],
        profile=device["profile"],
        durations=StageDurations(**resolved["durations"]),
        b_ac=device["b_ac"],
        reverse_order=device["reverse_order"],
        error_metric=device["error_metric"],
        dephasing=DephasingParams.from_times(dephasing["tau_e_us"], dephasing["tau_n_us"]),
        integrator=IntegratorConfig(**resolved["integrator"]),
    )
    check_j_max(config)
    return config


def build_grid(resolved):
    grid = resolved["grid"]
    return SweepGrid(_axis(grid["tau_e_s"], "grid.tau_e_s"), _axis(grid["tau_n_s"], "grid.tau_n_s"))


@dataclass(frozen=True)
class LoadedConfig:
    config: CnotConfig
    grid: SweepGrid
    document: dict
    digest: str


def load_document(document):
    resolved = resolve_document(document)
    return LoadedConfig(build_config(resolved), build_grid(resolved), resolved, config_hash(resolved))


def parse_config(path=None):
    """Load, validate and default a config file; no path means all defaults."""
    if not path:
        return load_document({})
    try:
        document = load_json(path)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON ({e.msg} at line {e.lineno})", key=str(path)) from None
    loaded = load_document(document)
    logging.info("Loaded config %s (hash %s)", path, loaded.digest[:12])
    return loaded
