"""Run configuration: YAML parsing, engineering units, strict schema.

Configs carry engineering units as string values ("L: 1 nH", "omega_A: 5
GHz", "T: 50 mK"); everything is converted to SI exactly once here.
Frequencies are ordinary frequencies in the file and angular internally.
Unknown keys anywhere are rejected.  The resolved (SI) form of a config is
embedded in every output file and re-parses to an equivalent RunConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .circuit import CircuitParams
from .constants import TWO_PI
from .errors import ConfigError, JJAQEDError

__all__ = ["RunConfig", "load_config", "parse_config_dict", "resolved_dict"]

TASKS = (
    "modes",
    "jja",
    "track",
    "couplings",
    "perturbation",
    "dynamics",
    "spectrum",
    "sweep-chi",
    "sweep-omega",
    "impedance",
    "nonlinear",
)

# unit -> (scale to SI, kind); frequencies handled separately
_UNIT_SCALES = {
    "h": 1.0, "mh": 1e-3, "uh": 1e-6, "nh": 1e-9, "ph": 1e-12,
    "f": 1.0, "mf": 1e-3, "uf": 1e-6, "nf": 1e-9, "pf": 1e-12, "ff": 1e-15,
    "ohm": 1.0, "kohm": 1e3,
    "k": 1.0, "mk": 1e-3, "uk": 1e-6,
    "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12,
    "s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9,
}
_FREQ_UNITS = {"hz", "khz", "mhz", "ghz", "thz"}


def parse_quantity(value, where: str, *, angular_from_freq: bool = False) -> float:
    """Number (already SI) or '<number> <unit>' string -> SI float.

    With ``angular_from_freq`` a frequency-unit value is multiplied by 2 pi
    (the config writes ordinary frequencies; the core uses angular ones).
    """
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a quantity, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number or '<value> <unit>' string")
    parts = value.split()
    try:
        if len(parts) == 1:
            return float(parts[0])
        if len(parts) == 2:
            num = float(parts[0])
            unit = parts[1].lower()
            if unit not in _UNIT_SCALES:
                raise ConfigError(f"{where}: unknown unit {parts[1]!r}")
            si = num * _UNIT_SCALES[unit]
            if angular_from_freq and unit in _FREQ_UNITS:
                si *= TWO_PI
            return si
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {value!r}") from exc
    raise ConfigError(f"{where}: cannot parse {value!r}")


def _require_mapping(obj, where: str) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a mapping")
    return obj


def _check_keys(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _parse_grid(spec, where: str, *, angular: bool = False) -> np.ndarray:
    """Grid spec: {values: [...]} or {start, stop, points, spacing}."""
    spec = _require_mapping(spec, where)
    _check_keys(spec, {"values", "start", "stop", "points", "spacing"}, where)
    if "values" in spec:
        vals = [parse_quantity(v, where, angular_from_freq=angular) for v in spec["values"]]
        return np.array(vals, dtype=float)
    for key in ("start", "stop", "points"):
        if key not in spec:
            raise ConfigError(f"{where}: grid needs 'values' or start/stop/points")
    start = parse_quantity(spec["start"], where, angular_from_freq=angular)
    stop = parse_quantity(spec["stop"], where, angular_from_freq=angular)
    points = int(spec["points"])
    if points < 1:
        raise ConfigError(f"{where}: points must be >= 1")
    spacing = spec.get("spacing", "linear")
    if spacing == "linear":
        return np.linspace(start, stop, points)
    if spacing == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(f"{where}: log spacing needs positive endpoints")
        return np.geomspace(start, stop, points)
    raise ConfigError(f"{where}: spacing must be 'linear' or 'log'")


@dataclass
class RunConfig:
    """Validated, SI-normalized run description."""

    circuit: CircuitParams
    task: str
    output: Path
    parallelism: int = 1
    grids: dict = field(default_factory=dict)
    track: dict = field(default_factory=dict)
    dynamics: dict = field(default_factory=dict)
    nonlinear: dict = field(default_factory=dict)

    def __eq__(self, other):
        # output directory and worker count are execution details, not part
        # of the experiment definition
        if not isinstance(other, RunConfig):
            return NotImplemented
        same_grids = set(self.grids) == set(other.grids) and all(
            np.array_equal(self.grids[k], other.grids[k]) for k in self.grids
        )
        return (
            self.circuit == other.circuit
            and self.task == other.task
            and same_grids
            and self.track == other.track
            and self.dynamics == other.dynamics
            and self.nonlinear == other.nonlinear
        )


_CIRCUIT_KEYS = ("N", "L", "C", "C_g", "C_c", "chi", "E_C_A", "omega_A", "Z_W", "T")
_GRID_KEYS = {"chi": False, "omega_A": True, "omega": True, "time": False}


def parse_config_dict(raw: dict, base_dir: Path | None = None) -> RunConfig:
    raw = _require_mapping(raw, "config")
    _check_keys(
        raw,
        {"circuit", "task", "output", "parallelism", "grids", "track", "dynamics",
         "nonlinear"},
        "config",
    )
    if "circuit" not in raw:
        raise ConfigError("config: missing 'circuit' section")
    if "task" not in raw:
        raise ConfigError("config: missing 'task'")

    c = _require_mapping(raw["circuit"], "circuit")
    _check_keys(c, _CIRCUIT_KEYS, "circuit")
    missing = [k for k in _CIRCUIT_KEYS if k != "T" and k not in c]
    if missing:
        raise ConfigError(f"circuit: missing key(s) {missing}")
    try:
        n_val = c["N"]
        if not isinstance(n_val, int) or isinstance(n_val, bool):
            raise ConfigError(f"circuit.N: expected an integer, got {n_val!r}")
        # E_C_A may be given as a frequency (E/h); convert to joule
        e_c = parse_quantity(c["E_C_A"], "circuit.E_C_A", angular_from_freq=True)
        if isinstance(c["E_C_A"], str) and c["E_C_A"].split()[-1].lower() in _FREQ_UNITS:
            from .constants import HBAR

            e_c = HBAR * e_c  # hbar * (2 pi f)
        params = CircuitParams(
            N=n_val,
            L=parse_quantity(c["L"], "circuit.L"),
            C=parse_quantity(c["C"], "circuit.C"),
            C_g=parse_quantity(c["C_g"], "circuit.C_g"),
            C_c=parse_quantity(c["C_c"], "circuit.C_c"),
            chi=parse_quantity(c["chi"], "circuit.chi"),
            E_C_A=e_c,
            omega_A=parse_quantity(c["omega_A"], "circuit.omega_A", angular_from_freq=True),
            Z_W=parse_quantity(c["Z_W"], "circuit.Z_W"),
            T=parse_quantity(c.get("T", 0.0), "circuit.T"),
        )
    except ConfigError:
        raise
    except JJAQEDError as exc:
        # invalid element values are a schema problem at parse time
        raise ConfigError(f"circuit: {exc}") from exc
    except Exception as exc:
        raise ConfigError(f"circuit: {exc}") from exc

    task = raw["task"]
    if task not in TASKS:
        raise ConfigError(f"task: {task!r} not one of {TASKS}")

    grids = {}
    for name, spec in _require_mapping(raw.get("grids"), "grids").items():
        if name not in _GRID_KEYS:
            raise ConfigError(f"grids: unknown grid {name!r}")
        grids[name] = _parse_grid(spec, f"grids.{name}", angular=_GRID_KEYS[name])

    track = _require_mapping(raw.get("track"), "track")
    _check_keys(track, {"chi_target", "initial_steps", "overlap_threshold"}, "track")
    track = {
        "chi_target": parse_quantity(track.get("chi_target", params.chi), "track.chi_target"),
        "initial_steps": int(track.get("initial_steps", 8)),
        "overlap_threshold": parse_quantity(
            track.get("overlap_threshold", 0.5), "track.overlap_threshold"
        ),
    }

    dyn = _require_mapping(raw.get("dynamics"), "dynamics")
    _check_keys(dyn, {"temperature", "method"}, "dynamics")
    method = dyn.get("method", "modal")
    if method not in ("modal", "ode-oracle"):
        raise ConfigError(f"dynamics.method: {method!r} not 'modal' or 'ode-oracle'")
    dyn = {
        "temperature": parse_quantity(dyn.get("temperature", params.T), "dynamics.temperature"),
        "method": method,
    }

    nl = _require_mapping(raw.get("nonlinear"), "nonlinear")
    _check_keys(nl, {"Lambda", "strength", "nodes"}, "nonlinear")
    if "Lambda" in nl and "strength" in nl:
        raise ConfigError("nonlinear: give either Lambda [J/Wb^3] or strength, not both")
    nl_out = {}
    if "Lambda" in nl:
        nl_out["Lambda"] = parse_quantity(nl["Lambda"], "nonlinear.Lambda")
    elif "strength" in nl:
        nl_out["strength"] = parse_quantity(nl["strength"], "nonlinear.strength")
    if "nodes" in nl:
        nodes = nl["nodes"]
        if not isinstance(nodes, list) or not all(isinstance(i, int) for i in nodes):
            raise ConfigError("nonlinear.nodes: expected a list of node indices")
        nl_out["nodes"] = list(nodes)

    parallelism = raw.get("parallelism", 1)
    if not isinstance(parallelism, int) or isinstance(parallelism, bool) or parallelism < 1:
        raise ConfigError(f"parallelism: expected an integer >= 1, got {parallelism!r}")

    output = Path(raw.get("output", "."))
    if base_dir is not None and not output.is_absolute():
        output = base_dir / output

    return RunConfig(
        circuit=params,
        task=task,
        output=output,
        parallelism=parallelism,
        grids=grids,
        track=track,
        dynamics=dyn,
        nonlinear=nl_out,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config_dict(raw, base_dir=path.parent)


def resolved_dict(cfg: RunConfig) -> dict:
    """SI-normalized plain-dict form of a RunConfig (re-parseable).

    Execution details (output directory, worker count) are omitted so the
    embedded form is identical for identical experiments.
    """
    p = cfg.circuit
    return {
        "circuit": {
            "N": p.N,
            "L": p.L,
            "C": p.C,
            "C_g": p.C_g,
            "C_c": p.C_c,
            "chi": p.chi,
            "E_C_A": p.E_C_A,
            "omega_A": p.omega_A,
            "Z_W": p.Z_W,
            "T": p.T,
        },
        "task": cfg.task,
        "grids": {k: {"values": [float(v) for v in vals]} for k, vals in cfg.grids.items()},
        "track": dict(cfg.track),
        "dynamics": dict(cfg.dynamics),
        "nonlinear": dict(cfg.nonlinear),
    }


def dump_resolved(cfg: RunConfig) -> str:
    return yaml.safe_dump(resolved_dict(cfg), sort_keys=True)
