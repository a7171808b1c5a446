"""Run configuration: YAML text with a versioned schema id and fixed sections.

Every key must appear in :data:`DEFAULTS`; unknown keys are rejected with
their line number.  ``scheme.dt`` is required and may be ``auto``, which
means ``dt_fraction`` times the stability bound of the grid.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .errors import ConfigurationError
from .evolution import FORMULATIONS, SchemeConfig, stable_dt
from .grid import RadialGrid, grid_from_spec
from .initial_data import FAMILIES, BumpFamily, InitialDataSpec
from .modulation import SOURCES

SCHEMA_ID = "nematic-blowup/run/1"
REQUIRED = object()
INITIAL_KINDS = ("focusing", "profile")
SWEEP_AXES = ("epsilon", "k", "u0_amplitude", "g0_amplitude")

DEFAULTS = {
    "schema": SCHEMA_ID,
    "grid": {"r_max": 50.0, "n": 4096, "grading": "geometric", "ratio": 1.002},
    "scheme": {"dt": REQUIRED, "dt_fraction": 0.8, "theta": 0.5, "damping_treatment": "implicit",
               "r_min_guard": 1e-3, "cfl_safety": 0.9, "formulation": "primal"},
    "initial": {"kind": "focusing", "epsilon": 0.5, "c_small": None, "k": 4, "seed": 0, "mu": 1.0,
                "u0": {"shape": "rational", "amplitude": 1e-3},
                "g0": {"shape": "rational", "amplitude": 1e-3}},
    "output": {"cadence": 10, "snapshot_every": 0, "checkpoint_every": 0},
    "diagnostics": {"delta": 0.5, "cone_slope": 2.0, "c0_param": float(np.sqrt(1.5))},
    "tracking": {"mode": "orthogonality_rootfind"},
    "stop": {"t_end": 1.0, "lambda_stop_factor": 1000.0, "resolution_factor": 4.0, "max_steps": None},
    "sweep": {axis: [] for axis in SWEEP_AXES},
}


# --- structural validation on the YAML node tree --------------------------------

def _walk(node, schema, path):
    if not isinstance(node, yaml.MappingNode):
        where = f"section '{path}'" if path else "top level"
        raise ConfigurationError(f"line {node.start_mark.line + 1}: {where} must be a mapping")
    seen = set()
    for key_node, value_node in node.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        dotted = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigurationError(f"line {line}: unknown key '{dotted}'")
        if key in seen:
            raise ConfigurationError(f"line {line}: duplicate key '{dotted}'")
        seen.add(key)
        if isinstance(schema[key], dict):
            _walk(value_node, schema[key], dotted)


def _merge(defaults, given):
    out = {}
    for key, dv in defaults.items():
        if isinstance(dv, dict):
            out[key] = _merge(dv, given.get(key) or {})
        else:
            out[key] = given.get(key, dv)
    return out


def _missing(tree, path=""):
    for key, v in tree.items():
        dotted = f"{path}.{key}" if path else key
        if isinstance(v, dict):
            yield from _missing(v, dotted)
        elif v is REQUIRED:
            yield dotted


def _number(section, key, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"'{section}.{key}' must be a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigurationError(f"'{section}.{key}' must be an integer, got {value!r}")
        return int(value)
    return float(value)


@dataclass(frozen=True)
class RunConfig:
    data: dict

    # --- section access
    def __getitem__(self, section):
        return self.data[section]

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)

    # --- module objects
    def build_grid(self) -> RadialGrid:
        return grid_from_spec(self.data["grid"])

    def initial_spec(self) -> InitialDataSpec:
        ini = self.data["initial"]
        return InitialDataSpec(epsilon=ini["epsilon"], c_small=ini["c_small"], k=ini["k"],
                               u0_family=BumpFamily(**ini["u0"]), g0_family=BumpFamily(**ini["g0"]),
                               seed=ini["seed"])

    def resolve_dt(self, grid: RadialGrid) -> float:
        sch = self.data["scheme"]
        if sch["dt"] != "auto":
            return float(sch["dt"])
        k = self.data["initial"]["k"]
        return min(sch["dt_fraction"] * stable_dt(grid, k), 0.999 * sch["cfl_safety"] * grid.min_spacing)

    def scheme_config(self, grid: RadialGrid) -> SchemeConfig:
        sch = self.data["scheme"]
        return SchemeConfig(dt=self.resolve_dt(grid), theta=sch["theta"],
                            damping_treatment=sch["damping_treatment"],
                            r_min_guard=sch["r_min_guard"], cfl_safety=sch["cfl_safety"])

    def with_overrides(self, **overrides) -> "RunConfig":
        """Copy with sweep-axis values substituted and the sweep section cleared."""
        d = copy.deepcopy(self.data)
        for axis, value in overrides.items():
            if axis in ("epsilon", "k"):
                d["initial"][axis] = value
            elif axis == "u0_amplitude":
                d["initial"]["u0"]["amplitude"] = value
            elif axis == "g0_amplitude":
                d["initial"]["g0"]["amplitude"] = value
            else:
                raise ConfigurationError(f"unknown sweep axis {axis!r}")
        d["sweep"] = {axis: [] for axis in SWEEP_AXES}
        return validate(d)

    def sweep_points(self) -> list[dict]:
        axes = {a: v for a, v in self.data["sweep"].items() if v}
        if not axes:
            return [{}]
        names = list(axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(axes[n] for n in names))]


def validate(data: dict) -> RunConfig:
    """Type-check and re-validate every section through the module constructors."""
    if data.get("schema") != SCHEMA_ID:
        raise ConfigurationError(f"schema must be '{SCHEMA_ID}', got {data.get('schema')!r}")
    d = copy.deepcopy(data)

    g = d["grid"]
    g["r_max"] = _number("grid", "r_max", g["r_max"])
    g["n"] = _number("grid", "n", g["n"], int)
    if g["ratio"] is not None:
        g["ratio"] = _number("grid", "ratio", g["ratio"])

    s = d["scheme"]
    if s["dt"] != "auto":
        s["dt"] = _number("scheme", "dt", s["dt"])
    for key in ("dt_fraction", "theta", "r_min_guard", "cfl_safety"):
        s[key] = _number("scheme", key, s[key])
    if s["formulation"] not in FORMULATIONS:
        raise ConfigurationError(f"'scheme.formulation' must be one of {FORMULATIONS}")
    if not 0 < s["dt_fraction"] <= 1:
        raise ConfigurationError("'scheme.dt_fraction' must lie in (0, 1]")

    ini = d["initial"]
    if ini["kind"] not in INITIAL_KINDS:
        raise ConfigurationError(f"'initial.kind' must be one of {INITIAL_KINDS}")
    ini["epsilon"] = _number("initial", "epsilon", ini["epsilon"])
    if ini["c_small"] is not None:
        ini["c_small"] = _number("initial", "c_small", ini["c_small"])
    ini["k"] = _number("initial", "k", ini["k"], int)
    ini["seed"] = _number("initial", "seed", ini["seed"], int)
    ini["mu"] = _number("initial", "mu", ini["mu"])
    for fam in ("u0", "g0"):
        if ini[fam]["shape"] not in FAMILIES:
            raise ConfigurationError(f"'initial.{fam}.shape' must be one of {FAMILIES}")
        ini[fam]["amplitude"] = _number(f"initial.{fam}", "amplitude", ini[fam]["amplitude"])

    o = d["output"]
    for key in ("cadence", "snapshot_every", "checkpoint_every"):
        o[key] = _number("output", key, o[key], int)
        if o[key] < 0:
            raise ConfigurationError(f"'output.{key}' must be non-negative")
    if o["cadence"] < 1:
        raise ConfigurationError("'output.cadence' must be at least 1")

    di = d["diagnostics"]
    for key in ("delta", "cone_slope", "c0_param"):
        di[key] = _number("diagnostics", key, di[key])
    if not 0 < di["delta"] < 1:
        raise ConfigurationError("'diagnostics.delta' must lie in (0, 1)")
    if not 1 < di["c0_param"] ** 2 < 2:
        raise ConfigurationError("'diagnostics.c0_param' squared must lie in (1, 2)")

    if d["tracking"]["mode"] not in SOURCES:
        raise ConfigurationError(f"'tracking.mode' must be one of {SOURCES}")

    st = d["stop"]
    for key in ("t_end", "lambda_stop_factor", "resolution_factor"):
        st[key] = _number("stop", key, st[key])
        if st[key] <= 0:
            raise ConfigurationError(f"'stop.{key}' must be positive")
    if st["max_steps"] is not None:
        st["max_steps"] = _number("stop", "max_steps", st["max_steps"], int)

    for axis in SWEEP_AXES:
        vals = d["sweep"][axis]
        if not isinstance(vals, list):
            raise ConfigurationError(f"'sweep.{axis}' must be a list")
        kind = int if axis == "k" else float
        d["sweep"][axis] = [_number("sweep", axis, v, kind) for v in vals]

    cfg = RunConfig(d)
    # re-run the invariants of the referenced modules
    grid = cfg.build_grid()
    if ini["kind"] == "focusing":
        cfg.initial_spec()
    elif ini["k"] < 3:
        raise ConfigurationError("profile runs need k >= 3 for the modulation constants")
    cfg.scheme_config(grid)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse YAML text into a validated :class:`RunConfig`."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed YAML: {exc}") from exc
    if root is None:
        raise ConfigurationError("empty configuration")
    _walk(root, DEFAULTS, "")
    merged = _merge(DEFAULTS, yaml.safe_load(text))
    missing = list(_missing(merged))
    if missing:
        raise ConfigurationError(f"missing required key '{missing[0]}'")
    return validate(merged)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def default_config(**sections) -> RunConfig:
    """Defaults with dt = auto, optionally updated section by section."""
    d = copy.deepcopy(DEFAULTS)
    d["scheme"]["dt"] = "auto"
    for name, values in sections.items():
        if name not in d or not isinstance(d[name], dict):
            raise ConfigurationError(f"unknown section {name!r}")
        for key, v in values.items():
            if key not in d[name]:
                raise ConfigurationError(f"unknown key '{name}.{key}'")
            if isinstance(d[name][key], dict):
                d[name][key].update(v)
            else:
                d[name][key] = v
    return validate(d)
