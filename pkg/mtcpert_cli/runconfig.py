import copy
import csv
import hashlib
import json
import os
import re

import numpy as np
import yaml
from jsonschema import Draft202012Validator

from core.configuration.configuration import get_app_version
from core.exceptions import ConfigError
from core.serialisers.serializer import Serializer
from mtcpert.modules.bath.models import ExponentialHighT, QuadratureConfig
from mtcpert.modules.bath.services import finite_bath
from mtcpert.modules.experiments.services import default_scaling_bath, default_scaling_system
from mtcpert.modules.generators.models import OdeConfig
from mtcpert.modules.mtc_oracle.models import MTCQuery
from mtcpert.modules.opalg.models import DensityMatrix
from mtcpert.modules.opalg.services import PAULI_X, PAULI_Y, PAULI_Z, spectral_decompose
from mtcpert.modules.perturb.models import SystemSpec

PRESETS = {
    "identity": np.eye(2, dtype=complex),
    "pauli_x": PAULI_X,
    "pauli_y": PAULI_Y,
    "pauli_z": PAULI_Z,
    "zero": np.zeros((2, 2), dtype=complex),
    "sigma_plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "sigma_minus": np.array([[0, 0], [1, 0]], dtype=complex),
}

_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NON_NEGATIVE = {"type": "number", "minimum": 0}
_ENTRY = {
    "oneOf": [
        _NUMBER,
        {
            "type": "object",
            "properties": {"re": _NUMBER, "im": _NUMBER},
            "additionalProperties": False,
        },
    ]
}
_MATRIX = {
    "oneOf": [
        {"enum": sorted(PRESETS)},
        {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _ENTRY}},
    ]
}
_GRID = {
    "oneOf": [
        {"type": "array", "minItems": 1, "items": _NUMBER},
        {
            "type": "object",
            "properties": {"start": _NUMBER, "stop": _NUMBER, "num": {"type": "integer", "minimum": 1}},
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    ]
}


def _section(properties, required=()):
    return {"type": "object", "properties": properties, "required": list(required), "additionalProperties": False}


SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": _section(
            {
                "kind": {"enum": ["exponential", "finite", "scaling"]},
                "tau": _POSITIVE,
                "beta": _NON_NEGATIVE,
                "lam": _NON_NEGATIVE,
                "H_e": _MATRIX,
                "V_e": {"type": "array", "minItems": 1, "items": _MATRIX},
                "seed": {"type": "integer"},
            },
            required=["kind"],
        ),
        "system": _section(
            {
                "Hs": _MATRIX,
                "couplings": {"type": "array", "minItems": 1, "items": _MATRIX},
                "rho0": _MATRIX,
            }
        ),
        "query": _section(
            {
                "times": {"type": "array", "minItems": 1, "items": _NON_NEGATIVE},
                "observables": {"type": "array", "minItems": 1, "items": _MATRIX},
                "branches": {"type": "array", "items": {"enum": ["+", "-"]}},
                "order": {"enum": [0, 1]},
                "propagator": {"enum": ["davies", "redfield", "born"]},
                "limits": {"enum": ["infinite", "interval"]},
            }
        ),
        "numerics": _section(
            {
                "tau": _POSITIVE,
                "cutoff_factor": _POSITIVE,
                "window_factor": _POSITIVE,
                "rel_tol": _POSITIVE,
                "abs_tol": _POSITIVE,
                "tail_tol": _POSITIVE,
                "dt": _POSITIVE,
            }
        ),
        "output": _section({"dir": {"type": "string"}, "precision": {"type": "integer", "minimum": 1, "maximum": 17}}),
        "study": _section(
            {
                "mu": _POSITIVE,
                "omegas": _GRID,
                "dt_grid": _GRID,
                "lambdas": _GRID,
                "times": {"type": "array", "minItems": 1, "items": _NON_NEGATIVE},
                "susceptibility_times": _GRID,
                "n_terms": {"type": "integer", "minimum": 1},
            }
        ),
    },
}

DEFAULTS = {
    "model": {"kind": "exponential", "tau": 1.0, "beta": 0.2, "lam": 0.1, "seed": 7},
    "system": {"Hs": "zero", "couplings": ["pauli_x"]},
    "query": {
        "times": [0.0, 10.0],
        "observables": ["pauli_z", "pauli_z"],
        "branches": ["+", "+"],
        "order": 1,
        "propagator": "davies",
        "limits": "infinite",
    },
    "numerics": {
        "tau": 1.0,
        "cutoff_factor": 40.0,
        "window_factor": 4.0,
        "rel_tol": 1e-9,
        "abs_tol": 1e-12,
        "tail_tol": 1e-3,
    },
    "output": {"dir": ".", "precision": 12},
    "study": {
        "mu": 0.05,
        "omegas": {"start": -0.5, "stop": 0.5, "num": 11},
        "lambdas": [0.02, 0.04, 0.08],
        "times": [1.0, 2.5],
        "susceptibility_times": {"start": 0.5, "stop": 5.0, "num": 10},
    },
}


class RunConfig(dict):
    """Validated and default-filled run configuration with its canonical hash."""

    @property
    def sha256(self):
        return hashlib.sha256(canonical_json_bytes(self)).hexdigest()


def canonical_json_bytes(obj):
    return json.dumps(obj, sort_keys=True, ensure_ascii=True, separators=(",", ":")).encode("utf-8")


class ConfigLoader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (``1e-9``) as numbers."""


ConfigLoader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?[0-9][0-9_]*[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def load_yaml(stream):
    return yaml.load(stream, Loader=ConfigLoader)


# --------------------------------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------------------------------


def apply_override(config, assignment):
    """Apply ``key.sub=value`` with the value read as a YAML scalar or flow collection."""
    if "=" not in assignment:
        raise ConfigError([(assignment, "override must look like key.sub=value")])
    key, raw = assignment.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ConfigError([(assignment, "override key is empty")])
    try:
        value = load_yaml(raw)
    except yaml.YAMLError as e:
        raise ConfigError([(key, f"cannot parse override value: {e}")])
    node = config
    for part in path[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        elif not isinstance(child, dict):
            raise ConfigError([(key, f"'{part}' is not a section")])
        node = child
    node[path[-1]] = value
    return config


def _dotted(path):
    return ".".join(str(p) for p in path) or "<root>"


def _merge(defaults, values):
    merged = copy.deepcopy(defaults)
    for key, value in values.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def validate(raw):
    validator = Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: _dotted(e.absolute_path))
    if errors:
        raise ConfigError([(_dotted(e.absolute_path), e.message) for e in errors])
    config = RunConfig(_merge(DEFAULTS, raw))
    _check_shapes(config)
    return config


def parse_config(path=None, overrides=()):
    """Read a YAML run config, apply ``--set`` overrides, validate and fill defaults."""
    raw = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError([("config", f"cannot read {path}")])
        with open(path, "r", encoding="utf-8") as file:
            try:
                raw = load_yaml(file) or {}
            except yaml.YAMLError as e:
                raise ConfigError([("config", f"not valid YAML: {e}")])
        if not isinstance(raw, dict):
            raise ConfigError([("config", "top level must be a mapping of sections")])
    for assignment in overrides:
        apply_override(raw, assignment)
    return validate(raw)


# --------------------------------------------------------------------------------------------------
# Matrix literals and shape checks
# --------------------------------------------------------------------------------------------------


def matrix_from_literal(literal):
    if isinstance(literal, str):
        return PRESETS[literal].copy()
    rows = [[complex(v["re"], v.get("im", 0.0)) if isinstance(v, dict) else complex(v) for v in row] for row in literal]
    return np.array(rows, dtype=complex)


def _shape_error(literal, dim):
    if isinstance(literal, str):
        return None if dim == 2 else f"preset '{literal}' is 2x2, expected {dim}x{dim}"
    widths = {len(row) for row in literal}
    if len(widths) != 1 or widths.pop() != len(literal) or len(literal) != dim:
        shape = f"{len(literal)}x{'/'.join(str(len(row)) for row in literal)}"
        return f"expected a {dim}x{dim} matrix, got {shape}"
    return None


def _literal_dim(literal):
    return 2 if isinstance(literal, str) else len(literal)


def _check_shapes(config):
    errors = []
    system, query, model = config["system"], config["query"], config["model"]
    d = _literal_dim(system["Hs"])
    checks = [("system.Hs", system["Hs"], d)]
    checks += [(f"system.couplings.{k}", c, d) for k, c in enumerate(system["couplings"])]
    if "rho0" in system:
        checks.append(("system.rho0", system["rho0"], d))
    checks += [(f"query.observables.{k}", obs, d) for k, obs in enumerate(query["observables"])]
    if model["kind"] == "finite":
        if "H_e" not in model or "V_e" not in model:
            errors.append(("model", "a finite bath needs H_e and V_e"))
        else:
            d_e = _literal_dim(model["H_e"])
            checks.append(("model.H_e", model["H_e"], d_e))
            checks += [(f"model.V_e.{k}", V, d_e) for k, V in enumerate(model["V_e"])]
            if len(model["V_e"]) != len(system["couplings"]):
                errors.append(("model.V_e", f"expected {len(system['couplings'])} bath couplings"))
    for key, literal, dim in checks:
        message = _shape_error(literal, dim)
        if message:
            errors.append((key, message))
    n = len(query["times"])
    for key in ("observables", "branches"):
        if len(query[key]) != n:
            errors.append((f"query.{key}", f"expected {n} entries to match query.times"))
    if errors:
        raise ConfigError(errors)


# --------------------------------------------------------------------------------------------------
# Builders
# --------------------------------------------------------------------------------------------------


def grid(literal):
    if isinstance(literal, dict):
        return np.linspace(literal["start"], literal["stop"], literal["num"])
    return np.asarray(literal, dtype=float)


def build_quadrature(config):
    numerics = config["numerics"]
    return QuadratureConfig(
        tau=numerics["tau"],
        cutoff_factor=numerics["cutoff_factor"],
        window_factor=numerics["window_factor"],
        rel_tol=numerics["rel_tol"],
        abs_tol=numerics["abs_tol"],
        tail_tol=numerics["tail_tol"],
    )


def build_ode(config):
    numerics = config["numerics"]
    return OdeConfig(tau=numerics["tau"], dt=numerics.get("dt"))


def build_model(config):
    model = config["model"]
    if model["kind"] == "exponential":
        return ExponentialHighT(tau=model["tau"], beta=model["beta"], lam=model["lam"])
    if model["kind"] == "scaling":
        bath = default_scaling_bath(model["seed"], model["beta"])
        return finite_bath(bath.H_e, list(bath.couplings), model["beta"], model["lam"])
    return finite_bath(
        matrix_from_literal(model["H_e"]),
        [matrix_from_literal(V) for V in model["V_e"]],
        model["beta"],
        model["lam"],
    )


def build_system(config, default=False):
    """System from the config; ``default`` selects the scaling-study system when none is configured."""
    system = config["system"]
    if default and system == DEFAULTS["system"]:
        return default_scaling_system()
    Hs = matrix_from_literal(system["Hs"])
    couplings = [matrix_from_literal(V) for V in system["couplings"]]
    if "rho0" in system:
        rho0 = DensityMatrix.from_matrix(matrix_from_literal(system["rho0"]))
    else:
        rho0 = DensityMatrix.from_matrix(np.eye(Hs.shape[0]) / Hs.shape[0])
    return SystemSpec(Hs, couplings, rho0)


def build_query(config):
    query = config["query"]
    observables = [spectral_decompose(matrix_from_literal(obs)) for obs in query["observables"]]
    return MTCQuery(query["times"], observables, query["branches"])


# --------------------------------------------------------------------------------------------------
# CSV output
# --------------------------------------------------------------------------------------------------


def header_line(config):
    return f"# mtcpert {get_app_version()} config-sha256={config.sha256}"


def write_csv(path, config, header, rows, footer=None):
    """Write a CSV with the provenance comment line, fixed column order and precision."""
    serializer = Serializer({column: column for column in header}, precision=config["output"]["precision"])
    records = serializer.serialize_many([dict(zip(header, row)) for row in rows])
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as file:
        file.write(header_line(config) + "\n")
        writer = csv.writer(file, delimiter=",", lineterminator="\n")
        writer.writerow(serializer.header)
        for record in records:
            writer.writerow([record[column] for column in serializer.header])
        if footer:
            file.write(f"# {footer}\n")
    return path
