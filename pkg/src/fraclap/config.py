"""Run configuration: loading, overrides, schema validation, hashing.

One JSON file describes one run.  Validation happens in two layers: the schema
walk here rejects unknown or mistyped keys with their dotted paths, and
each subcommand later checks that the keys it needs are present.  The
fully-resolved config (user file, overrides, then defaults) is what gets
hashed and echoed, so a run directory name pins down every knob.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Sequence

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "load_config",
    "apply_overrides",
    "validate",
    "config_hash",
    "build_domain",
    "resolve_lambda",
]


class ConfigError(ValueError):
    """Invalid run configuration; ``keys`` lists the offending paths."""

    def __init__(self, message: str, keys: Sequence[str] = ()):
        super().__init__(message)
        self.keys = list(keys)


def _num(x) -> bool:
    # bool is an int subclass; a bare True is never a valid number here
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


# leaf validators: (predicate, human-readable expectation)
_NUM = (_num, "number")
_INT = (_is_int, "integer")
_STR = (lambda x: isinstance(x, str), "string")
_BOOL = (lambda x: isinstance(x, bool), "boolean")
_LIST = (lambda x: isinstance(x, list), "list")
_LAM = (
    lambda x: x is None or _num(x) or isinstance(x, dict),
    "number, null, or {\"fraction_of_lambda1s\": x}",
)

_SCHEMA: dict[str, Any] = {
    "domain": {
        "kind": _STR,          # "box", "interval", or "cone"
        "extents": _LIST,      # [[lo, hi], ...] per axis (box/interval)
        "n": _LIST,            # cells per axis
        "radius": _NUM,        # cone side length
        "dim": _INT,           # cone dimension
        "smoothing": _NUM,     # cone apex exemption radius
    },
    "partition": {
        "dirichlet_faces": _LIST,   # [[axis, side], ...]
    },
    "s": _NUM,
    "lambda": _LAM,
    "lambda_grid": _LIST,           # entries numbers or fraction dicts
    "alphas": _LIST,
    "faces": _LIST,                 # fill order for the moving family
    "mode_count": _INT,
    "field": {
        "modes": _LIST,
        "coeffs": _LIST,
    },
    "cylinder": {
        "Y": (lambda x: x is None or _num(x), "number or null"),
        "J": _INT,
        "gamma": _NUM,
    },
    "levels": _LIST,                # [[n, J], ...] refinement ladder
    "pohozaev": {
        "x0": _LIST,
        "nonlinearity": _STR,       # "critical" or "linear_plus_critical"
        "exempt_radius": _NUM,
        "geometry_tol": _NUM,
    },
    "solver": {
        "max_iter": _INT,
        "window": _INT,
        "q_rel_tol": _NUM,
        "armijo": _NUM,
        "polish": _BOOL,
        "polish_tol": _NUM,
        "polish_max": _INT,
        "init": _STR,               # "principal" or "random"
    },
    "outdir": _STR,
    "seed": _INT,
}

DEFAULTS: dict[str, Any] = {
    "s": 0.75,
    "lambda": None,
    "mode_count": 5,
    "cylinder": {"Y": None, "J": 32, "gamma": 3.0},
    "pohozaev": {
        "nonlinearity": "linear_plus_critical",
        "exempt_radius": 0.0,
        "geometry_tol": 1e-10,
    },
    "solver": {
        "max_iter": 20000,
        "window": 25,
        "q_rel_tol": 1e-10,
        "armijo": 1e-4,
        "polish": True,
        "polish_tol": 1e-8,
        "polish_max": 500,
        "init": "principal",
    },
    "outdir": "runs",
    "seed": 0,
}


def load_config(path) -> dict:
    """Read a JSON config file into a plain dict.

    Parameters
    ----------
    path : str or Path

    Raises
    ------
    ConfigError
        If the file is missing, unparsable, or not a JSON object.
    """
    p = Path(path)
    try:
        raw = p.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {p} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {p} must be a JSON object")
    return cfg


def apply_overrides(cfg: dict, assignments: Sequence[str]) -> dict:
    """Apply ``key=value`` overrides to a copy of ``cfg``.

    Keys are dotted paths (``solver.max_iter``); values parse as JSON
    literals, falling back to a bare string so ``--set domain.kind=box``
    works without quoting gymnastics.
    """
    out = copy.deepcopy(cfg)
    for item in assignments:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(
                    f"override {key!r} descends into a non-object")
        node[parts[-1]] = value
    return out


def _walk(cfg: dict, schema: dict, prefix: str, bad: list[str]) -> None:
    for key, value in cfg.items():
        path = f"{prefix}{key}"
        if key not in schema:
            bad.append(path)
            continue
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                bad.append(f"{path} (expected object)")
            else:
                _walk(value, rule, path + ".", bad)
        else:
            pred, want = rule
            if not pred(value):
                bad.append(f"{path} (expected {want})")


def _merge_defaults(cfg: dict, defaults: dict) -> dict:
    out = copy.deepcopy(cfg)
    for key, dval in defaults.items():
        if key not in out:
            out[key] = copy.deepcopy(dval)
        elif isinstance(dval, dict) and isinstance(out[key], dict):
            out[key] = _merge_defaults(out[key], dval)
    return out


def validate(cfg: dict) -> dict:
    """Check ``cfg`` against the schema and fill defaults.

    Returns
    -------
    dict
        The fully-resolved config that every run echoes and hashes.

    Raises
    ------
    ConfigError
        Listing every unknown or mistyped key by dotted path.
    """
    bad: list[str] = []
    _walk(cfg, _SCHEMA, "", bad)
    if bad:
        raise ConfigError(
            "invalid configuration keys: " + ", ".join(sorted(bad)),
            keys=sorted(bad))
    return _merge_defaults(cfg, DEFAULTS)


def config_hash(resolved: dict) -> str:
    """12-hex-digit digest of the canonical JSON form of a resolved config."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def build_domain(resolved: dict):
    """Construct the mesh and boundary partition a config describes.

    Returns
    -------
    (Mesh, BoundaryPartition)

    Raises
    ------
    ConfigError
        If the domain or partition section is missing or inconsistent.
    """
    from .mesh import build_tensor_mesh, cone_domain, partition_boundary

    dom = resolved.get("domain")
    if dom is None:
        raise ConfigError("missing required section: domain", keys=["domain"])
    kind = dom.get("kind", "box")
    if kind == "cone":
        for need in ("dim", "radius", "n"):
            if need not in dom:
                raise ConfigError(f"cone domain needs domain.{need}",
                                  keys=[f"domain.{need}"])
        cone = cone_domain(dom["dim"], dom["radius"], int(dom["n"][0]),
                           rho=dom.get("smoothing", 0.0))
        return cone.mesh, cone.partition
    if kind not in ("box", "interval"):
        raise ConfigError(f"unknown domain kind {kind!r}", keys=["domain.kind"])
    if "extents" not in dom or "n" not in dom:
        raise ConfigError("box domain needs domain.extents and domain.n",
                          keys=["domain.extents", "domain.n"])
    n = [int(v) for v in dom["n"]]
    mesh = build_tensor_mesh(len(n), dom["extents"], n)
    part = resolved.get("partition")
    if part is None or "dirichlet_faces" not in part:
        raise ConfigError("missing partition.dirichlet_faces",
                          keys=["partition.dirichlet_faces"])
    faces = [tuple(f) for f in part["dirichlet_faces"]]
    return mesh, partition_boundary(mesh, faces)


def resolve_lambda(spec, lam1s: float) -> float:
    """Turn a config lambda spec into a number.

    ``spec`` is a number (taken as-is) or ``{"fraction_of_lambda1s": x}``,
    resolved against the fractional principal eigenvalue of the run's
    discretization.
    """
    if _num(spec):
        return float(spec)
    if isinstance(spec, dict) and set(spec) == {"fraction_of_lambda1s"}:
        frac = spec["fraction_of_lambda1s"]
        if not _num(frac):
            raise ConfigError("fraction_of_lambda1s must be a number",
                              keys=["lambda.fraction_of_lambda1s"])
        return float(frac) * lam1s
    raise ConfigError(
        "lambda must be a number or {\"fraction_of_lambda1s\": x}",
        keys=["lambda"])
