"""Experiment configuration: JSON documents merged over built-in defaults,
validated field by field.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math

__all__ = ["EXPERIMENTS", "DEFAULTS", "ConfigError", "load_config", "validate", "config_hash",
           "FULL_TRIALS"]

EXPERIMENTS = ("convergence", "smpc-compare", "dp-compare", "attack-verify")
FULL_TRIALS = 10_000

DEFAULTS = {
    "experiment": "convergence",
    "n": 30,
    "trials": None,          # None: per-experiment default below
    "seed": 0,
    "workers": 1,
    "sigma_s": 1.0,
    "consensus": {"c": 1.0, "theta": 0.0, "t_max": 500},
    "adqsp": {"sigma_z": 1000.0, "delta0": None, "gamma": "auto", "delta_min": 0.0, "bits": 2},
    "smpc": {"p": 2 ** 31 - 1, "scale": 1e6},
    "dp": {"mechanism": "uniform", "M": 1.0, "eps": 1.0, "u_r": 0.1},
    "corrupt": {"mode": "count", "value": 5},
    "grids": {
        "theta": [0.0, 0.2, 0.5],
        "sigma_z": [10.0, 100.0, 1000.0],
        "delta_min": [1e-3, 1e-2, 1e-1],
        "sigma_z_privacy": [0.0, 1.0, 10.0, 100.0, 1000.0],
        "u_r": [1e-2, 1e-1],
        "nmi_every": 10,
    },
    "mi": {"k": 3},
}

DEFAULT_TRIALS = {"convergence": 2000, "smpc-compare": 2000, "dp-compare": 2000,
                  "attack-verify": 100}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the culprit."""

    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown field")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(where, "expected an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _num(cfg, path, *, lo=None, hi=None, lo_open=False, hi_open=False, integer=False,
         allow_none=False):
    node = cfg
    for part in path.split("."):
        node = node[part]
    if node is None and allow_none:
        return
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(path, f"expected a number, got {node!r}")
    if not math.isfinite(node):
        raise ConfigError(path, "must be finite")
    if integer and int(node) != node:
        raise ConfigError(path, f"expected an integer, got {node!r}")
    if lo is not None and (node < lo or (lo_open and node == lo)):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {node!r}")
    if hi is not None and (node > hi or (hi_open and node == hi)):
        raise ConfigError(path, f"must be {'<' if hi_open else '<='} {hi}, got {node!r}")


def validate(cfg: dict) -> dict:
    """Check every field; returns ``cfg`` with ``trials`` resolved."""
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    _num(cfg, "n", lo=2, integer=True)
    _num(cfg, "trials", lo=1, integer=True, allow_none=True)
    _num(cfg, "seed", lo=0, hi=2 ** 64 - 1, integer=True)
    _num(cfg, "workers", lo=1, integer=True)
    _num(cfg, "sigma_s", lo=0, lo_open=True)
    _num(cfg, "consensus.c", lo=0, lo_open=True)
    _num(cfg, "consensus.theta", lo=0, hi=1, hi_open=True)
    _num(cfg, "consensus.t_max", lo=3, integer=True)
    _num(cfg, "adqsp.sigma_z", lo=0)
    _num(cfg, "adqsp.delta0", lo=0, lo_open=True, allow_none=True)
    if cfg["adqsp"]["gamma"] != "auto":
        _num(cfg, "adqsp.gamma", lo=0, hi=1, lo_open=True, hi_open=True)
    _num(cfg, "adqsp.delta_min", lo=0)
    _num(cfg, "adqsp.bits", lo=1, hi=62, integer=True)
    _num(cfg, "smpc.p", lo=2, integer=True)
    _num(cfg, "smpc.scale", lo=0, lo_open=True)
    if cfg["dp"]["mechanism"] not in ("laplace", "uniform"):
        raise ConfigError("dp.mechanism", "must be 'laplace' or 'uniform'")
    _num(cfg, "dp.M", lo=0, lo_open=True)
    _num(cfg, "dp.eps", lo=0, lo_open=True)
    _num(cfg, "dp.u_r", lo=0, lo_open=True)
    mode = cfg["corrupt"]["mode"]
    if mode not in ("count", "explicit", "all-but-one"):
        raise ConfigError("corrupt.mode", "must be 'count', 'explicit' or 'all-but-one'")
    val = cfg["corrupt"]["value"]
    n = cfg["n"]
    if mode == "count":
        _num(cfg, "corrupt.value", lo=0, hi=n - 1, integer=True)
    elif mode == "explicit":
        if not isinstance(val, list) or not all(isinstance(v, int) and 0 <= v < n for v in val):
            raise ConfigError("corrupt.value", "expected a list of node indices in [0, n)")
        if len(set(val)) >= n:
            raise ConfigError("corrupt.value", "at least one node must stay honest")
    else:
        if val is not None:
            _num(cfg, "corrupt.value", lo=0, hi=n - 1, integer=True)
    grids = cfg["grids"]
    for key in ("theta", "sigma_z", "delta_min", "sigma_z_privacy", "u_r"):
        g = grids[key]
        if not isinstance(g, list) or not g:
            raise ConfigError(f"grids.{key}", "expected a non-empty list")
        for v in g:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ConfigError(f"grids.{key}", f"invalid entry {v!r}")
    if any(v >= 1 for v in grids["theta"]):
        raise ConfigError("grids.theta", "entries must lie in [0, 1)")
    if any(v <= 0 for v in grids["u_r"]):
        raise ConfigError("grids.u_r", "entries must be positive")
    _num(cfg, "grids.nmi_every", lo=1, integer=True)
    _num(cfg, "mi.k", lo=1, integer=True)
    if cfg["trials"] is None:
        cfg["trials"] = DEFAULT_TRIALS[cfg["experiment"]]
    return cfg


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the JSON document at ``path``, then ``overrides``."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<document>", f"not valid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError("<document>", "top level must be an object")
        cfg = _merge(cfg, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate(cfg)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
