"""Run configuration: parsing, validation and default materialization.

A config is a YAML mapping. Physical parameters are ratios to omega and may
be written as decimals or as fractions such as ``"1/750"``. Example::

    protocol: n00m
    parameters: {eta: 0.31, epsilon: 1/750, lambda_over_epsilon: 2.5, n: 2, m: 2}
    sweep: {epsilon: [1/250, 1/500, 1/750]}
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from .. import hamiltonians as hm
from ..errors import ConfigError
from ..evolution import SCHEMES, PropagationConfig
from ..protocols import CK_MODELS, MEASUREMENTS, N00M_METHODS, N00M_MODELS, CkRunSpec, N00mRunSpec

PROTOCOLS = ("cross-kerr", "n00m", "theta-sweep")
TOP_KEYS = {"protocol", "model", "parameters", "sweep", "grid", "options", "integrator", "metrics", "output", "threads"}
SWEEPABLE = {
    "omega", "eta", "eta1", "eta2", "epsilon", "epsilon1", "epsilon2", "phi1", "phi2",
    "lambda", "lambda_over_epsilon", "alpha", "alpha1", "alpha2", "n", "m", "cutoff1", "cutoff2",
}
INTEGER_PARAMS = {"n", "m", "cutoff1", "cutoff2"}
OPTION_DEFAULTS = {
    "cross-kerr": {"order": 2, "target_order": 2, "pulse": True, "rotate": True},
    "n00m": {"measurement": "plus_x", "method": "floquet"},
    "theta-sweep": {"measurement": "plus_x", "method": "floquet", "theta_min": 0.45, "theta_max": 0.55, "theta_points": 1001},
}
GRID_DEFAULTS = {
    "cross-kerr": {"start": 0.0, "stop": 1.0, "points": 201},
    "n00m": {"start": 0.0, "stop": 1.0, "points": 201},
    "theta-sweep": {"start": 1.0, "stop": 1.0, "points": 1},
}
INTEGRATOR_DEFAULTS = {"scheme": "cf4", "substeps_per_period": 128, "tol": 1e-8}
MODEL_CHOICES = {"cross-kerr": CK_MODELS, "n00m": N00M_MODELS, "theta-sweep": ("exact",)}


def parse_number(value, name: str) -> float:
    """Decimal, integer or ``"a/b"`` fraction string to float."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            out = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{name}: cannot parse {value!r} as a number or fraction") from None
    else:
        raise ConfigError(f"{name}: expected a number, got {type(value).__name__}")
    if not math.isfinite(out):
        raise ConfigError(f"{name}: must be finite")
    return out


def _check_keys(section: dict, allowed, where: str):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _mapping(raw, where: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a mapping")
    return dict(raw)


@dataclass(frozen=True)
class Point:
    """One resolved sweep point."""

    index: int
    values: dict[str, float]
    parameters: dict[str, float]


@dataclass
class RunConfig:
    protocol: str
    model: str
    parameters: dict[str, float]
    sweep: dict[str, list[float]]
    grid: dict[str, float]
    options: dict[str, Any]
    integrator: dict[str, Any]
    log_base: str = "e"
    output: str = "runs/out"
    dump_states: bool = False
    threads: int = 1
    source: str | None = field(default=None, compare=False)

    def resolved(self) -> dict:
        """Every setting, defaults included, as plain data."""
        return {
            "protocol": self.protocol,
            "model": self.model,
            "parameters": dict(self.parameters),
            "sweep": {k: list(v) for k, v in self.sweep.items()},
            "grid": dict(self.grid),
            "options": dict(self.options),
            "integrator": dict(self.integrator),
            "metrics": {"log_base": self.log_base},
            "output": {"directory": self.output, "dump_states": self.dump_states},
            "threads": self.threads,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.resolved(), sort_keys=False)

    def points(self) -> list[Point]:
        """Cartesian product of the sweep axes, in declaration order."""
        names = list(self.sweep)
        combos = itertools.product(*(self.sweep[n] for n in names)) if names else [()]
        out = []
        for i, combo in enumerate(combos):
            vals = dict(zip(names, combo))
            params = dict(self.parameters)
            params.update(vals)
            if "lambda_over_epsilon" in vals:
                params.pop("lambda", None)
            if "lambda" in vals:
                params.pop("lambda_over_epsilon", None)
            out.append(Point(i, vals, params))
        if any(len(v) == 0 for v in self.sweep.values()):
            return []
        return out

    def time_grid(self) -> tuple[float, ...]:
        g = self.grid
        npts = int(g["points"])
        if npts == 1:
            return (float(g["stop"]),)
        step = (g["stop"] - g["start"]) / (npts - 1)
        return tuple(g["start"] + k * step for k in range(npts))

    def thetas(self) -> list[float]:
        o = self.options
        lo, hi, npts = o["theta_min"], o["theta_max"], int(o["theta_points"])
        if npts == 1:
            return [math.pi * lo]
        return [math.pi * (lo + k * (hi - lo) / (npts - 1)) for k in range(npts)]

    def propagation(self) -> PropagationConfig:
        i = self.integrator
        return PropagationConfig(substeps_per_period=int(i["substeps_per_period"]), scheme=i["scheme"], tol=float(i["tol"]))


def _pick(params: dict, key: str, j: int, required=True, default=None):
    for k in (f"{key}{j}", key):
        if k in params:
            return params[k]
    if required:
        raise ConfigError(f"parameters: {key} (or {key}{j}) is required")
    return default


def model_params(cfg: RunConfig, params: dict) -> hm.ModelParams:
    """Build :class:`ModelParams` for one point."""
    omega = params.get("omega", 1.0)
    subs = []
    for j in (1, 2):
        eta = _pick(params, "eta", j)
        eps = _pick(params, "epsilon", j)
        phi = _pick(params, "phi", j, required=False, default=0.0)
        cutoff = params.get(f"cutoff{j}")
        if cfg.protocol == "cross-kerr":
            delta = 0.0
        else:
            key = "n" if j == 1 else "m"
            if key not in params:
                raise ConfigError(f"parameters: {key} is required for protocol {cfg.protocol}")
            delta = -float(params[key]) * omega
        subs.append(
            hm.SubsystemParams(eta, (hm.DriveSpec(eps, delta, phi),), None if cutoff is None else int(cutoff), omega)
        )
    if "lambda" in params:
        lam = params["lambda"]
    elif "lambda_over_epsilon" in params:
        lam = params["lambda_over_epsilon"] * subs[0].drives[0].epsilon
    else:
        raise ConfigError("parameters: lambda or lambda_over_epsilon is required")
    return hm.ModelParams(subs[0], subs[1], lam)


def ck_spec(cfg: RunConfig, params: dict, workers: int = 1) -> CkRunSpec:
    o = cfg.options
    return CkRunSpec(
        model_params(cfg, params),
        alpha1=_pick(params, "alpha", 1),
        alpha2=_pick(params, "alpha", 2),
        time_grid=cfg.time_grid(),
        model=cfg.model,
        order=int(o["order"]),
        target_order=int(o["target_order"]),
        pulse=bool(o["pulse"]),
        rotate=bool(o["rotate"]),
        log_base=cfg.log_base,
        keep_states=False,
        workers=workers,
    )


def n00m_spec(cfg: RunConfig, params: dict, workers: int = 1) -> N00mRunSpec:
    o = cfg.options
    for k in ("n", "m"):
        if k not in params:
            raise ConfigError(f"parameters: {k} is required for protocol {cfg.protocol}")
    return N00mRunSpec(
        model_params(cfg, params),
        int(params["n"]),
        int(params["m"]),
        measurement=o["measurement"],
        model=cfg.model,
        time_grid=cfg.time_grid(),
        method=o["method"],
        propagation=cfg.propagation(),
        log_base=cfg.log_base,
        keep_states=False,
        workers=workers,
    )


def _parse_params(raw: dict, where="parameters") -> dict[str, float]:
    _check_keys(raw, SWEEPABLE, where)
    out = {}
    for k, v in raw.items():
        if v is None:
            continue
        x = parse_number(v, f"{where}.{k}")
        if k in INTEGER_PARAMS:
            if x != int(x):
                raise ConfigError(f"{where}.{k} must be an integer, got {v!r}")
            x = int(x)
        out[k] = x
    for k in ("eta", "eta1", "eta2", "epsilon", "epsilon1", "epsilon2", "lambda", "lambda_over_epsilon", "omega"):
        if k in out and not out[k] > 0:
            raise ConfigError(f"{where}.{k} must be positive, got {out[k]}")
    for k in ("n", "m"):
        if k in out and out[k] < 1:
            raise ConfigError(f"{where}.{k} must be at least 1")
    if "lambda" in out and "lambda_over_epsilon" in out:
        raise ConfigError(f"{where}: give lambda or lambda_over_epsilon, not both")
    return out


def _materialize(section: dict, defaults: dict, where: str) -> dict:
    _check_keys(section, defaults, where)
    out = copy.deepcopy(defaults)
    out.update(section)
    return out


def build_config(data) -> RunConfig:
    """Validate a parsed mapping and fill in every default."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    _check_keys(data, TOP_KEYS, "config")
    protocol = data.get("protocol")
    if protocol is None:
        raise ConfigError("protocol missing")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    model = data.get("model", "exact")
    if model not in MODEL_CHOICES[protocol]:
        raise ConfigError(f"model must be one of {MODEL_CHOICES[protocol]} for {protocol}, got {model!r}")

    params = _parse_params(_mapping(data.get("parameters"), "parameters"))

    sweep_raw = _mapping(data.get("sweep"), "sweep")
    _check_keys(sweep_raw, SWEEPABLE, "sweep")
    sweep = {}
    for name, values in sweep_raw.items():
        if not isinstance(values, list):
            raise ConfigError(f"sweep.{name} must be a list")
        parsed = [_parse_params({name: v}, "sweep")[name] for v in values]
        sweep[name] = parsed
    if "lambda" in sweep and "lambda_over_epsilon" in sweep:
        raise ConfigError("sweep: lambda and lambda_over_epsilon cannot both be swept")

    grid = _materialize(_mapping(data.get("grid"), "grid"), GRID_DEFAULTS[protocol], "grid")
    grid = {k: parse_number(v, f"grid.{k}") for k, v in grid.items()}
    if grid["points"] < 1 or grid["points"] != int(grid["points"]):
        raise ConfigError("grid.points must be a positive integer")
    grid["points"] = int(grid["points"])
    if grid["start"] < 0 or grid["stop"] < grid["start"]:
        raise ConfigError("grid must satisfy 0 <= start <= stop")

    options = _materialize(_mapping(data.get("options"), "options"), OPTION_DEFAULTS[protocol], "options")
    if protocol != "cross-kerr":
        if options["measurement"] not in MEASUREMENTS:
            raise ConfigError(f"options.measurement must be one of {sorted(MEASUREMENTS)}")
        if options["method"] not in N00M_METHODS:
            raise ConfigError(f"options.method must be one of {N00M_METHODS}")
    else:
        for k in ("order", "target_order"):
            if options[k] not in hm.SUPPORTED_TAYLOR_ORDERS:
                raise ConfigError(f"options.{k} must be one of {hm.SUPPORTED_TAYLOR_ORDERS}")
    if protocol == "theta-sweep":
        for k in ("theta_min", "theta_max"):
            options[k] = parse_number(options[k], f"options.{k}")
        if int(options["theta_points"]) < 1:
            raise ConfigError("options.theta_points must be positive")

    integrator = _materialize(_mapping(data.get("integrator"), "integrator"), INTEGRATOR_DEFAULTS, "integrator")
    if integrator["scheme"] not in SCHEMES:
        raise ConfigError(f"integrator.scheme must be one of {SCHEMES}")
    integrator["tol"] = parse_number(integrator["tol"], "integrator.tol")
    if int(integrator["substeps_per_period"]) < 16:
        raise ConfigError("integrator.substeps_per_period must be at least 16")
    if not integrator["tol"] > 0:
        raise ConfigError("integrator.tol must be positive")

    metrics = _materialize(_mapping(data.get("metrics"), "metrics"), {"log_base": "e"}, "metrics")
    log_base = check_log_base(metrics["log_base"])
    output = _materialize(_mapping(data.get("output"), "output"), {"directory": "runs/out", "dump_states": False}, "output")
    threads = data.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        raise ConfigError("threads must be a positive integer")

    cfg = RunConfig(
        protocol=protocol,
        model=model,
        parameters=params,
        sweep=sweep,
        grid=grid,
        options=options,
        integrator=integrator,
        log_base=log_base,
        output=str(output["directory"]),
        dump_states=bool(output["dump_states"]),
        threads=threads,
    )
    _check_required(cfg)
    return cfg


def check_log_base(base) -> str:
    text = str(base).strip()
    if text in ("e", "2"):
        return text
    if text in ("2.0",):
        return "2"
    raise ConfigError(f"metrics.log_base must be 2 or e, got {base!r}")


def _check_required(cfg: RunConfig):
    keys = set(cfg.parameters) | set(cfg.sweep)
    needed = [("eta", "eta1", "eta2"), ("epsilon", "epsilon1", "epsilon2"), ("lambda", "lambda_over_epsilon")]
    if cfg.protocol == "cross-kerr":
        needed.append(("alpha", "alpha1", "alpha2"))
    else:
        needed += [("n",), ("m",)]
    for group in needed:
        if group[0] in ("eta", "epsilon", "alpha"):
            ok = group[0] in keys or (group[1] in keys and group[2] in keys)
        else:
            ok = any(k in keys for k in group)
        if not ok:
            raise ConfigError(f"parameters: missing {' or '.join(group)}")


def parse_config(path) -> RunConfig:
    """Read and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    cfg = build_config(data)
    cfg.source = str(path)
    return cfg
