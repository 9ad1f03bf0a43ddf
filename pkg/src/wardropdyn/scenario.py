"""Scenario files, built-in scenarios, and run output.

A scenario is a TOML document with four tables::

    name = "fig1"
    description = "..."

    [network]
    nodes = [0, 1, 2]                       # optional, inferred from links
    congestion = "exponential"
    links = [{ name = "e1", tail = 0, head = 1, capacity = 2.0, theta = 1.0 }, ...]

    [dynamics]
    eta = 0.1
    best_response = { kind = "logit", beta = 1.0 }
    local_decision = { kind = "i_logit", gamma = 1.0 }   # or "preference_consistent"
    initial_preference = "uniform"                       # or one weight per path
    allow_infeasible = false
    initial_density = { e1 = 5.0, ... }

    [solver]
    t_end = 500.0
    stride = 10
    dt = 0.01                                # optional, default min(0.01, 0.1/max(1, eta))
    convergence_tol = 1e-6
    ceiling = 1e6
    adaptive = false
    atol = 1e-8
    equilibrium = { method = "fixed_point", tol = 1e-10, damping = 0.5, step = 0.1 }

    [output]
    directory = "runs/fig1"                  # optional

Every table except ``network`` and ``dynamics`` may be omitted; unknown keys
are rejected.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import platform
import re
import tempfile
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .choice import make_best_response, make_local_decision
from .congestion import ExponentialCongestion
from .diagnostics import time_to_threshold
from .dynamics import CoupledSystem, SystemState, default_dt
from .errors import ParseError, ValidationError
from .graph import enumerate_paths, min_cut_capacity, validate_network

SIMPLEX_TOL = 1e-10
THRESHOLD = 1e-3


@dataclass(frozen=True)
class LinkSpec:
    name: str
    tail: int | str
    head: int | str
    capacity: float
    theta: float


@dataclass
class ScenarioConfig:
    name: str
    links: list[LinkSpec]
    initial_density: dict[str, float]
    eta: float
    best_response: dict
    local_decision: dict
    description: str = ""
    nodes: list | None = None
    congestion: str = "exponential"
    initial_preference: str | list[float] = "uniform"
    allow_infeasible: bool = False
    t_end: float = 500.0
    stride: int = 10
    dt: float | None = None
    convergence_tol: float = 1e-6
    ceiling: float = 1e6
    adaptive: bool = False
    atol: float = 1e-8
    equilibrium: dict = field(default_factory=lambda: {"method": "fixed_point", "tol": 1e-10,
                                                       "damping": 0.5, "step": 0.1})
    output: str | None = None

    # --- built objects ---------------------------------------------------

    @cached_property
    def network(self):
        return validate_network([(l.tail, l.head) for l in self.links], self.nodes,
                                [l.name for l in self.links])

    @cached_property
    def paths(self):
        return enumerate_paths(self.network)

    @cached_property
    def congestion_model(self):
        return ExponentialCongestion([l.capacity for l in self.links],
                                     [l.theta for l in self.links])

    @cached_property
    def min_cut(self) -> float:
        return min_cut_capacity(self.network, self.congestion_model.capacity)

    def best_response_model(self):
        return make_best_response(self.best_response)

    def local_decision_model(self):
        return make_local_decision(self.local_decision)

    def system(self, eta: float | None = None, local_decision=None) -> CoupledSystem:
        return CoupledSystem(self.network, self.paths, self.congestion_model,
                             self.best_response_model(),
                             local_decision or self.local_decision_model(),
                             self.eta if eta is None else eta)

    def initial_state(self) -> SystemState:
        rho = np.array([self.initial_density[l.name] for l in self.links], dtype=float)
        if self.initial_preference == "uniform":
            pi = np.full(len(self.paths), 1.0 / len(self.paths))
        else:
            pi = np.array(self.initial_preference, dtype=float)
        return SystemState(rho, pi)

    def step_size(self, eta: float | None = None) -> float:
        if self.dt is not None:
            return self.dt
        return default_dt(self.eta if eta is None else eta)

    def horizon(self, eta: float | None = None) -> float:
        """``t_end`` stretched in proportion to the slow time scale ``1/eta``."""
        if eta is None:
            return self.t_end
        return self.t_end * max(1.0, self.eta / eta)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def digest(self) -> str:
        return hashlib.sha256(serialize_scenario(self).encode()).hexdigest()


# --- parsing -------------------------------------------------------------

_TOP = {"name", "description", "network", "dynamics", "solver", "output"}
_NETWORK = {"nodes", "congestion", "links"}
_LINK = {"name", "tail", "head", "capacity", "theta"}
_DYNAMICS = {"eta", "best_response", "local_decision", "initial_preference",
             "allow_infeasible", "initial_density"}
_SOLVER = {"t_end", "stride", "dt", "convergence_tol", "ceiling", "adaptive", "atol",
           "equilibrium"}
_EQUILIBRIUM = {"method", "tol", "damping", "step", "max_iters"}
_OUTPUT = {"directory"}


def _reject_unknown(table: dict, allowed: set, where: str):
    for key in table:
        if key not in allowed:
            raise ValidationError(f"{where}{key}", "unknown key")


def _number(value, name: str, *, positive=True, allow_zero=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"expected a number, got {value!r}")
    value = float(value)
    if math.isnan(value):
        raise ValidationError(name, "is NaN")
    if positive and not (value > 0 or (allow_zero and value == 0)):
        raise ValidationError(name, f"must be {'>= 0' if allow_zero else '> 0'}, got {value}")
    return value


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ValidationError(f"{where}{key}", "missing")
    return table[key]


def parse_scenario(text: str, name: str | None = None) -> ScenarioConfig:
    """Parse and fully validate scenario text."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(exc), int(m.group(1)) if m else None) from None
    return scenario_from_dict(doc, name)


def scenario_from_dict(doc: dict, name: str | None = None) -> ScenarioConfig:
    _reject_unknown(doc, _TOP, "")
    net = _require(doc, "network", "")
    dyn = _require(doc, "dynamics", "")
    solver = doc.get("solver", {})
    out = doc.get("output", {})
    _reject_unknown(net, _NETWORK, "network.")
    _reject_unknown(dyn, _DYNAMICS, "dynamics.")
    _reject_unknown(solver, _SOLVER, "solver.")
    _reject_unknown(out, _OUTPUT, "output.")

    congestion = net.get("congestion", "exponential")
    if congestion != "exponential":
        raise ValidationError("network.congestion", f"unknown family {congestion!r}")
    raw_links = _require(net, "links", "network.")
    if not isinstance(raw_links, list) or not raw_links:
        raise ValidationError("network.links", "needs at least one link")
    links = []
    for i, raw in enumerate(raw_links):
        where = f"network.links[{i}]."
        _reject_unknown(raw, _LINK, where)
        links.append(LinkSpec(
            name=str(raw.get("name", f"e{i + 1}")),
            tail=_require(raw, "tail", where),
            head=_require(raw, "head", where),
            capacity=_number(_require(raw, "capacity", where), where + "capacity"),
            theta=_number(_require(raw, "theta", where), where + "theta"),
        ))
        if not math.isfinite(links[-1].capacity):
            raise ValidationError(where + "capacity", "exponential family needs a finite capacity")

    dens = _require(dyn, "initial_density", "dynamics.")
    names = [l.name for l in links]
    for n in names:
        if n not in dens:
            raise ValidationError(f"dynamics.initial_density.{n}", "missing initial density for link")
    for n in dens:
        if n not in names:
            raise ValidationError(f"dynamics.initial_density.{n}", "no such link")
    density = {n: _number(dens[n], f"dynamics.initial_density.{n}") for n in names}

    br = dict(_require(dyn, "best_response", "dynamics."))
    _reject_unknown(br, {"kind", "beta"}, "dynamics.best_response.")
    if br.get("kind", "logit") != "logit":
        raise ValidationError("dynamics.best_response.kind", f"unknown kind {br.get('kind')!r}")
    br = {"kind": "logit", "beta": _number(_require(br, "beta", "dynamics.best_response."),
                                           "dynamics.best_response.beta")}
    ld = dict(_require(dyn, "local_decision", "dynamics."))
    _reject_unknown(ld, {"kind", "gamma"}, "dynamics.local_decision.")
    kind = ld.get("kind")
    if kind == "i_logit":
        ld = {"kind": kind, "gamma": _number(_require(ld, "gamma", "dynamics.local_decision."),
                                             "dynamics.local_decision.gamma", allow_zero=True)}
    elif kind == "preference_consistent":
        ld = {"kind": kind}
    else:
        raise ValidationError("dynamics.local_decision.kind", f"unknown kind {kind!r}")

    pref = dyn.get("initial_preference", "uniform")
    if isinstance(pref, list):
        pref = [_number(x, "dynamics.initial_preference", positive=False) for x in pref]
    elif pref != "uniform":
        raise ValidationError("dynamics.initial_preference", "expected 'uniform' or a list of weights")

    eq = dict(solver.get("equilibrium", {}))
    _reject_unknown(eq, _EQUILIBRIUM, "solver.equilibrium.")
    eq_full = {"method": eq.get("method", "fixed_point"),
               "tol": _number(eq.get("tol", 1e-10), "solver.equilibrium.tol"),
               "damping": _number(eq.get("damping", 0.5), "solver.equilibrium.damping"),
               "step": _number(eq.get("step", 0.1), "solver.equilibrium.step")}
    if eq_full["method"] not in ("fixed_point", "mirror_descent"):
        raise ValidationError("solver.equilibrium.method", f"unknown solver {eq_full['method']!r}")
    if eq_full["damping"] > 1:
        raise ValidationError("solver.equilibrium.damping", "must lie in (0, 1]")
    if "max_iters" in eq:
        eq_full["max_iters"] = int(_number(eq["max_iters"], "solver.equilibrium.max_iters"))

    stride = solver.get("stride", 10)
    if isinstance(stride, bool) or not isinstance(stride, int) or stride < 1:
        raise ValidationError("solver.stride", "must be a positive integer")
    allow = dyn.get("allow_infeasible", False)
    adaptive = solver.get("adaptive", False)
    for key, val in (("dynamics.allow_infeasible", allow), ("solver.adaptive", adaptive)):
        if not isinstance(val, bool):
            raise ValidationError(key, "expected true or false")

    cfg = ScenarioConfig(
        name=str(doc.get("name", name or "scenario")),
        description=str(doc.get("description", "")),
        nodes=net.get("nodes"),
        congestion=congestion,
        links=links,
        initial_density=density,
        eta=_number(_require(dyn, "eta", "dynamics."), "dynamics.eta"),
        best_response=br,
        local_decision=ld,
        initial_preference=pref,
        allow_infeasible=allow,
        t_end=_number(solver.get("t_end", 500.0), "solver.t_end"),
        stride=stride,
        dt=None if solver.get("dt") is None else _number(solver["dt"], "solver.dt"),
        convergence_tol=_number(solver.get("convergence_tol", 1e-6), "solver.convergence_tol"),
        ceiling=_number(solver.get("ceiling", 1e6), "solver.ceiling"),
        adaptive=adaptive,
        atol=_number(solver.get("atol", 1e-8), "solver.atol"),
        equilibrium=eq_full,
        output=out.get("directory"),
    )
    validate_scenario(cfg)
    return cfg


def validate_scenario(cfg: ScenarioConfig) -> None:
    """Checks that need the built network: path count, simplex, feasibility."""
    cfg.network  # raises the specific NetworkError
    if isinstance(cfg.initial_preference, list):
        pi = np.array(cfg.initial_preference)
        if pi.size != len(cfg.paths):
            raise ValidationError("dynamics.initial_preference",
                                  f"expected {len(cfg.paths)} weights, one per path")
        if np.any(pi <= 0) or abs(pi.sum() - 1.0) > SIMPLEX_TOL:
            raise ValidationError("dynamics.initial_preference",
                                  f"simplex: weights must be > 0 and sum to 1 (sum {pi.sum():.12g})")
    if not cfg.allow_infeasible and cfg.min_cut <= 1.0:
        raise ValidationError("network",
                              f"infeasible: min-cut capacity {cfg.min_cut:.12g} <= 1 "
                              "(set dynamics.allow_infeasible = true to run anyway)")


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    network = {}
    if cfg.nodes is not None:
        network["nodes"] = list(cfg.nodes)
    network["congestion"] = cfg.congestion
    network["links"] = [dataclasses.asdict(l) for l in cfg.links]
    dynamics = {
        "eta": cfg.eta,
        "best_response": dict(cfg.best_response),
        "local_decision": dict(cfg.local_decision),
        "initial_preference": cfg.initial_preference,
        "allow_infeasible": cfg.allow_infeasible,
        "initial_density": dict(cfg.initial_density),
    }
    solver = {"t_end": cfg.t_end, "stride": cfg.stride}
    if cfg.dt is not None:
        solver["dt"] = cfg.dt
    solver.update({"convergence_tol": cfg.convergence_tol, "ceiling": cfg.ceiling,
                   "adaptive": cfg.adaptive, "atol": cfg.atol,
                   "equilibrium": dict(cfg.equilibrium)})
    doc = {"name": cfg.name, "description": cfg.description, "network": network,
           "dynamics": dynamics, "solver": solver}
    if cfg.output is not None:
        doc["output"] = {"directory": cfg.output}
    return doc


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Canonical text form; ``parse_scenario`` inverts it exactly."""
    return tomli_w.dumps(scenario_to_dict(cfg))


def read_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario {str(path)!r}: {exc.strerror}") from None
    return parse_scenario(text, name=path.stem)


# --- built-ins -----------------------------------------------------------

BUILTIN_NAMES = ("fig1", "fig1-pc", "two-link-sym", "two-link-asym", "single-link", "infeasible")


def builtin_text(name: str) -> str:
    return resources.files("wardropdyn.scenarios").joinpath(f"{name}.scenario").read_text()


def builtin_scenarios() -> dict[str, ScenarioConfig]:
    return {n: parse_scenario(builtin_text(n), name=n) for n in BUILTIN_NAMES}


def load_scenario(ref: str) -> ScenarioConfig:
    """Built-in name first, then a file path."""
    if ref in BUILTIN_NAMES:
        return parse_scenario(builtin_text(ref), name=ref)
    return read_scenario(ref)


# --- results -------------------------------------------------------------


def fmt(x) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    _atomic_write(Path(path), buf.getvalue())


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}


def trajectory_header(traj) -> list[str]:
    return (["t"] + [f"rho_{n}" for n in traj.link_names] + [f"pi_{p}" for p in traj.path_names]
            + [f"f_{n}" for n in traj.link_names] + ["V", "W", "dist_l1"])


def trajectory_rows(traj):
    for k in range(len(traj)):
        yield ([traj.times[k], *traj.rho[k], *traj.pi[k], *traj.f[k],
                traj.V[k], traj.W[k], traj.dist_l1[k]])


def write_trajectory(traj, path) -> None:
    write_csv(path, trajectory_header(traj), trajectory_rows(traj))


def run_summary(traj, threshold: float = THRESHOLD) -> dict:
    return {
        "status": traj.status,
        "t_final": float(traj.times[-1]),
        "terminal_dist_l1": float(traj.dist_l1[-1]),
        "initial_dist_l1": float(traj.dist_l1[0]),
        "time_to_threshold": time_to_threshold(traj.times, traj.dist_l1, threshold),
        "threshold": threshold,
        "terminal_V": float(traj.V[-1]),
        "terminal_W": float(traj.W[-1]),
    }


def equilibrium_summary(eq) -> dict:
    return {
        "solver": eq.solver,
        "iterations": eq.iterations,
        "fixed_point_residual": eq.fixed_point_residual,
        "potential_value": eq.potential_value,
        "wardrop_gap": eq.wardrop_gap,
        "pi_h": [float(x) for x in eq.pi_h],
        "f_h": [float(x) for x in eq.f_h],
        "rho_h": [float(x) for x in eq.rho_h],
        "settings": {k: v for k, v in eq.info.items()},
    }


def versions() -> dict:
    from . import __version__
    return {"wardropdyn": __version__, "numpy": np.__version__,
            "python": platform.python_version()}


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def write_manifest(path, manifest: dict) -> None:
    text = json.dumps(_json_safe(manifest), indent=2, sort_keys=True, allow_nan=False) + "\n"
    _atomic_write(Path(path), text)


def write_results(traj, equilibrium, metadata: dict, directory) -> dict:
    """Write ``trajectory.csv`` and ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    write_trajectory(traj, directory / "trajectory.csv")
    manifest = {
        **metadata,
        "run": run_summary(traj),
        "integrator": dict(traj.info),
        "equilibrium": None if equilibrium is None else equilibrium_summary(equilibrium),
        "versions": versions(),
        "columns": trajectory_header(traj),
    }
    write_manifest(directory / "manifest.json", manifest)
    return manifest
