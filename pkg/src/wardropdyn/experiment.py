"""Run orchestration shared by the command line and the acceptance suite."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .choice import ILogit, PreferenceConsistent, consistency_residual, cooperativity_margin
from .diagnostics import time_to_threshold
from .dynamics import simulate
from .equilibrium import solve_equilibrium
from .scenario import THRESHOLD, fmt, write_csv, write_results

log = logging.getLogger(__name__)

DEFAULT_ETAS = (0.01, 0.1, 1.0, 10.0, 100.0)


def equilibrium_for(cfg, method: str | None = None):
    opts = dict(cfg.equilibrium)
    if method is not None:
        opts["method"] = method
    return solve_equilibrium(cfg.network, cfg.paths, cfg.congestion_model,
                             cfg.best_response_model(), **opts)


def run(cfg, eta=None, dt=None, t_end=None, stride=None, local_decision=None,
        equilibrium=None, convergence_tol=None):
    """Solve for the equilibrium (unless given) and simulate toward it."""
    eq = equilibrium or equilibrium_for(cfg)
    system = cfg.system(eta=eta, local_decision=local_decision)
    traj = simulate(
        system,
        cfg.initial_state(),
        t_end=t_end if t_end is not None else cfg.horizon(eta),
        dt=dt if dt is not None else cfg.step_size(eta),
        stride=stride or cfg.stride,
        rho_ref=eq.rho_h,
        convergence_tol=cfg.convergence_tol if convergence_tol is None else convergence_tol,
        ceiling=cfg.ceiling,
        adaptive=cfg.adaptive,
        atol=cfg.atol,
    )
    return traj, eq


def metadata(cfg, system_eta, local_decision) -> dict:
    return {
        "scenario": cfg.name,
        "scenario_sha256": cfg.digest(),
        "eta": system_eta,
        "local_decision": local_decision,
        "best_response": dict(cfg.best_response),
        "min_cut": cfg.min_cut,
        "path_count": len(cfg.paths),
    }


def run_and_write(cfg, out_dir, eta=None, dt=None, t_end=None, stride=None,
                  local_decision=None, equilibrium=None, figures=()):
    traj, eq = run(cfg, eta, dt, t_end, stride, local_decision, equilibrium)
    ld = local_decision or cfg.local_decision_model()
    ld_desc = {"kind": ld.kind, **({"gamma": ld.gamma} if isinstance(ld, ILogit) else {})}
    meta = metadata(cfg, cfg.eta if eta is None else eta, ld_desc)
    meta["solver"] = {"t_end": t_end if t_end is not None else cfg.horizon(eta),
                      "dt": traj.info["dt"], "stride": stride or cfg.stride,
                      "convergence_tol": cfg.convergence_tol, "adaptive": cfg.adaptive,
                      "atol": cfg.atol, "ceiling": cfg.ceiling}
    manifest = write_results(traj, eq, meta, out_dir)
    if figures:
        from .plotting import run_figure, write_figures
        write_figures(lambda: run_figure(traj, f"{cfg.name}, eta={meta['eta']:g}"),
                      Path(out_dir) / "trajectory", figures)
    return traj, eq, manifest


def _sweep_one(args):
    cfg, eta, out_dir, eq, figures = args
    try:
        traj, _, manifest = run_and_write(cfg, out_dir, eta=eta, equilibrium=eq, figures=figures)
        return eta, manifest["run"], (traj.times, traj.dist_l1), None
    except Exception as exc:  # reported per run, aggregated by the caller
        return eta, None, None, f"{type(exc).__name__}: {exc}"


def sweep(cfg, etas=DEFAULT_ETAS, out_dir="runs/sweep", jobs=None, figures=()):
    """Simulate each eta; write per-run outputs and ``summary.csv``.

    Returns ``(rows, failures)``; rows are in the order of ``etas``.
    """
    out_dir = Path(out_dir)
    eq = equilibrium_for(cfg)
    tasks = [(cfg, float(eta), out_dir / f"eta_{eta:g}", eq, figures) for eta in etas]
    jobs = jobs or min(len(tasks), os.cpu_count() or 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]

    rows, failures, series = [], [], {}
    for eta, summary, ser, err in results:
        if err is not None:
            failures.append((eta, err))
            rows.append([eta, "failed", float("nan"), float("nan"), float("nan")])
            continue
        series[f"eta={eta:g}"] = ser
        rows.append([eta, summary["status"], summary["terminal_dist_l1"],
                     summary["time_to_threshold"], summary["t_final"]])
    write_csv(out_dir / "summary.csv",
              ["eta", "status", "terminal_dist_l1", "time_to_threshold", "t_final"], rows)
    if figures and series:
        from .plotting import distance_figure, write_figures
        write_figures(lambda: distance_figure(series, f"{cfg.name}: eta sweep"),
                      out_dir / "sweep", figures)
    return rows, failures


def compare(cfg, eta=None, out_dir="runs/compare", figures=()):
    """Same scenario under i-logit and preference-consistent local decisions."""
    out_dir = Path(out_dir)
    eq = equilibrium_for(cfg)
    gamma = cfg.local_decision.get("gamma", 1.0)
    models = {"i_logit": ILogit(gamma), "preference_consistent": PreferenceConsistent()}
    trajs = {}
    summary_rows = []
    for name, ld in models.items():
        traj, _, manifest = run_and_write(cfg, out_dir / name, eta=eta, local_decision=ld,
                                          equilibrium=eq)
        trajs[name] = traj
        run = manifest["run"]
        summary_rows.append([name, run["status"], run["time_to_threshold"],
                             run["terminal_dist_l1"], run["t_final"]])

    a, b = trajs["i_logit"], trajs["preference_consistent"]
    n = min(len(a), len(b))
    n = int(np.argmin(np.append(a.times[:n] == b.times[:n], False)))
    write_csv(out_dir / "comparison.csv",
              ["t", "dist_l1_i_logit", "dist_l1_preference_consistent"],
              zip(a.times[:n], a.dist_l1[:n], b.dist_l1[:n]))
    write_csv(out_dir / "compare_summary.csv",
              ["local_decision", "status", "time_to_threshold", "terminal_dist_l1", "t_final"],
              summary_rows)
    if figures:
        from .plotting import distance_figure, write_figures
        series = {"i-logit": (a.times, a.dist_l1), "preference-consistent": (b.times, b.dist_l1)}
        label = cfg.eta if eta is None else eta
        write_figures(lambda: distance_figure(series, f"{cfg.name}, eta={label:g}"),
                      out_dir / "comparison", figures)
    return {name: row for name, *row in summary_rows}, trajs


def assumption_checks(cfg, samples: int = 100, seed: int = 0) -> dict:
    """Spot checks of local-decision consistency and cooperativity."""
    rng = np.random.default_rng(seed)
    ldm = cfg.local_decision_model()
    net, A, cap = cfg.network, cfg.paths.incidence, cfg.congestion_model.capacity
    nodes = [v for v in range(net.node_count) if net.out_links[v]]
    worst_consistency = 0.0
    worst_coop = np.inf
    for _ in range(samples):
        pi = rng.dirichlet(np.ones(len(cfg.paths)))
        f_pref = A @ pi
        v = nodes[rng.integers(len(nodes))]
        out = list(net.out_links[v])
        if f_pref[out].sum() > 0:
            worst_consistency = max(worst_consistency, consistency_residual(ldm, f_pref[out]))
        f_out = rng.uniform(0.0, cap[out])
        if len(out) > 1:
            worst_coop = min(worst_coop, cooperativity_margin(ldm, f_out, f_pref[out]))
    return {
        "consistency_max_residual": worst_consistency,
        "consistency_ok": worst_consistency <= 1e-10,
        "cooperativity_min_cross_derivative": float(worst_coop),
        "cooperativity_ok": worst_coop >= -1e-8,
    }


def equilibrium_report_rows(cfg, eq):
    rows = [["path", name, "pi_h", eq.pi_h[i]] for i, name in enumerate(cfg.paths.names)]
    for e, name in enumerate(cfg.network.link_names):
        rows.append(["link", name, "f_h", eq.f_h[e]])
        rows.append(["link", name, "rho_h", eq.rho_h[e]])
    rows += [
        ["summary", "", "potential", eq.potential_value],
        ["summary", "", "fixed_point_residual", eq.fixed_point_residual],
        ["summary", "", "wardrop_gap", eq.wardrop_gap],
        ["summary", "", "iterations", eq.iterations],
        ["summary", "", "min_cut", eq.info["min_cut"]],
    ]
    return rows


__all__ = ["DEFAULT_ETAS", "THRESHOLD", "assumption_checks", "compare", "equilibrium_for",
           "equilibrium_report_rows", "fmt", "run", "run_and_write", "sweep",
           "time_to_threshold"]
