"""Perturbed Wardrop equilibrium as the minimizer of a convex potential."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .choice import is_preference, path_delays, perturbed_best_response
from .errors import Infeasible, InfeasiblePreference, NotConverged
from .graph import feasible_preference, min_cut_capacity

DEFAULT_TOL = 1e-10
USED_THRESHOLD = 1e-6
MIN_DAMPING = 1e-14


@dataclass
class EquilibriumResult:
    pi_h: np.ndarray
    f_h: np.ndarray
    rho_h: np.ndarray
    potential_value: float
    fixed_point_residual: float
    wardrop_gap: float
    iterations: int
    solver: str
    info: dict = field(default_factory=dict)


def _feasible(A, congestion, pi) -> bool:
    return bool(np.all(A @ pi < congestion.capacity))


def potential(A, congestion, pbr, pi) -> float:
    """Beckmann integral of the induced flow plus the entropy perturbation."""
    pi = np.asarray(pi, dtype=float)
    if not is_preference(pi) or not _feasible(A, congestion, pi):
        raise InfeasiblePreference("preference is off the simplex or saturates a link")
    return float(congestion.beckmann(A @ pi).sum() + pbr.perturbation(pi))


def potential_gradient(A, congestion, pbr, pi):
    return path_delays(A, congestion, A @ pi) + pbr.perturbation_gradient(pi)


def best_response_map(A, congestion, pbr, pi):
    """``F(A pi)``: the perturbed best response to the preference's own flow."""
    return perturbed_best_response(pbr, path_delays(A, congestion, A @ pi))


def wardrop_gap(A, congestion, pi, used_threshold: float = USED_THRESHOLD) -> float:
    """Largest excess delay of a used path over the fastest path."""
    pi = np.asarray(pi, dtype=float)
    d = path_delays(A, congestion, A @ pi)
    used = pi > used_threshold
    return float(np.max(d[used]) - np.min(d))


def _start(net, paths, congestion, pi0):
    A = paths.incidence
    if pi0 is not None:
        pi0 = np.asarray(pi0, dtype=float)
        if not _feasible(A, congestion, pi0):
            raise InfeasiblePreference("initial preference saturates a link")
        return pi0
    uniform = np.full(len(paths), 1.0 / len(paths))
    if _feasible(A, congestion, uniform):
        return uniform
    base = feasible_preference(net, paths, congestion.capacity)
    # pull toward the interior while keeping the flow below capacity
    mix = 0.5
    while mix > 1e-12:
        pi = (1 - mix) * base + mix * uniform
        if _feasible(A, congestion, pi):
            return pi
        mix *= 0.5
    return base


def solve_equilibrium(
    net,
    paths,
    congestion,
    pbr,
    method: str = "fixed_point",
    tol: float = DEFAULT_TOL,
    damping: float = 0.5,
    step: float = 0.1,
    max_iters: int | None = None,
    pi0=None,
    used_threshold: float = USED_THRESHOLD,
) -> EquilibriumResult:
    """Find ``pi_h`` with ``||F(A pi_h) - pi_h||_1 <= tol``.

    ``fixed_point`` iterates ``pi <- (1-s) pi + s F(A pi)``, halving ``s``
    whenever the residual fails to drop. ``mirror_descent`` takes
    multiplicative-weights steps on the potential, halving the step only
    when an iterate would saturate a link.
    """
    cstar = min_cut_capacity(net, congestion.capacity)
    if cstar <= 1.0:
        raise Infeasible(cstar)
    A = paths.incidence
    pi = _start(net, paths, congestion, pi0)

    if method == "fixed_point":
        if not 0 < damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        max_iters = 10**6 if max_iters is None else max_iters
        pi, res, it, info = _fixed_point(A, congestion, pbr, pi, tol, damping, max_iters)
    elif method == "mirror_descent":
        if not step > 0:
            raise ValueError("step must be > 0")
        max_iters = 10**5 if max_iters is None else max_iters
        pi, res, it, info = _mirror_descent(A, congestion, pbr, pi, tol, step, max_iters)
    else:
        raise ValueError(f"unknown solver {method!r}")

    f_h = A @ pi
    return EquilibriumResult(
        pi_h=pi,
        f_h=f_h,
        rho_h=congestion.density_of_flow(f_h),
        potential_value=potential(A, congestion, pbr, pi),
        fixed_point_residual=res,
        wardrop_gap=wardrop_gap(A, congestion, pi, used_threshold),
        iterations=it,
        solver=method,
        info={"min_cut": cstar, "tol": tol, **info},
    )


def _fixed_point(A, congestion, pbr, pi, tol, damping, max_iters):
    F = best_response_map(A, congestion, pbr, pi)
    res = np.abs(F - pi).sum()
    s = damping
    it = 0
    while res > tol:
        if it >= max_iters or s < MIN_DAMPING:
            raise NotConverged(it, res)
        it += 1
        cand = (1.0 - s) * pi + s * F
        cand /= cand.sum()
        if _feasible(A, congestion, cand):
            Fc = best_response_map(A, congestion, pbr, cand)
            rc = np.abs(Fc - cand).sum()
            if rc < res:
                pi, F, res = cand, Fc, rc
                s = min(damping, 1.25 * s)
                continue
        s *= 0.5
    return pi, float(res), it, {"damping": damping, "final_damping": s}


def _mirror_descent(A, congestion, pbr, pi, tol, step, max_iters):
    eta = step
    it = 0
    F = best_response_map(A, congestion, pbr, pi)
    res = np.abs(F - pi).sum()
    while res > tol:
        if it >= max_iters or eta < MIN_DAMPING:
            raise NotConverged(it, res)
        it += 1
        g = potential_gradient(A, congestion, pbr, pi)
        g = g - g.min()
        cand = pi * np.exp(-eta * g)
        cand /= cand.sum()
        if not _feasible(A, congestion, cand):
            eta *= 0.5
            continue
        pi = cand
        F = best_response_map(A, congestion, pbr, pi)
        res = np.abs(F - pi).sum()
    return pi, float(res), it, {"step": step, "final_step": eta}
