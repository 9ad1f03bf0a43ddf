"""Route choice: global perturbed best response and local splitting rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllPathsInfiniteDelay, ZeroPreferenceOutflow

SIMPLEX_TOL = 1e-10


def is_preference(pi, tol: float = SIMPLEX_TOL) -> bool:
    pi = np.asarray(pi, dtype=float)
    return bool(pi.ndim == 1 and np.all(pi >= 0) and abs(pi.sum() - 1.0) <= tol)


def is_feasible(pi, incidence, capacity) -> bool:
    """Membership of ``pi`` in the feasible set: induced flow below capacity."""
    return is_preference(pi) and bool(np.all(incidence @ pi < capacity))


def path_delays(incidence, congestion, f):
    """Sum of link delays along each path; infinite if any link is saturated."""
    t = congestion.delay(np.asarray(f, dtype=float))
    blocked = np.isinf(t)
    d = incidence.T @ np.where(blocked, 0.0, t)
    if np.any(blocked):
        d[(incidence.T @ blocked) > 0] = np.inf
    return d


@dataclass(frozen=True)
class LogitResponse:
    """Logit perturbed best response with noise level ``beta``.

    It is the minimizer of expected delay plus the negative-entropy penalty
    ``beta^-1 sum w log w``.
    """

    beta: float
    kind = "logit"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")

    def __call__(self, delays):
        return perturbed_best_response(self, delays)

    def perturbation(self, pi) -> float:
        pi = np.asarray(pi, dtype=float)
        pos = pi > 0
        return float(np.sum(pi[pos] * np.log(pi[pos])) / self.beta)

    def perturbation_gradient(self, pi):
        return (np.log(np.maximum(pi, 1e-300)) + 1.0) / self.beta


def perturbed_best_response(pbr: LogitResponse, delays):
    delays = np.asarray(delays, dtype=float)
    finite = np.isfinite(delays)
    if not np.any(finite):
        raise AllPathsInfiniteDelay("every path crosses a saturated link")
    z = np.full(delays.shape, -np.inf)
    z[finite] = -pbr.beta * delays[finite]
    w = np.exp(z - z[finite].max())
    return w / w.sum()


@dataclass(frozen=True)
class ILogit:
    """Myopic split: preference flow tilted by ``exp(-gamma (f - f_pi))``."""

    gamma: float
    kind = "i_logit"

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def weights(self, f, f_pref):
        return f_pref * np.exp(-self.gamma * (f - f_pref))


@dataclass(frozen=True)
class PreferenceConsistent:
    """Split proportional to the preference flow, ignoring observed flow."""

    kind = "preference_consistent"

    def weights(self, f, f_pref):
        return f_pref


LocalDecisionModel = ILogit | PreferenceConsistent


def local_decision(ldm, f_out, f_pref_out):
    """Split probabilities over the outgoing links of one node."""
    f_out = np.asarray(f_out, dtype=float)
    f_pref_out = np.asarray(f_pref_out, dtype=float)
    if f_out.shape != f_pref_out.shape:
        raise ValueError("observed and preference flows must have the same length")
    if np.any(f_out < 0) or np.any(f_pref_out < 0):
        raise ValueError("flows must be nonnegative")
    if not f_pref_out.sum() > 0:
        raise ZeroPreferenceOutflow("no preference flow leaves this node")
    if isinstance(ldm, ILogit):
        # exponent shift cancels in the ratio
        x = -ldm.gamma * (f_out - f_pref_out)
        w = f_pref_out * np.exp(x - x.max())
    else:
        w = ldm.weights(f_out, f_pref_out)
    return w / w.sum()


def make_best_response(spec: dict) -> LogitResponse:
    kind = spec.get("kind", "logit")
    if kind != "logit":
        raise ValueError(f"unknown best response kind {kind!r}")
    return LogitResponse(beta=float(spec["beta"]))


def make_local_decision(spec: dict):
    kind = spec.get("kind")
    if kind == "i_logit":
        return ILogit(gamma=float(spec["gamma"]))
    if kind == "preference_consistent":
        return PreferenceConsistent()
    raise ValueError(f"unknown local decision kind {kind!r}")


def consistency_residual(ldm, f_pref_out) -> float:
    """Largest violation of ``(sum f_pi) G(f_pi) = f_pi`` at one node."""
    f_pref_out = np.asarray(f_pref_out, dtype=float)
    G = local_decision(ldm, f_pref_out, f_pref_out)
    return float(np.max(np.abs(f_pref_out.sum() * G - f_pref_out)))


def cooperativity_margin(ldm, f_out, f_pref_out, h: float = 1e-6) -> float:
    """Smallest cross-derivative ``dG_j/df_e`` (j != e), by central differences."""
    f_out = np.asarray(f_out, dtype=float)
    k = f_out.size
    worst = np.inf
    for e in range(k):
        step = np.zeros(k)
        step[e] = h
        lo = f_out - step
        lo[e] = max(lo[e], 0.0)
        hi = f_out + step
        dG = (local_decision(ldm, hi, f_pref_out) - local_decision(ldm, lo, f_pref_out)) / (hi[e] - lo[e])
        others = np.delete(dG, e)
        if others.size:
            worst = min(worst, float(others.min()))
    return worst
