"""Lyapunov functions and distances monitored along trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch


@dataclass(frozen=True)
class LyapunovConfig:
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")

    def link_weights(self, net):
        """``alpha**v`` for each link, ``v`` its (topologically relabeled) tail."""
        return self.alpha ** net.tail.astype(float)


def lyapunov_V(net, lc: LyapunovConfig, f, f_pref):
    """Node-depth weighted l1 distance between actual and preference flows.

    Accepts single vectors or stacks with links along the last axis.
    """
    return np.abs(np.asarray(f) - np.asarray(f_pref)) @ lc.link_weights(net)


def lyapunov_W(net, congestion, lc: LyapunovConfig, rho, pi, incidence):
    """Density counterpart of ``lyapunov_V``, against ``mu^-1(A pi)``."""
    rho_pref = congestion.density_of_flow(np.asarray(pi) @ incidence.T)
    return np.abs(np.asarray(rho) - rho_pref) @ lc.link_weights(net)


def _check(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1:] != y.shape[-1:]:
        raise LengthMismatch(f"lengths differ: {x.shape} vs {y.shape}")
    return x - y


def distance_l1(x, y):
    return np.abs(_check(x, y)).sum(axis=-1)


def distance_l2(x, y):
    return np.sqrt(np.square(_check(x, y)).sum(axis=-1))


def time_to_threshold(times, values, threshold: float) -> float:
    """First time ``values`` reaches ``threshold``, linear between samples.

    ``nan`` if the series never gets there.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    hit = np.flatnonzero(values <= threshold)
    if hit.size == 0:
        return float("nan")
    k = hit[0]
    if k == 0:
        return float(times[0])
    t0, t1 = times[k - 1], times[k]
    v0, v1 = values[k - 1], values[k]
    return float(t0 + (v0 - threshold) * (t1 - t0) / (v0 - v1))
