"""Coupled slow preference / fast density dynamics and their integration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .choice import PreferenceConsistent, path_delays, perturbed_best_response
from .diagnostics import LyapunovConfig
from .errors import NumericalBlowup, StepRejected

SIMPLEX_DRIFT = 1e-12
DEFAULT_CEILING = 1e6


def default_dt(eta: float) -> float:
    return min(0.01, 0.1 / max(1.0, eta))


@dataclass(frozen=True)
class SystemState:
    rho: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        object.__setattr__(self, "pi", np.asarray(self.pi, dtype=float))


class CoupledSystem:
    """Right-hand side of the two-time-scale system in ``(rho, pi)``.

    The network, path set and models are treated as read-only; one instance
    can drive any number of runs.
    """

    def __init__(self, net, paths, congestion, best_response, local_decision, eta: float):
        if eta < 0:
            raise ValueError(f"eta must be >= 0, got {eta}")
        self.net = net
        self.paths = paths
        self.congestion = congestion
        self.best_response = best_response
        self.local_decision = local_decision
        self.eta = float(eta)

        self.A = paths.incidence
        self.AT = np.ascontiguousarray(paths.incidence.T)
        tail, head = net.tail, net.head
        # same_tail[e, j]: j leaves the node e leaves; feeds[e, j]: j enters it
        self._same_tail = (tail[:, None] == tail[None, :]).astype(float)
        self._feeds = (head[None, :] == tail[:, None]).astype(float)
        self._from_origin = tail == net.origin
        self._out_degree = self._same_tail.sum(axis=1)
        self._consistent = isinstance(local_decision, PreferenceConsistent)

    @property
    def n_links(self) -> int:
        return self.net.link_count

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    def with_eta(self, eta: float) -> "CoupledSystem":
        return CoupledSystem(self.net, self.paths, self.congestion, self.best_response,
                             self.local_decision, eta)

    def preference_flow(self, pi):
        return self.A @ pi

    def split(self, f, f_pref):
        """Local decision for every link at once, uniform where no preference flow leaves."""
        w = f_pref if self._consistent else self.local_decision.weights(f, f_pref)
        total = self._same_tail @ w
        empty = total <= 0
        if np.any(empty):
            return np.where(empty, 1.0 / self._out_degree, w / np.where(empty, 1.0, total))
        return w / total

    def fast_rhs(self, f, pi):
        """Density derivative from mass conservation at each node."""
        f = np.asarray(f, dtype=float)
        G = self.split(f, self.A @ pi)
        inflow = np.where(self._from_origin, 1.0, self._feeds @ f)
        return inflow * G - f

    def slow_rhs(self, f, pi):
        """Preference derivative ``eta (F(f) - pi)`` with delays taken from flows."""
        F = perturbed_best_response(self.best_response, path_delays(self.A, self.congestion, f))
        return self.eta * (F - pi)

    def rhs(self, rho, pi):
        cg = self.congestion
        f = cg._flow(rho, None)
        # delay from density stays finite when the flow rounds up to capacity
        d = self.AT @ cg.delay_of_density(rho)
        z = -self.best_response.beta * d
        w = np.exp(z - z.max())
        dpi = self.eta * (w / w.sum() - pi)
        return self.fast_rhs(f, pi), dpi

    # --- integration ------------------------------------------------------

    def _rk4(self, rho, pi, dt):
        k1r, k1p = self.rhs(rho, pi)
        h = 0.5 * dt
        k2r, k2p = self.rhs(rho + h * k1r, pi + h * k1p)
        k3r, k3p = self.rhs(rho + h * k2r, pi + h * k2p)
        k4r, k4p = self.rhs(rho + dt * k3r, pi + dt * k3p)
        c = dt / 6.0
        rho_new = rho + c * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        pi_new = pi + c * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        rate = max(np.abs(k1r).max(), np.abs(k1p).max())
        return rho_new, pi_new, rate

    @staticmethod
    def _project(rho, pi):
        rho = np.maximum(rho, 0.0)
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > SIMPLEX_DRIFT:
            pi = np.maximum(pi, 0.0)
            pi = pi / pi.sum()
        return rho, pi

    def step(self, state: SystemState, dt: float) -> SystemState:
        """One classical RK4 step followed by the positivity/simplex guard."""
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        rho, pi, _ = self._rk4(state.rho, state.pi, dt)
        return SystemState(*self._project(rho, pi))


@dataclass
class Trajectory:
    times: np.ndarray
    rho: np.ndarray
    pi: np.ndarray
    f: np.ndarray
    f_pref: np.ndarray
    V: np.ndarray
    W: np.ndarray
    dist_l1: np.ndarray
    status: str
    link_names: tuple[str, ...]
    path_names: tuple[str, ...]
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def states(self) -> list[SystemState]:
        return [SystemState(r, p) for r, p in zip(self.rho, self.pi)]

    @property
    def final(self) -> SystemState:
        return SystemState(self.rho[-1], self.pi[-1])


def _derived(system: CoupledSystem, rho, pi, rho_ref, lc):
    cg = system.congestion
    f = cg._flow(rho, None)
    f_pref = pi @ system.AT
    weights = lc.link_weights(system.net)
    V = np.abs(f - f_pref) @ weights
    ok = f_pref < cg.capacity
    rho_pref = np.where(ok, cg._density(np.where(ok, f_pref, 0.0), None), np.inf)
    W = np.abs(rho - rho_pref) @ weights
    if rho_ref is None:
        dist = np.full(len(rho), np.nan)
    else:
        dist = np.abs(rho - rho_ref).sum(axis=1)
    return f, f_pref, V, W, dist


def simulate(
    system: CoupledSystem,
    initial: SystemState,
    t_end: float,
    dt: float | None = None,
    stride: int = 10,
    rho_ref=None,
    convergence_tol: float = 1e-6,
    ceiling: float = DEFAULT_CEILING,
    stall_tol: float = 1e-12,
    growth_tol: float = 1e-3,
    adaptive: bool = False,
    atol: float = 1e-8,
    lyapunov: LyapunovConfig | None = None,
) -> Trajectory:
    """Integrate from ``initial`` up to ``t_end``.

    Ends early with status ``converged`` once ``||rho - rho_ref||_1`` drops
    below ``convergence_tol`` (or ``stalled`` when no reference is given and
    the state stops moving). A run that reaches ``t_end`` is ``completed``,
    or ``diverging`` if the total density still grows over its second half
    at a rate above ``growth_tol``. Raises ``NumericalBlowup`` when a
    density passes ``ceiling`` or the state stops being finite.
    """
    if not t_end > 0:
        raise ValueError("t_end must be > 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if dt is None:
        dt = default_dt(system.eta)
    if not dt > 0:
        raise ValueError("dt must be > 0")
    lc = lyapunov or LyapunovConfig()
    if rho_ref is not None:
        rho_ref = np.asarray(rho_ref, dtype=float)

    rho = initial.rho.astype(float).copy()
    pi = initial.pi.astype(float).copy()
    times, rhos, pis = [0.0], [rho.copy()], [pi.copy()]
    status = "completed"
    t = 0.0
    k = 0
    rejected = 0

    def record(t):
        times.append(t)
        rhos.append(rho.copy())
        pis.append(pi.copy())

    if adaptive:
        h = dt
        h_min = dt * 1e-6
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    while True:
        if adaptive:
            if t >= t_end * (1 - 1e-12):
                break
            h = min(h, t_end - t)
            r1, p1, rate = system._rk4(rho, pi, h)
            rm, pm, _ = system._rk4(rho, pi, 0.5 * h)
            r2, p2, _ = system._rk4(rm, pm, 0.5 * h)
            err = max(np.abs(r2 - r1).max(), np.abs(p2 - p1).max())
            if not err <= atol:
                rejected += 1
                h *= 0.5
                if h < h_min:
                    raise StepRejected(f"step size fell below {h_min:.3g} at t={t:.6g}")
                continue
            rho, pi = system._project(r2, p2)
            t += h
            k += 1
            h *= min(2.0, 0.9 * (atol / err) ** 0.2) if err > 0 else 2.0
        else:
            if k >= n_steps:
                break
            rho, pi, rate = system._rk4(rho, pi, dt)
            rho, pi = system._project(rho, pi)
            k += 1
            t = k * dt

        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(pi))):
            raise NumericalBlowup(t, "state is no longer finite")
        if rho.max() > ceiling:
            e = int(rho.argmax())
            raise NumericalBlowup(
                t, f"density on {system.net.link_names[e]} exceeded {ceiling:g}")
        if rho_ref is not None:
            if np.abs(rho - rho_ref).sum() < convergence_tol:
                status = "converged"
                record(t)
                break
        elif rate < stall_tol:
            status = "stalled"
            record(t)
            break
        if k % stride == 0:
            record(t)

    if times[-1] != t:
        record(t)

    times = np.array(times)
    rho_s = np.array(rhos)
    pi_s = np.array(pis)
    if status == "completed":
        mass = rho_s.sum(axis=1)
        half = np.searchsorted(times, 0.5 * times[-1])
        tail = mass[half:]
        span = times[-1] - times[half]
        if span > 0 and tail.size > 1:
            growing = np.all(np.diff(tail) >= 0)
            if growing and (tail[-1] - tail[0]) / span > growth_tol:
                status = "diverging"

    f, f_pref, V, W, dist = _derived(system, rho_s, pi_s, rho_ref, lc)
    info = {"dt": dt, "steps": k, "adaptive": adaptive, "rejected_steps": rejected,
            "t_final": float(t)}
    return Trajectory(times, rho_s, pi_s, f, f_pref, V, W, dist, status,
                      system.net.link_names, tuple(system.paths.names), info)
