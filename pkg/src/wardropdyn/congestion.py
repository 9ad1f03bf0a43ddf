"""Link congestion laws: flow-density functions and the induced delays."""

from __future__ import annotations

from abc import ABC, abstractmethod
from functools import lru_cache

import numpy as np

from .errors import FlowAtOrAboveCapacity, NegativeDensity

GAUSS_NODES = 64
TINY_FLOW = 1e-12


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    # mapped to [0, 1]
    return 0.5 * (x + 1.0), 0.5 * w


class CongestionModel(ABC):
    """Per-link flow-density law ``mu_e`` with everything derived from it.

    Methods operate on whole link vectors, or on a single link when ``link``
    is given. Subclasses supply ``mu``, its inverse, its derivative and the
    capacities; the delay and its integral are derived here.
    """

    family = "abstract"

    @property
    @abstractmethod
    def capacity(self) -> np.ndarray: ...

    @abstractmethod
    def _flow(self, rho, link): ...

    @abstractmethod
    def _density(self, f, link): ...

    @abstractmethod
    def _derivative(self, rho, link): ...

    def _cap(self, link):
        return self.capacity if link is None else self.capacity[link]

    def flow_of_density(self, rho, link=None):
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise NegativeDensity(f"density must be >= 0, got {rho}")
        return self._flow(rho, link)

    def density_of_flow(self, f, link=None):
        f = np.asarray(f, dtype=float)
        if np.any(f < 0):
            raise ValueError(f"flow must be >= 0, got {f}")
        if np.any(f >= self._cap(link)):
            raise FlowAtOrAboveCapacity(f"flow {f} not below capacity {self._cap(link)}")
        return self._density(f, link)

    def flow_derivative(self, rho, link=None):
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise NegativeDensity(f"density must be >= 0, got {rho}")
        return self._derivative(rho, link)

    def free_flow_delay(self, link=None):
        return 1.0 / self._derivative(np.zeros_like(self._cap(link)), link)

    def delay(self, f, link=None):
        """Traversal time ``mu^-1(f) / f``; ``+inf`` at or above capacity."""
        f = np.asarray(f, dtype=float)
        cap = np.broadcast_to(self._cap(link), f.shape)
        t0 = np.broadcast_to(self.free_flow_delay(link), f.shape)
        out = np.array(t0, dtype=float)
        over = f >= cap
        mid = (f >= TINY_FLOW) & ~over
        if np.any(mid):
            out[mid] = self._delay_mid(f[mid], self._index(link, f.shape)[mid])
        out[over] = np.inf
        return out if out.ndim else float(out)

    def _delay_mid(self, f, link):
        return self._density(f, link) / f

    def delay_of_density(self, rho, link=None):
        """Same as ``delay(flow_of_density(rho))`` but finite for every finite rho.

        Avoids the flow rounding up to capacity at very large densities.
        """
        rho = np.asarray(rho, dtype=float)
        f = self._flow(rho, link)
        t0 = np.broadcast_to(self.free_flow_delay(link), rho.shape)
        safe = np.where(f >= TINY_FLOW, f, 1.0)
        return np.where(f >= TINY_FLOW, rho / safe, t0)

    def beckmann(self, f, link=None):
        """``integral_0^f T(s) ds`` per link, by fixed Gauss-Legendre quadrature."""
        f = np.asarray(f, dtype=float)
        if np.any(f >= self._cap(link)):
            raise FlowAtOrAboveCapacity("Beckmann integral diverges at capacity")
        x, w = _gauss_legendre(GAUSS_NODES)
        s = np.multiply.outer(f, x)
        idx = np.broadcast_to(self._index(link, f.shape)[..., None], s.shape)
        vals = self.delay(s.ravel(), idx.ravel()).reshape(s.shape)
        out = f * (vals @ w)
        return out if out.ndim else float(out)

    def _index(self, link, shape):
        if link is None:
            return np.broadcast_to(np.arange(self.capacity.size), shape)
        return np.broadcast_to(np.asarray(link), shape)


class ExponentialCongestion(CongestionModel):
    """``mu(rho) = C (1 - exp(-theta rho))``."""

    family = "exponential"

    def __init__(self, capacity, theta):
        capacity = np.array(capacity, dtype=float, ndmin=1)
        theta = np.array(theta, dtype=float, ndmin=1)
        if capacity.shape != theta.shape:
            raise ValueError("capacity and theta must have one entry per link")
        if np.any(~(capacity > 0)) or np.any(~np.isfinite(capacity)):
            raise ValueError("exponential family needs finite capacities > 0")
        if np.any(~(theta > 0)):
            raise ValueError("theta must be > 0")
        capacity.flags.writeable = False
        theta.flags.writeable = False
        self._capacity = capacity
        self.theta = theta

    @property
    def capacity(self):
        return self._capacity

    def _th(self, link):
        return self.theta if link is None else self.theta[link]

    def _flow(self, rho, link):
        return -self._cap(link) * np.expm1(-self._th(link) * rho)

    def _density(self, f, link):
        return -np.log1p(-f / self._cap(link)) / self._th(link)

    def _derivative(self, rho, link):
        return self._cap(link) * self._th(link) * np.exp(-self._th(link) * rho)

    def _delay_mid(self, f, link):
        C = self._cap(link)
        th = self._th(link)
        # log(C / (C - f)) in log space, exact near capacity
        return -np.log1p(-f / C) / (th * f)

    def __repr__(self):
        return f"ExponentialCongestion(capacity={self._capacity.tolist()}, theta={self.theta.tolist()})"
