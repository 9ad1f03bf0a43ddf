"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class WardropDynError(Exception):
    """Base class for every error raised by the package."""


# --- network -------------------------------------------------------------


class NetworkError(WardropDynError, ValueError):
    pass


class CycleDetected(NetworkError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"directed cycle through nodes {self.nodes}")


class MultipleOrigins(NetworkError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"expected exactly one node without incoming links, found {self.nodes}")


class MultipleDestinations(NetworkError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"expected exactly one node without outgoing links, found {self.nodes}")


class UnreachableNode(NetworkError):
    def __init__(self, nodes, reason: str):
        self.nodes = list(nodes)
        super().__init__(f"nodes {self.nodes} {reason}")


class PathExplosion(NetworkError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"more than {cap} origin-destination paths")


# --- congestion ----------------------------------------------------------


class NegativeDensity(WardropDynError, ValueError):
    pass


class FlowAtOrAboveCapacity(WardropDynError, ValueError):
    pass


# --- choice --------------------------------------------------------------


class AllPathsInfiniteDelay(WardropDynError, ArithmeticError):
    pass


class ZeroPreferenceOutflow(WardropDynError, ArithmeticError):
    pass


# --- dynamics ------------------------------------------------------------


class NumericalBlowup(WardropDynError, ArithmeticError):
    def __init__(self, t: float, message: str):
        self.t = t
        super().__init__(f"t={t:.6g}: {message}")


class StepRejected(WardropDynError, ArithmeticError):
    pass


# --- equilibrium ---------------------------------------------------------


class InfeasiblePreference(WardropDynError, ValueError):
    pass


class Infeasible(WardropDynError, ValueError):
    def __init__(self, min_cut: float):
        self.min_cut = min_cut
        super().__init__(f"min-cut capacity C* = {min_cut:.12g} <= 1: no feasible preference exists")


class NotConverged(WardropDynError, RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")


# --- diagnostics / scenario ----------------------------------------------


class LengthMismatch(WardropDynError, ValueError):
    pass


class ParseError(WardropDynError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(WardropDynError, ValueError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
