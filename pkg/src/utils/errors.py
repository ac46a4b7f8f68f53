"""Exception hierarchy shared by every solver stage.

The CLI maps these onto exit codes (see main.py): configuration and domain
problems exit 2, non-convergence exits 3.
"""


class SolverError(Exception):
    """Base class for everything the solver raises on purpose."""


class DomainError(SolverError, ValueError):
    """An argument lies outside the domain of a primitive (theta, d, lambda, ...)."""


class ConfigError(SolverError, ValueError):
    """A scenario file or override is unreadable or violates a model invariant."""


class NoDefaultRisk(SolverError):
    """G(d|theta) is numerically 1, so collateral never changes hands."""


class OverRepaid(SolverError):
    """d * G(d|theta) > 1: breaking even would need negative collateral."""


class DegeneratePoolError(SolverError):
    """The conjectured pool carries less than 1e-12 probability mass."""


class AllUnfinanceable(SolverError):
    """No type on the menu grid admits a zero-profit bank contract."""


class MarketUnravels(SolverError):
    """No participation cutoff supports a feasible pooled market contract."""


class NoConvergence(SolverError):
    """A bracketed search exhausted its iteration budget."""


class NoFeasiblePoint(SolverError):
    """Every oracle grid point violates zero profit or the collateral cap."""
