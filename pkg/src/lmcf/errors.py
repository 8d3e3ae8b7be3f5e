"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class LmcfError(Exception):
    """Base class for numerical failures raised by this package."""


class DegenerateGeometryError(LmcfError, ValueError):
    """Mesh, frame or pullback is degenerate (zero edge, rank-deficient frame...)."""


class NotFMinimalError(LmcfError):
    """The base immersion is not a critical point of the f-volume within tolerance."""


class CFLViolation(LmcfError):
    """Explicit time step exceeds the stability bound dt <= c * h_min**2."""


class MeshDegenerationError(LmcfError):
    """An evolving mesh collapsed (an edge shrank below the allowed floor)."""


class ExpiredFlowError(LmcfError):
    """sigma(t) = 1 - c t is no longer positive, so the soliton flow is undefined."""


class SolverError(LmcfError):
    """An eigensolve did not reach the requested residual."""


class ScenarioError(LmcfError, ValueError):
    """Scenario configuration failed validation."""
