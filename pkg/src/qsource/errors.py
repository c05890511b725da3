"""Exceptions and status codes shared across the package."""

from __future__ import annotations

import enum


class QSourceError(Exception):
    """Base class for all package errors."""


class ContractViolation(QSourceError):
    """An operation was called outside its contract (wrong representation, bad tag)."""


class GridMismatch(QSourceError):
    """Two objects live on incompatible grids or spaces."""


class StepTooCoarse(QSourceError):
    """Time step too large for the implicit Volterra diagonal or the rank-one substep."""


class BoxTooSmall(QSourceError):
    """Boundary-band mass exceeded the guard threshold (ABORTED_BOX_TOO_SMALL)."""


class QuadratureError(QSourceError):
    """A quadrature failed to reach its target accuracy within budget."""


class ContourUnresolved(QSourceError):
    """Winding contour could not be separated from a zero after perturbation."""


class ValidationError(QSourceError):
    """Scenario configuration failed validation."""


class Regime(enum.Enum):
    BOUNDED = "BOUNDED"
    SUBLINEAR = "SUBLINEAR"
    LINEAR = "LINEAR"
    EXPONENTIAL = "EXPONENTIAL"
    INDETERMINATE = "INDETERMINATE"


class TauStatus(enum.Enum):
    CONVERGED = "CONVERGED"
    DIVERGENT = "DIVERGENT"
    INDETERMINATE = "INDETERMINATE"
