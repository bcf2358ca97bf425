"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SeamPlanError(Exception):
    """Base class for every error raised by seamplan."""


class InvalidInputError(SeamPlanError, ValueError):
    """An argument violates a documented precondition."""


class ModelDomainError(SeamPlanError, ValueError):
    """Inputs fall outside the region where the fitted error model is defined."""


class CatalogError(SeamPlanError, KeyError):
    """Unknown protocol name, or a malformed catalog entry."""


class DegenerateProtocolError(SeamPlanError, ValueError):
    """A distillation protocol has (numerically) zero success probability."""


class InvariantViolation(SeamPlanError, ValueError):
    """Inputs are mutually inconsistent (e.g. distillation increased the distance)."""


class ConvergenceError(SeamPlanError, RuntimeError):
    """The self-consistent iteration failed to reach a fixed point.

    The iterate history is attached as ``trace``.
    """

    def __init__(self, message: str, trace: list[int]):
        super().__init__(message)
        self.trace = trace
