"""Exception types shared across the package."""


class PilotSimError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PilotSimError, ValueError):
    """An argument violates a documented precondition."""


class CapacityExceededError(PilotSimError):
    """A request asks for more cores than a site can ever provide."""


class RejectedSubmissionError(PilotSimError):
    """A pilot submission was refused by the site (concurrency cap)."""


class InvalidStateError(PilotSimError):
    """An operation was applied to an entity in the wrong lifecycle state."""


class InfeasiblePlanError(PilotSimError):
    """An execution plan can never complete the given workload."""


class UnschedulableError(PilotSimError):
    """A unit cannot fit on any pilot the plan can ever provide."""


class IncompleteTraceError(PilotSimError):
    """A trace is missing terminal records for one or more units."""
