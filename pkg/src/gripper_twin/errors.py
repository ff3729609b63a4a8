"""Exception hierarchy shared across the toolkit."""


class GripperTwinError(Exception):
    """Base class for all toolkit errors."""


class ModelError(GripperTwinError):
    """Invalid definition or arguments: bad dimensions, out-of-range values."""


class ValidityError(GripperTwinError):
    """A state or solution left the region the model can represent."""


class IntegrationError(GripperTwinError):
    """Time integration diverged (NaN or runaway state).

    Carries the simulated time at which the failure was detected.
    """

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ConvergenceError(GripperTwinError):
    """An iterative solver exhausted its budget without converging."""


class VisionError(GripperTwinError):
    """A stage of the image pipeline failed.

    ``stage`` names the failing step (mask, contour, split, peaks, angles,
    tracking) so callers can report where the pipeline broke.
    """

    def __init__(self, message, stage):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ObjectiveError(GripperTwinError):
    """The optimizer's objective raised or returned an unusable value."""

    def __init__(self, message, particle=None, iteration=None):
        super().__init__(message)
        self.particle = particle
        self.iteration = iteration


class StageOrderError(GripperTwinError):
    """A calibration stage was run before its prerequisite stages."""
