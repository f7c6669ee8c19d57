"""Exception types shared across the package."""


class ImpulseFlowError(Exception):
    """Base class for all library errors."""


class ConfigurationError(ImpulseFlowError):
    """Invalid problem data, control schedule, or solver configuration."""


class ControlRangeError(ConfigurationError):
    """A control evaluator returned a value outside its admissible set."""


class DomainEvaluationError(ImpulseFlowError):
    """A field or Jacobian evaluator failed (or returned non-finite values).

    Carries the offending point so audits can report where the domain
    assumption broke down.
    """

    def __init__(self, point, detail=""):
        self.point = point
        msg = f"evaluator failed at {point!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class IntegrationError(ImpulseFlowError):
    """Base class for failures of the adaptive integrator."""


class StepSizeCollapseError(IntegrationError):
    def __init__(self, t, detail=""):
        self.t = t
        super().__init__(f"step size underflow at t={t!r}" + (f" ({detail})" if detail else ""))


class MaxStepsExceededError(IntegrationError):
    def __init__(self, t, max_steps):
        self.t = t
        self.max_steps = max_steps
        super().__init__(f"exceeded {max_steps} steps at t={t!r}")


class NonFiniteStateError(IntegrationError):
    def __init__(self, t):
        self.t = t
        super().__init__(f"state became non-finite at t={t!r}")


class CompletenessError(ImpulseFlowError):
    """A field flow could not be continued to the requested time.

    Signals a suspect completeness assumption for the impulse fields.
    ``escape_time`` is the flow time reached before failure.
    """

    def __init__(self, field_index, escape_time, detail=""):
        self.field_index = field_index
        self.escape_time = escape_time
        msg = f"flow of field {field_index} failed at flow time {escape_time!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class CommutativityWarning(UserWarning):
    """Emitted when a solve proceeds on a system whose fields may not commute."""
