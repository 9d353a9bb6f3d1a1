"""Exception hierarchy shared across the navigation stack."""


class NavError(Exception):
    """Base class for every error raised by this package."""


class InputError(NavError, ValueError):
    """Arguments violate an operation's preconditions."""


class SchemaError(InputError):
    """A scene/suite/transcript document failed validation.

    ``violations`` lists every problem found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid document")


class ContractViolation(NavError):
    """An internal contract was broken by the caller (e.g. un-rewritten Enter/Exit)."""


class NoNavigableArea(NavError):
    pass


class EmptyProjection(NavError):
    """A judged direction's sector contains no navigable cell."""

    def __init__(self, direction_id: int):
        self.direction_id = direction_id
        super().__init__(f"direction {direction_id} has no navigable cells in view")


class Unreachable(NavError):
    pass


class ParseError(NavError):
    """A backend reply could not be parsed. ``raw`` keeps the text for retries."""

    def __init__(self, message: str, raw: str = ""):
        self.raw = raw
        super().__init__(message)


class PlannerFailure(NavError):
    """Repeated unparseable replies; the episode is aborted."""


class PlannerUnavailable(NavError):
    """The backend could not be reached after transport retries."""


class TransportError(PlannerUnavailable):
    pass


class ProtocolError(NavError):
    """The endpoint answered with a body that is not a chat completion."""


class ReplayMiss(NavError):
    """A replayed request has no recorded response."""


class CallBudgetExceeded(NavError):
    pass
