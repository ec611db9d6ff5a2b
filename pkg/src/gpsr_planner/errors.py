"""Exception types shared across the planner package."""


class PlannerError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(PlannerError):
    """A structured document is malformed or carries an unsupported schema."""


class DanglingReferenceError(SchemaError):
    """A document references a room, location, or entity that is not defined."""


class EmptyBankError(PlannerError):
    """No templates or examples are available for the requested category."""


class BudgetExceededError(PlannerError):
    """The fixed prompt blocks alone exceed the configured token budget."""


class InvalidInputError(PlannerError):
    """An operation was called with input violating its preconditions."""


class TransportError(PlannerError):
    """A chat-completion request failed at the transport level."""


class BackendTimeoutError(TransportError):
    """A chat-completion request timed out."""


class ReplayMissError(PlannerError):
    """The replay transcript has no record for the request digest."""


class ScriptExhaustedError(PlannerError):
    """A scripted mock backend ran out of scripted turns."""


class BackendUnavailableError(PlannerError):
    """Transport retries were exhausted; distinct from an unparseable command."""


class InvalidPlanError(PlannerError):
    """The plan failed static validation and cannot be compiled."""


class UsageError(PlannerError):
    """The command line was used incorrectly."""
