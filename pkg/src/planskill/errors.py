"""Exception types shared across the package."""


class PlanskillError(Exception):
    """Base class for all package errors."""


class ParseError(PlanskillError):
    """Malformed demo file line."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SchemaError(PlanskillError):
    """Data does not match a registered object type schema."""


class DimensionMismatch(PlanskillError):
    """Vector length incompatible with the feature kind."""


class UnknownEnv(PlanskillError):
    """Environment name not registered with the simulator."""


class ObjectSetMismatch(PlanskillError):
    """State object set differs from the task's object set."""


class ExpertFailure(PlanskillError):
    """Scripted expert did not reach the goal within its step budget."""


class TypeMismatch(PlanskillError):
    """Predicate arguments have the wrong object types."""


class NotApplicable(PlanskillError):
    """Grounded operator preconditions not satisfied."""


class NoMatch(PlanskillError):
    """No induced operator explains an abstract transition."""


class AmbiguousMatch(PlanskillError):
    """More than one grounded operator explains an abstract transition."""


class NoFeasibleAbstraction(PlanskillError):
    """No beam member satisfies the demo-optimality constraint."""


class BudgetExhausted(PlanskillError):
    """Planner node budget exhausted before the search finished."""


class EmptyGoal(PlanskillError):
    """Goal-sample abstraction intersection is empty."""


class PddlSyntaxError(PlanskillError):
    """Malformed PDDL input."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"offset {position}: {message}"
        super().__init__(message)
        self.position = position


class UnsupportedFeature(PlanskillError):
    """PDDL feature outside the supported STRIPS subset."""


class NameCollision(PlanskillError):
    """Duplicate predicate or operator name during PDDL emission."""


class InsufficientData(PlanskillError):
    """Not enough samples to train a model."""


class SkillTimeout(PlanskillError):
    """Skill did not satisfy its operator effects within max_steps."""


class PreconditionViolated(PlanskillError):
    """Skill invoked in a state where its operator is not applicable."""
