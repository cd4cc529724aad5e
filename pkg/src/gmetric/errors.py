"""Exception hierarchy.

Input problems derive from ``InputError`` (CLI exit code 2), numerical
breakdowns from ``NumericalError`` (exit code 3).
"""


class GMetricError(Exception):
    """Base class for every error raised by the package."""


class InputError(GMetricError, ValueError):
    pass


class NumericalError(GMetricError, ArithmeticError):
    pass


class DimensionMismatch(InputError):
    pass


class NonFinitePoint(InputError):
    pass


class EmptySampleSet(InputError):
    pass


class SequenceTooShort(InputError):
    pass


class EmptyRegion(InputError):
    pass


class BadWeights(InputError):
    pass


class NoAdmissibleConfigurations(InputError):
    """No sampled configuration satisfies the uniform-convexity filter."""


class AllSamplesDegenerate(InputError):
    pass


class InverseUnavailable(InputError):
    """A map has neither an explicit inverse nor a 1-D interval codomain."""


class OrbitTooShort(InputError):
    pass


class BudgetExhaustedWithoutRefinement(NumericalError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class InverseSolveFailed(NumericalError):
    def __init__(self, message, index=None, target=None, orbit=None):
        super().__init__(message)
        self.index = index
        self.target = target
        self.orbit = orbit


class RegionViolation(NumericalError):
    def __init__(self, message, index=None, point=None, orbit=None):
        super().__init__(message)
        self.index = index
        self.point = point
        self.orbit = orbit


class ConvergenceFailure(NumericalError):
    """The orbit did not reach the stopping rule.

    Carries the best phase-A iterate seen, its gap, and the orbit so far.
    """

    def __init__(self, message, best=None, final_gap=None, orbit=None):
        super().__init__(message)
        self.best = best
        self.final_gap = final_gap
        self.orbit = orbit


class MaxStepsExceeded(ConvergenceFailure):
    pass


class OrbitStalled(ConvergenceFailure):
    pass


# expression language

class ExprSyntaxError(InputError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class ExprDivisionByZero(NumericalError, ZeroDivisionError):
    pass


class UnboundRegionLabel(InputError):
    pass


# scenario files

class ScenarioError(InputError):
    pass


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    pass
