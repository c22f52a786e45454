"""Exception hierarchy shared by every module."""


class MatchingError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(MatchingError, ValueError):
    pass


class RangeError(MatchingError, ValueError):
    pass


class BadDistribution(MatchingError, ValueError):
    pass


class Infeasible(MatchingError, ValueError):
    pass


class NonIntegerCarryOver(MatchingError, ValueError):
    pass


class NotNeighbors(MatchingError, ValueError):
    pass


class StrongConditionFails(MatchingError, ValueError):
    pass


class InfeasibleTrace(MatchingError, ValueError):
    pass


class BudgetExceeded(MatchingError, RuntimeError):
    pass


class StateNotCovered(MatchingError, KeyError):
    pass


class NotOptimalAfterTransfer(MatchingError, RuntimeError):
    """A transfer step lost value. This indicates a bug, not bad input."""


class AssumptionViolated(MatchingError, ValueError):
    pass


class QuantityOutOfRange(MatchingError, ValueError):
    pass


class NotVertical(MatchingError, ValueError):
    pass


class NotOneLevelStructure(MatchingError, ValueError):
    pass


class MonotoneParamViolated(MatchingError, ValueError):
    pass


class BadClassOrder(MatchingError, ValueError):
    pass


class PolicyInfeasibleDecision(MatchingError, RuntimeError):
    pass


class UnknownSuite(MatchingError, ValueError):
    pass


class ConfigError(MatchingError, ValueError):
    pass
