"""Exception hierarchy shared by every module."""


class RulewalkError(Exception):
    """Base class for all library errors."""


class DataError(RulewalkError):
    """Problem with input data files or their contents."""


class ConfigError(RulewalkError):
    """Invalid or contradictory configuration."""


class NumericalError(RulewalkError):
    """A non-finite value appeared in parameters or gradients."""


# kg-core
class EmptyInput(DataError):
    pass


class MalformedRow(DataError):
    pass


class MissingTypeMapping(DataError):
    pass


class UnknownEntity(DataError, KeyError):
    pass


class AlreadyAugmented(RulewalkError):
    pass


class InfeasibleConfig(ConfigError):
    pass


# rules
class MalformedRule(DataError):
    pass


class ScoreOutOfRange(MalformedRule):
    pass


class InvalidPath(RulewalkError):
    pass


class UnrealizableBody(DataError):
    pass


# policy / training
class InvalidDimension(ConfigError):
    pass


class DimensionMismatch(RulewalkError):
    pass


class EmptyActionSet(RulewalkError):
    pass


class StaleTrajectory(RulewalkError):
    pass


class EmptyQuerySet(DataError):
    pass


class VocabularyMismatch(DataError):
    pass


# evaluation
class QueryNotInTruth(DataError):
    pass
