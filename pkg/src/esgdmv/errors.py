"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI: 1 for configuration
problems, 2 for bad input data, 3 for numerical failures.
"""


class EsgDmvError(Exception):
    exit_code = 3
    kind = "error"


class ConfigError(EsgDmvError, ValueError):
    exit_code = 1
    kind = "config"


class DataError(EsgDmvError, ValueError):
    exit_code = 2
    kind = "data"


class NumericalError(EsgDmvError, ArithmeticError):
    exit_code = 3
    kind = "numerical"


# data errors
class DegenerateColumn(DataError):
    pass


class InsufficientOverlap(DataError):
    pass


class IncompleteRow(DataError):
    pass


class InvalidBar(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class RangeTooShort(DataError):
    pass


class WeightsOffSimplex(DataError):
    pass


# configuration errors
class AlphaOutOfRange(ConfigError):
    pass


# numerical errors
class DegenerateCovariance(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class NotRepairablePSD(NumericalError):
    pass
