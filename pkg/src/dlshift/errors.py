"""Exception hierarchy shared by every module."""


class DlshiftError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class SchemaError(DlshiftError):
    pass


class ParameterError(DlshiftError, ValueError):
    pass


class ConfigError(ParameterError):
    pass


class InsufficientHistoryError(DlshiftError):
    pass


class InsufficientDataError(DlshiftError):
    pass


class MaturityError(DlshiftError):
    pass


class UndefinedEstimateError(DlshiftError, ZeroDivisionError):
    pass


class UndefinedStatisticError(DlshiftError):
    pass


class ContractError(DlshiftError):
    pass


class FormatError(DlshiftError):
    pass


class InvariantError(DlshiftError, ValueError):
    """A transaction record violates one of the record-level invariants."""
