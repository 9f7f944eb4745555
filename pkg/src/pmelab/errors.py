"""Exception hierarchy; the CLI maps each family to an exit code."""


class PmeLabError(Exception):
    exit_code = 1


class ConfigError(PmeLabError, ValueError):
    exit_code = 2


class ContractError(PmeLabError):
    """A precondition between pipeline stages is violated (e.g. unfrozen surrogate)."""

    exit_code = 3


class IntegrityError(ContractError):
    """A persisted artifact is truncated, modified or belongs to another config."""


class DatasetError(ContractError):
    pass


class NumericError(PmeLabError, ArithmeticError):
    exit_code = 4


class UndefinedMetricError(NumericError):
    pass
