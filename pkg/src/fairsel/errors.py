"""Exception types; the CLI maps each one to its own exit code."""


class FairselError(Exception):
    pass


class ConfigError(FairselError, ValueError):
    """Invalid configuration value (CLI exit code 1)."""


class DataError(FairselError, ValueError):
    """Unreadable or inconsistent input data (CLI exit code 2)."""


class NumericError(FairselError, ArithmeticError):
    """Non-finite values produced during optimization (CLI exit code 3)."""
