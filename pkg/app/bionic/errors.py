"""Exception types shared across bionic modules; main.py maps them to exit codes."""


class DataValidationError(ValueError):
    """Input data, configuration or shape contract violated (exit code 1)."""


class NumericalError(RuntimeError):
    """Non-finite intermediate or failed solve during inference (exit code 2)."""


__all__ = ["DataValidationError", "NumericalError"]
