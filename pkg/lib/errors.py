"""
Exception hierarchy shared by all modules.
Construction-time invariant violations raise ValueError; everything here signals
a domain condition a caller may want to catch and report.
"""


class SmgiError(Exception):
    """Base class for domain errors."""


class ConfigError(SmgiError):
    """Run configuration could not be parsed or failed the strict schema."""

    def __init__(self, message: str, path: str = "", field: str = "") -> None:
        self.path = str(path)
        self.field = field
        where = ""
        if self.path:
            where += f" path={self.path}"
        if field:
            where += f" field={field}"
        super().__init__(f"{message}{where}")


class DomainMismatch(SmgiError):
    """Two environments cannot be compared under the declared metric."""


class DegenerateTransform(SmgiError):
    """Every sampled transformation distance is zero; a ratio is undefined."""


class DomainError(SmgiError):
    """A state lies outside the domain a kernel was declared on."""


class CounterOverflow(DomainError):
    """A bounded counter state would exceed its declared bound."""


class EvaluatorError(SmgiError):
    """An evaluator produced a loss outside [0, 1]."""


class EmptyAdmissibleSet(SmgiError):
    """The admissible set is empty; any certificate over it would be vacuous."""


class ProtectedItemRemoved(SmgiError):
    """A memory update rule tried to drop an item the protected core requires."""
