"""Exception taxonomy shared across the package."""


class ShillbenchError(Exception):
    """Base class for all package-specific failures."""


class ConfigurationError(ShillbenchError):
    """Invalid configuration: bad descriptor, schema violation, out-of-range profile size."""


class DomainError(ShillbenchError):
    """An argument lies outside the mathematical domain of the operation."""


class UnsupportedDistributionError(ShillbenchError):
    """The type distribution violates a requirement (for example zero density)."""


class RegularityError(ShillbenchError):
    """The operation requires a regular distribution and this one is not."""


class UnsupportedFormatError(ShillbenchError):
    """The mechanism format does not support the requested computation."""


class NonPartitionalError(ConfigurationError):
    """Disclosure policy preimages overlap or miss part of the population support."""


class BudgetExceededError(ShillbenchError):
    """An enumeration or quadrature exceeded its configured budget."""
