"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid network configuration or malformed config document."""


class CapExceeded(RuntimeError):
    """An enumeration or construction would exceed its configured cap."""


class AlignmentViolation(RuntimeError):
    """An interference monomial fell outside its extended direction set."""
