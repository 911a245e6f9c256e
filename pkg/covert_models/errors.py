"""
Exception hierarchy for the covert link toolkit.

Every error carries a stable ``code`` so callers (and the CLI exit-code
mapping) can branch on the failure kind without parsing messages.
"""

from typing import Optional


class CovertError(Exception):
    """Base class for all toolkit errors"""

    code = "COVERT_ERROR"

    def __init__(self, detail: str, code: Optional[str] = None):
        super().__init__(detail)
        self.detail = detail
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"[{self.code}] {self.detail}"


class ConfigError(CovertError):
    """Malformed or unknown configuration input"""

    code = "CONFIG_ERROR"


class SessionGeometryError(ConfigError):
    """PpmSession invariants violated (frame size, code length, zeta)"""

    code = "SESSION_GEOMETRY"


class ParameterRangeError(ConfigError):
    """A numeric argument lies outside its documented range"""

    code = "OUT_OF_RANGE"


class DegenerateRegimeError(CovertError):
    """The requested formula is undefined in this parameter regime"""

    code = "DEGENERATE_REGIME"


def require_nonnegative(name: str, value: float) -> float:
    if value < 0:
        raise ParameterRangeError(f"{name} must be >= 0, got {value}", code="NEGATIVE_INPUT")
    return value


def require_open_interval(name: str, value: float, low: float, high: float) -> float:
    if not (low < value < high):
        raise ParameterRangeError(f"{name} must lie in ({low}, {high}), got {value}")
    return value
