"""
Input validation and error types for flocstab

Validates user-supplied numbers (grid sizes, tolerances, preset
parameters, sweep ranges) and gives readable error messages.
"""

import math
from typing import Iterable, List


class FlocstabError(Exception):
    """Base class for all flocstab errors"""
    pass


class ValidationError(FlocstabError):
    """Raised when validation fails"""
    pass


class PresetError(ValidationError):
    """Unknown preset id or invalid preset parameters"""
    pass


class ConfigError(ValidationError):
    """Run configuration document cannot be parsed"""
    pass


class GridMismatchError(FlocstabError):
    """Inputs are tabulated on different grids"""
    pass


class DomainError(FlocstabError):
    """Argument lies outside the size interval"""
    pass


class QuadratureError(FlocstabError):
    """Quadrature rule cannot be applied to the given samples"""
    pass


class SpectralError(FlocstabError):
    """Dense eigenvalue computation failed"""
    pass


class BracketError(FlocstabError):
    """No sign change of the characteristic function was found"""
    pass


LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


def _check_number(value, param_name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{param_name} must be number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise ValidationError(f"{param_name} must be finite, got {value}")
    return float(value)


def validate_positive(value, param_name: str = "value") -> float:
    """
    Validate a strictly positive finite number

    Raises:
        ValidationError: If value is not a positive number
    """
    value = _check_number(value, param_name)
    if value <= 0.0:
        raise ValidationError(f"{param_name} must be greater than 0, got {value}")
    return value


def validate_nonnegative(value, param_name: str = "value") -> float:
    """
    Validate a nonnegative finite number

    Raises:
        ValidationError: If value is negative or not a number
    """
    value = _check_number(value, param_name)
    if value < 0.0:
        raise ValidationError(f"{param_name} must be nonnegative, got {value}")
    return value


def validate_fraction(value, param_name: str = "value") -> float:
    """
    Validate a number in the open interval (0, 1)

    Used for damping factors and CFL numbers.
    """
    value = _check_number(value, param_name)
    if not 0.0 < value < 1.0:
        raise ValidationError(f"{param_name} must lie in (0, 1), got {value}")
    return value


def validate_damping(value, param_name: str = "damping") -> float:
    """Validate a fixed-point damping factor in (0, 1]"""
    value = _check_number(value, param_name)
    if not 0.0 < value <= 1.0:
        raise ValidationError(f"{param_name} must lie in (0, 1], got {value}")
    return value


def validate_count(value, param_name: str = "count", min_value: int = 1, max_value: int = 10**7) -> int:
    """
    Validate an integer count

    Args:
        value: Count to validate
        param_name: Parameter name for error messages
        min_value: Minimum allowed value (inclusive)
        max_value: Maximum allowed value (inclusive)

    Returns:
        Validated count as int

    Raises:
        ValidationError: If count is invalid
    """
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ValidationError(f"{param_name} must be integer, got {type(value).__name__}")
    if value < min_value:
        raise ValidationError(f"{param_name} must be at least {min_value}, got {value}")
    if value > max_value:
        raise ValidationError(f"{param_name} exceeds maximum of {max_value}")
    return value


def validate_grid_size(n_cells, param_name: str = "n_cells", min_cells: int = 1) -> int:
    """Validate the number of grid cells"""
    return validate_count(n_cells, param_name, min_value=min_cells, max_value=20000)


def validate_values(values: Iterable, param_name: str = "values") -> List[float]:
    """
    Validate a nonempty list of finite numbers (a sweep axis)

    Raises:
        ValidationError: If the list is empty or holds non-finite entries
    """
    if isinstance(values, (str, bytes)) or not isinstance(values, Iterable):
        raise ValidationError(f"{param_name} must be a list of numbers")
    checked = [_check_number(v, f"{param_name}[{i}]") for i, v in enumerate(values)]
    if not checked:
        raise ValidationError(f"{param_name} cannot be empty")
    return checked


def validate_log_level(level, param_name: str = "log_level") -> str:
    """Validate a logging level name"""
    if not isinstance(level, str):
        raise ValidationError(f"{param_name} must be string, got {type(level).__name__}")
    level = level.upper()
    if level not in LOG_LEVELS:
        raise ValidationError(f"{param_name} must be one of {', '.join(LOG_LEVELS)}")
    return level
