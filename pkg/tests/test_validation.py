"""
Unit tests for input validation
"""

import math

import pytest

from flocstab.validation import (
    ConfigError, FlocstabError, PresetError, ValidationError, validate_count, validate_damping,
    validate_fraction, validate_grid_size, validate_log_level, validate_nonnegative, validate_positive,
    validate_values,
)


class TestNumbers:
    """Test scalar validators"""

    def test_positive(self):
        assert validate_positive(3, 'x') == 3.0
        with pytest.raises(ValidationError, match="x must be greater than 0"):
            validate_positive(0.0, 'x')

    @pytest.mark.parametrize("value", [math.nan, math.inf, '1.0', True, None])
    def test_rejects_non_numbers(self, value):
        with pytest.raises(ValidationError):
            validate_nonnegative(value, 'b')

    def test_nonnegative_accepts_zero(self):
        assert validate_nonnegative(0, 'b') == 0.0

    def test_fraction_is_open(self):
        assert validate_fraction(0.4, 'cfl') == 0.4
        for value in (0.0, 1.0):
            with pytest.raises(ValidationError, match="cfl"):
                validate_fraction(value, 'cfl')

    def test_damping_allows_one(self):
        assert validate_damping(1.0) == 1.0
        with pytest.raises(ValidationError):
            validate_damping(0.0)


class TestCounts:
    """Test integer validators"""

    def test_integral_float_is_accepted(self):
        assert validate_count(5.0, 'n') == 5

    def test_fractional_float_is_rejected(self):
        with pytest.raises(ValidationError, match="integer"):
            validate_count(2.5, 'n')

    def test_bounds(self):
        with pytest.raises(ValidationError, match="at least"):
            validate_count(0, 'n')
        with pytest.raises(ValidationError, match="maximum"):
            validate_grid_size(20001)


class TestCollections:
    """Test list and name validators"""

    def test_values(self):
        assert validate_values([1, 2.5], 'axis') == [1.0, 2.5]
        with pytest.raises(ValidationError, match="empty"):
            validate_values([], 'axis')
        with pytest.raises(ValidationError, match=r"axis\[1\]"):
            validate_values([1.0, math.nan], 'axis')
        with pytest.raises(ValidationError, match="list"):
            validate_values('0.1', 'axis')

    def test_log_level_is_case_insensitive(self):
        assert validate_log_level('info') == 'INFO'
        with pytest.raises(ValidationError):
            validate_log_level('LOUD')


class TestHierarchy:
    """Error types share one base"""

    def test_subclasses(self):
        assert issubclass(PresetError, ValidationError)
        assert issubclass(ConfigError, ValidationError)
        assert issubclass(ValidationError, FlocstabError)
