"""
Unit tests for grids, rate sets, presets and the assumption audit
"""

import numpy as np
import pytest

from flocstab.model import (
    Grid, bind_example2_kernel, build_preset, bump_gamma, constant_kernel, custom_rates,
    gamma_first_moment, kernel_jumps, mass_budget, tabulate, validate_assumptions, with_cutoff,
)
from flocstab.steady_state import DensityField
from flocstab.validation import DomainError, GridMismatchError, PresetError, ValidationError


class TestGrid:
    """Test the uniform size grid"""

    def test_nodes_and_spacing(self):
        grid = Grid.uniform(2.0, 4)
        assert grid.size == 5
        assert grid.h == 0.5
        np.testing.assert_array_equal(grid.nodes, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_nodes_are_read_only(self, grid):
        with pytest.raises(ValueError):
            grid.nodes[0] = 1.0

    def test_rejects_empty_grid(self):
        with pytest.raises(ValidationError):
            Grid.uniform(1.0, 0)

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValidationError):
            Grid.uniform(0.0, 10)


class TestPresets:
    """Test the two published parameterizations"""

    def test_example1_rates(self, grid, example1):
        table = tabulate(example1(b=0.3, kf_slope=2.0), grid)
        x = grid.nodes
        np.testing.assert_allclose(table.g, x + 1.0)
        np.testing.assert_allclose(table.mu, 1.0)
        np.testing.assert_allclose(table.q, 0.3 * (x + 1.0))
        np.testing.assert_allclose(table.kf, 2.0 * x)
        assert np.all(table.ka == 0.0)

    def test_example2_rates(self, grid, example2):
        table = tabulate(example2(a=2.0, b=0.1, c=0.4), grid)
        x = grid.nodes
        np.testing.assert_allclose(table.g, np.exp(-2.0 * x))
        np.testing.assert_allclose(table.mu, 0.2 * x)
        np.testing.assert_allclose(table.kf, 0.4 * x)

    def test_positional_parameters(self):
        rates = build_preset('example2', [1.0, 0.2, 0.3])
        assert rates.param_dict == {'a': 1.0, 'b': 0.2, 'c': 0.3, 'd': 0.0}

    def test_kf_slope_defaults_to_two(self):
        assert build_preset('example1', {'b': 1.0}).param_dict['kf_slope'] == 2.0

    def test_unknown_preset(self):
        with pytest.raises(PresetError, match="unknown preset"):
            build_preset('example3', {})

    def test_unknown_parameter(self):
        with pytest.raises(PresetError, match="unknown"):
            build_preset('example1', {'b': 1.0, 'z': 2.0})

    def test_missing_parameter(self):
        with pytest.raises(PresetError, match="missing"):
            build_preset('example2', {'a': 1.0})

    def test_negative_parameter(self):
        with pytest.raises(PresetError):
            build_preset('example1', {'b': -1.0})

    def test_example2_needs_positive_a(self):
        with pytest.raises(PresetError):
            build_preset('example2', {'a': 0.0, 'b': 0.1, 'c': 0.1})


class TestKernels:
    """Test kernel building blocks"""

    def test_cutoff_zeroes_large_pairs(self):
        kernel = with_cutoff(constant_kernel(2.0), 1.0)
        values = kernel(np.array([0.2, 0.5, 0.7]), np.array([0.3, 0.5, 0.1]))
        np.testing.assert_array_equal(values, [2.0, 0.0, 2.0])

    def test_tabulated_kernel_is_symmetric(self, grid):
        rates = custom_rates(ka=1.0).replace(ka=with_cutoff(lambda x, y: x + 2.0 * y, 1.0))
        table = tabulate(rates, grid)
        np.testing.assert_allclose(table.ka, table.ka.T)
        assert not np.allclose(table.ka_raw, table.ka_raw.T)

    def test_mismatched_interval(self):
        rates = custom_rates(x1=2.0)
        with pytest.raises(GridMismatchError):
            tabulate(rates, Grid.uniform(1.0, 10))

    def test_bind_example2_kernel(self, grid, example2):
        rates = example2(d=1.0)
        bound = bind_example2_kernel(rates, DensityField.constant(grid, 1.0))
        assert float(bound.ka(np.array(0.2), np.array(0.3))) == pytest.approx(0.56)
        assert float(bound.ka(np.array(0.6), np.array(0.5))) == 0.0
        assert validate_assumptions(bound, grid).flag('A2')

    def test_bind_rejects_other_presets(self, grid, example1):
        with pytest.raises(PresetError):
            bind_example2_kernel(example1(), DensityField.constant(grid, 1.0))


class TestDaughterDensity:
    """Test moments of Gamma"""

    def test_uniform_normalization(self, grid, example1):
        budget = mass_budget(example1(), grid)
        np.testing.assert_allclose(budget.normalization[1:], 1.0, atol=1e-12)
        np.testing.assert_allclose(budget.first_moment_defect, 0.0, atol=1e-12)

    def test_uniform_first_moment(self, grid, example1):
        assert gamma_first_moment(example1(), 0.5, grid) == pytest.approx(0.25, abs=1e-14)

    def test_bump_first_moment(self):
        rates = build_preset('example1', {'b': 0.3}, gamma=bump_gamma(0.2))
        grid = Grid.uniform(1.0, 200)
        assert gamma_first_moment(rates, 0.5, grid) == pytest.approx(0.5 - 0.2 / 3.0, abs=1e-4)

    def test_bump_normalization(self):
        rates = build_preset('example1', {'b': 0.3}, gamma=bump_gamma(0.2))
        budget = mass_budget(rates, Grid.uniform(1.0, 200))
        np.testing.assert_allclose(budget.normalization[1:], 1.0, atol=1e-12)

    def test_first_moment_outside_domain(self, grid, example1):
        with pytest.raises(DomainError):
            gamma_first_moment(example1(), 1.5, grid)
        with pytest.raises(DomainError):
            gamma_first_moment(example1(), 0.0, grid)


class TestAssumptionAudit:
    """Test validate_assumptions"""

    def test_presets_pass(self, grid, example1, example2):
        for rates in (example1(), example2()):
            report = validate_assumptions(rates, grid)
            assert report.all_passed, report.get_summary()
            assert list(report.discontinuous) == ['gamma']

    def test_nonpositive_growth(self, grid):
        report = validate_assumptions(custom_rates(g=[1.0, -1.0]), grid)
        assert not report.flag('A1')
        assert report.checks['A1'].location == (1.0,)
        assert 'FAILED' in report.get_summary()

    def test_fragmentation_at_zero_size(self, grid):
        report = validate_assumptions(custom_rates(kf=1.0), grid)
        assert not report.flag('A5')
        assert report.flag('A1')

    def test_kernel_without_cutoff(self, grid):
        report = validate_assumptions(custom_rates().replace(ka=constant_kernel(1.0)), grid)
        assert not report.flag('A2')

    def test_asymmetric_kernel(self, grid):
        rates = custom_rates().replace(ka=with_cutoff(lambda x, y: x, 1.0))
        assert not validate_assumptions(rates, grid).flag('A2')

    def test_report_serializes(self, grid, example1):
        data = validate_assumptions(example1(), grid).to_dict()
        assert data['checks']['A6']['passed'] is True


class TestKernelJumps:
    """Test detection of kernels with a jump at a support edge"""

    def test_uniform_daughters_jump_by_one_over_parent(self, grid, example1):
        jumps = kernel_jumps(example1(), grid)
        # 1/y is largest at the smallest parent node
        assert jumps == {'gamma': pytest.approx(1.0 / grid.h)}

    def test_constant_aggregation_jumps_at_cutoff(self, grid):
        assert kernel_jumps(custom_rates(ka=2.0), grid)['ka'] == pytest.approx(2.0)
        assert 'ka' not in kernel_jumps(custom_rates(ka=0.0), grid)

    def test_continuous_daughter_density(self, grid):
        def gamma(x, y):
            x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
            safe_y = np.where(y > 0.0, y, 1.0)
            inside = (y > 0.0) & (x >= 0.0) & (x <= y)
            return np.where(inside, 6.0 * x * (y - x) / safe_y**3, 0.0)

        rates = build_preset('example1', {'b': 0.3}, gamma=gamma)
        assert kernel_jumps(rates, grid) == {}
        report = validate_assumptions(rates, grid)
        assert report.discontinuous == {}
        assert 'discontinuous' not in report.get_summary()

    def test_summary_names_the_kernel(self, grid):
        report = validate_assumptions(custom_rates(ka=1.0), grid)
        summary = report.get_summary()
        assert 'discontinuous kernel admitted' in summary
        assert 'gamma (jump' in summary and 'ka (jump' in summary


class TestReferenceValues:
    """Closed-form values of the presets and audit"""

    def test_example1_at_half(self):
        rates = build_preset('example1', {'b': 2.0})
        x = np.array([0.5])
        assert rates.q(x)[0] == pytest.approx(3.0)
        assert rates.g(x)[0] == pytest.approx(1.5)
        assert rates.kf(x)[0] == pytest.approx(1.0)

    def test_example2_at_one(self):
        rates = build_preset('example2', {'a': 0.5, 'b': 0.1, 'c': 0.1, 'd': 0.0})
        x = np.array([1.0])
        assert rates.g(x)[0] == pytest.approx(0.60653, abs=1e-5)
        assert rates.mu(x)[0] == pytest.approx(0.05)
        assert rates.kf(x)[0] == pytest.approx(0.1)

    def test_growth_vanishing_at_origin(self):
        grid = Grid.uniform(1.0, 100)
        report = validate_assumptions(custom_rates(g=[0.0, 1.0]), grid)
        assert not report.flag('A1')
        assert report.checks['A1'].location == (0.0,)

    @pytest.mark.parametrize("y, expected", [(0.8, 0.4), (1.0, 0.5)])
    def test_uniform_first_moments(self, y, expected):
        rates = build_preset('example1', {'b': 1.0})
        assert gamma_first_moment(rates, y, Grid.uniform(1.0, 100)) == pytest.approx(expected, abs=1e-12)
