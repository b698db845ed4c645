"""
Tests for the method-of-lines simulator
"""

import math

import numpy as np
import pytest

from flocstab.criteria import zero_verdict
from flocstab.model import Grid, custom_rates, tabulate
from flocstab.simulator import (
    DEFAULT_DT_MAX, SimOptions, default_shape, perturbation_experiment, rhs, run, time_step,
)
from flocstab.steady_state import DensityField
from flocstab.validation import ValidationError


@pytest.fixture
def slow_transport():
    """Options for balance checks: every step recorded"""
    return SimOptions(t_end=1.0, record_every=1)


class TestOptions:
    """Test SimOptions validation"""

    @pytest.mark.parametrize("cfl", [0.0, 1.0, 1.5])
    def test_rejects_bad_cfl(self, cfl):
        with pytest.raises(ValidationError, match="cfl"):
            SimOptions(cfl=cfl)

    def test_rejects_unknown_scheme(self):
        with pytest.raises(ValidationError, match="scheme"):
            SimOptions(scheme='weno5')

    def test_time_step_respects_cfl_and_cap(self, grid, example1):
        table = tabulate(example1(), grid)
        p0 = np.zeros(grid.size)
        assert time_step(table, p0, SimOptions(cfl=0.4)) <= 0.4 * grid.h / 2.0 + 1e-15
        assert time_step(table, p0, SimOptions(dt_max=1e-4)) == 1e-4

    def test_default_cap_on_slow_growth(self, grid):
        table = tabulate(custom_rates(g=1e-6), grid)
        assert time_step(table, np.zeros(grid.size), SimOptions()) == DEFAULT_DT_MAX == 0.01
        assert time_step(table, np.zeros(grid.size), SimOptions(dt_max=None)) > 1.0


class TestRightHandSide:
    """Test the discrete right-hand side"""

    def test_zero_is_stationary(self, grid, aggregating_rates):
        assert np.all(rhs(DensityField.zeros(grid), aggregating_rates).values == 0.0)

    def test_pure_transport(self, grid):
        rates = custom_rates(g=1.0)
        p = DensityField(grid, grid.nodes.copy())
        values = rhs(p, rates).values
        # -(d/dx) x = -1 away from the inflow node, where q = 0 feeds nothing
        np.testing.assert_allclose(values[1:], -1.0, atol=1e-12)
        assert values[0] == 0.0


class TestConservation:
    """Balance laws of the discrete model"""

    def test_aggregation_conserves_mass(self, grid, slow_transport):
        rates = custom_rates(g=1e-6, ka=1.0)
        trajectory = run(default_shape(grid), rates, slow_transport)
        mass = trajectory.mass_series()
        number = trajectory.number_series()
        assert abs(mass[-1] - mass[0]) < 1e-5 * mass[0]
        assert number[-1] < number[0]

    def test_fragmentation_creates_particles(self, grid, slow_transport):
        rates = custom_rates(g=1e-6, kf=[0.0, 2.0])
        trajectory = run(default_shape(grid), rates, slow_transport)
        number = trajectory.number_series()
        assert np.all(np.diff(number) > 0.0)

    def test_number_balance_closes(self, slow_transport):
        grid = Grid.uniform(1.0, 200)
        rates = custom_rates(g=1e-6, ka=1.0)
        trajectory = run(default_shape(grid), rates, slow_transport)
        for d in trajectory.diagnostics:
            assert d.number_balance_residual <= 1e-4 * max(d.total_number, 1.0)

    def test_transport_balance_with_renewal(self, grid):
        rates = custom_rates(g=1.0, mu=0.5, q=0.4)
        trajectory = run(default_shape(grid), rates, SimOptions(t_end=1.0, record_every=1))
        for d in trajectory.diagnostics:
            assert d.number_balance_residual <= 1e-4 * max(d.total_number, 1.0)
        # half the renewal inflow plus half the (zero) flux at the first node
        assert trajectory.diagnostics[0].influx == pytest.approx(0.5 * 0.4, rel=1e-12)

    def test_density_stays_nonnegative(self, grid, example1):
        trajectory = run(default_shape(grid), example1(b=2.0), SimOptions(t_end=1.0, cfl=0.4, record_every=1))
        for state in trajectory.states:
            assert state.values.min() >= -1e-10 * state.values.max()


class TestRun:
    """Test time integration bookkeeping"""

    def test_recording(self, grid, example1):
        trajectory = run(default_shape(grid), example1(), SimOptions(t_end=0.5, record_every=7))
        assert trajectory.times[0] == 0.0
        assert trajectory.times[-1] == pytest.approx(0.5)
        assert len(trajectory.times) == len(trajectory.states) == len(trajectory.diagnostics)
        # every 7th step plus the final one
        assert len(trajectory.times) == 1 + trajectory.steps // 7 + (1 if trajectory.steps % 7 else 0)
        assert trajectory.steps * trajectory.dt == pytest.approx(0.5)

    def test_blow_up_is_an_outcome(self, grid, growing_rates):
        trajectory = run(default_shape(grid), growing_rates, SimOptions(t_end=50.0, blowup_ceiling=1e3))
        assert trajectory.blew_up
        assert trajectory.times[-1] < 50.0
        assert math.isnan(trajectory.diagnostics[-1].total_number)

    def test_rejects_non_finite_start(self, grid, example1):
        p0 = np.zeros(grid.size)
        p0[3] = np.inf
        with pytest.raises(ValidationError, match="finite"):
            run(DensityField(grid, p0), example1())


class TestPerturbation:
    """Test decay-rate fits around an equilibrium"""

    def test_default_shape_has_unit_norm(self, grid):
        shape = default_shape(grid)
        assert shape.l1_norm() == pytest.approx(1.0)
        assert shape.values[0] == shape.values[-1] == 0.0

    def test_rejects_unnormalized_shape(self, grid, example1):
        with pytest.raises(ValidationError, match="unit L1"):
            perturbation_experiment(DensityField.zeros(grid), example1(),
                                    shape=DensityField.constant(grid, 3.0))

    @pytest.mark.slow
    def test_decay_rate_of_stable_zero_solution(self, example1):
        grid = Grid.uniform(1.0, 200)
        rates = example1(b=0.3, kf_slope=0.0)
        fit = perturbation_experiment(DensityField.zeros(grid), rates, opts=SimOptions(t_end=10.0))
        abscissa = zero_verdict(rates, grid).spectral_abscissa
        assert not fit.degenerate
        assert fit.epsilon == pytest.approx(1e-3)
        assert abscissa < 0.0
        assert abs(fit.rate - abscissa) <= 0.2 * abs(abscissa)
        assert fit.r_squared > 0.99

    def test_growth_of_unstable_zero_solution(self, grid, example1):
        fit = perturbation_experiment(DensityField.zeros(grid), example1(b=2.0),
                                      opts=SimOptions(t_end=3.0))
        assert fit.rate > 0.0

    def test_zero_amplitude_is_degenerate(self, grid, example1):
        fit = perturbation_experiment(DensityField.zeros(grid), example1(), epsilon=0.0,
                                      opts=SimOptions(t_end=0.2))
        assert fit.degenerate
        assert fit.rate == 0.0


class TestFragmentationMass:
    """Uniform daughters carry half the parent size, matching the kf/2 loss"""

    def test_fragmentation_conserves_mass(self, grid, slow_transport):
        rates = custom_rates(g=1e-6, kf=[0.0, 2.0])
        mass = run(default_shape(grid), rates, slow_transport).mass_series()
        assert abs(mass[-1] - mass[0]) < 1e-4 * mass[0]

    def test_zero_initial_condition_stays_zero(self, grid, example1):
        trajectory = run(DensityField.zeros(grid), example1(b=2.0), SimOptions(t_end=0.5))
        assert all(np.all(s.values == 0.0) for s in trajectory.states)
        assert not trajectory.blew_up
