"""
Test configuration and fixtures for flocstab tests
"""

import json
import os
from unittest.mock import patch

import numpy as np
import pytest

from flocstab.model import Grid, build_preset, custom_rates


@pytest.fixture
def test_env():
    """Environment defaults used by Config"""
    env = {
        'FLOCSTAB_LOG_LEVEL': 'WARNING',
        'FLOCSTAB_GRID': '64',
        'FLOCSTAB_JOBS': '1',
        'FLOCSTAB_TOL': '1e-9',
        'FLOCSTAB_MAX_ITER': '5000',
    }
    with patch.dict(os.environ, env, clear=False):
        yield env


@pytest.fixture
def grid():
    """Coarse unit grid"""
    return Grid.uniform(1.0, 50)


@pytest.fixture
def fine_grid():
    return Grid.uniform(1.0, 400)


@pytest.fixture
def example1():
    """Factory for the linear-growth preset"""
    def make(b=0.3, kf_slope=2.0):
        return build_preset('example1', {'b': b, 'kf_slope': kf_slope})
    return make


@pytest.fixture
def example2():
    """Factory for the exponential-growth preset"""
    def make(a=1.0, b=0.05, c=0.05, d=0.0):
        return build_preset('example2', {'a': a, 'b': b, 'c': c, 'd': d})
    return make


@pytest.fixture
def aggregating_rates():
    """
    g = 1, mu = 1, q = 1.8, no fragmentation, ka = 1 below the cutoff.

    The zero solution is unstable (instability integral 1.8(1 - 1/e) > 1)
    and aggregation caps growth, so a positive steady state exists.
    """
    return custom_rates(x1=1.0, g=1.0, mu=1.0, q=1.8, kf=0.0, ka=1.0)


@pytest.fixture
def growing_rates():
    """Linear model whose zero solution grows quickly (no aggregation)"""
    return custom_rates(x1=1.0, g=1.0, mu=0.0, q=5.0, kf=0.0, ka=0.0)


@pytest.fixture(scope="session")
def random_rate_sets():
    """25 seeded rate sets with linear g, kf and constant mu, q, ka"""
    rng = np.random.default_rng(20240611)
    sets = []
    for _ in range(25):
        g0, g1 = rng.uniform(0.2, 2.0, size=2)
        sets.append(custom_rates(
            x1=1.0,
            g=[float(g0), float(g1)],
            mu=float(rng.uniform(0.0, 2.0)),
            q=float(rng.uniform(0.0, 3.0)),
            kf=[0.0, float(rng.uniform(0.0, 4.0))],
            ka=float(rng.uniform(0.0, 2.0)),
        ))
    return sets


@pytest.fixture
def write_config(tmp_path):
    """Write a run configuration document and return its path"""
    def write(data, name='run.json'):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding='utf-8')
        return path
    return write
