import numpy as np
import pytest

from stockvolve.grid import PriceGrid
from stockvolve.price_dist import LogisticPriceModel, build_curves


@pytest.fixture
def canonical_model():
    """Mid-range shape model used throughout: Q ~ 0.2176."""
    return LogisticPriceModel(mu=100.0, mu_m=1.0, eps=0.01)


@pytest.fixture
def tight_model():
    """Thin-tailed model whose support effectively fits in [0, 300]."""
    return LogisticPriceModel(mu=100.0, mu_m=1.0, eps=1e-8)


@pytest.fixture
def wide_grid():
    return PriceGrid(p_min=0.0, p_max=300.0, n_points=2048)


@pytest.fixture
def stationary_state(tight_model, wide_grid):
    """Logistic-consistent stationary market state with equal totals."""
    from stockvolve.kinetics import MarketState

    curves = build_curves(tight_model, 1e6, 1e6, wide_grid)
    n = curves.demand_units
    z = curves.supply_units
    rates = 1.0 * n * z
    return MarketState(grid=wide_grid, n=n, z=z, demand_rate=rates,
                       supply_rate=rates, eta=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
