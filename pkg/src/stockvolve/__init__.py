"""stockvolve: evolutionary stock-market simulation and analysis toolkit.

Subpackages and modules:

- kinetics     fast purchase kinetics on a price grid, relaxation, stability
- price_dist   closed-form logistic/Laplace price distribution and curves
- evolution    Walras mean-price dynamics, replicator competition, GBM
- returns      return-distribution family, sampling, MLE, mixture integrals
- analysis     price CSV ingestion, Fisher-Pry transform, trend segmentation
- service      FastAPI application wrapping the library
- cli          batch command-line client of the service
"""

__version__ = "0.1.0"

from . import analysis, errors, evolution, kinetics, price_dist, returns  # noqa: F401
from .grid import PriceGrid  # noqa: F401
