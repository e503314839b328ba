"""Uniform price grid shared by the kinetics and price-distribution modules."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PriceGrid:
    """Uniform discretization of a price interval.

    Prices are nonnegative; the grid needs at least 16 points so that
    trapezoidal integrals and curve intersections are meaningful.
    """

    p_min: float
    p_max: float
    n_points: int

    def __post_init__(self):
        if self.p_min < 0:
            raise ValueError(f"p_min must be >= 0, got {self.p_min}")
        if not self.p_min < self.p_max:
            raise ValueError(f"need p_min < p_max, got [{self.p_min}, {self.p_max}]")
        if self.n_points < 16:
            raise ValueError(f"n_points must be >= 16, got {self.n_points}")

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        p = np.linspace(self.p_min, self.p_max, self.n_points)
        p.flags.writeable = False
        return p

    def __len__(self) -> int:
        return self.n_points
