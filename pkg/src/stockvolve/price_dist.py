"""Closed-form stationary price distribution and aggregated demand/supply curves.

The stationary purchase density solves P = F(1-F) (a logistic differential
equation in the cdf), so the price cdf is logistic with scale Q' fixed by the
lowest purchase price mu_m and its cut-off probability eps.  The exponential
tails of the logistic give an equivalent Laplace form whose shape q is chosen
so that both distributions share the same standard deviation.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import expit

from .errors import DegenerateCurves, NoIntersection
from .grid import PriceGrid

__all__ = [
    "LogisticPriceModel",
    "CurvePair",
    "logistic_cdf",
    "logistic_pdf",
    "logistic_variance",
    "laplace_pdf",
    "sample_logistic",
    "sample_laplace",
    "kl_logistic_laplace",
    "build_curves",
    "purchase_density",
    "intersection_price",
    "intersection_price_from_units",
    "mean_price_shift",
]


@dataclass(frozen=True)
class LogisticPriceModel:
    """Parameters of the logistic price distribution.

    mu    -- mean price (also the symmetric distribution's median and mode)
    mu_m  -- lowest price at which purchases occur, 0 <= mu_m < mu
    eps   -- cdf value at mu_m, 0 < eps < 1/2 (small: purchases below mu_m
             are not profitable for suppliers)

    Derived quantities: shape Q = 1/ln(1/eps - 1), scale Q' = Q*(mu - mu_m),
    Laplace shape q = Q*pi/sqrt(6) (equal standard deviations), and the price
    standard deviation sigma = sqrt(2)*q*mu.
    """

    mu: float
    mu_m: float = 0.0
    eps: float = 0.01

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0 <= self.mu_m < self.mu:
            raise ValueError(f"need 0 <= mu_m < mu, got mu_m={self.mu_m}, mu={self.mu}")
        if not 0 < self.eps < 0.5:
            raise ValueError(f"eps must lie in (0, 1/2), got {self.eps}")
        # Support sanity: the invariants above already bound the cdf mass on
        # negative prices by eps (cdf(0) <= cdf(mu_m) = eps), but guard against
        # future parameter extensions breaking the positive-price boundary.
        if self.mass_below_zero() > self.eps * (1 + 1e-12):
            raise ValueError("cdf mass below p=0 exceeds the cut-off probability eps")

    @cached_property
    def Q(self) -> float:
        return 1.0 / np.log(1.0 / self.eps - 1.0)

    @cached_property
    def Q_prime(self) -> float:
        return self.Q * (self.mu - self.mu_m)

    @cached_property
    def q(self) -> float:
        return self.Q * np.pi / np.sqrt(6.0)

    @cached_property
    def sigma(self) -> float:
        return np.sqrt(2.0) * self.q * self.mu

    def mass_below_zero(self) -> float:
        """Cdf at p=0: the (small) probability the closed form puts on p < 0."""
        return float(expit(-self.mu / (self.Q * (self.mu - self.mu_m))))


def logistic_cdf(p, model: LogisticPriceModel):
    """Cdf 1/(1 + exp(-(p - mu)/Q')); equals 1/2 at mu and eps at mu_m."""
    return expit((np.asarray(p, dtype=float) - model.mu) / model.Q_prime)


def logistic_pdf(p, model: LogisticPriceModel):
    """Density of the logistic price distribution; maximum 1/(4Q') at p=mu."""
    x = np.abs(np.asarray(p, dtype=float) - model.mu) / model.Q_prime
    e = np.exp(-x)
    return e / (model.Q_prime * (1.0 + e) ** 2)


def logistic_variance(model: LogisticPriceModel) -> float:
    """Closed-form variance Q^2 (mu - mu_m)^2 pi^2 / 3."""
    return model.Q_prime**2 * np.pi**2 / 3.0


def laplace_pdf(p, mu: float, q: float):
    """Two-sided exponential tail approximation (1/(2 q mu)) exp(-|p-mu|/(q mu))."""
    if q <= 0 or mu <= 0:
        raise ValueError("laplace_pdf needs q > 0 and mu > 0")
    b = q * mu
    return np.exp(-np.abs(np.asarray(p, dtype=float) - mu) / b) / (2.0 * b)


def sample_logistic(model: LogisticPriceModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-cdf samples of the logistic price distribution."""
    u = rng.random(n)
    return model.mu + model.Q_prime * np.log(u / (1.0 - u))


def sample_laplace(mu: float, q: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-cdf samples of the Laplace price distribution."""
    u = rng.random(n)
    return mu + q * mu * _laplace_invcdf(u)


def _laplace_invcdf(u: np.ndarray) -> np.ndarray:
    """Quantile function of the unit Laplace distribution."""
    return np.sign(u - 0.5) * -np.log1p(-2.0 * np.abs(u - 0.5))


def kl_logistic_laplace(model: LogisticPriceModel) -> float:
    """KL divergence of the logistic price density from its Laplace stand-in.

    The two distributions are matched in standard deviation, not in shape, so
    the divergence is small but nonzero; callers get the number, no threshold
    is implied.
    """

    def integrand(p):
        f = logistic_pdf(p, model)
        g = laplace_pdf(p, model.mu, model.q)
        return f * (np.log(f) - np.log(g))

    span = 30.0 * model.sigma
    val, _ = integrate.quad(integrand, model.mu - span, model.mu + span,
                            points=[model.mu], limit=200)
    return float(val)


@dataclass(frozen=True)
class CurvePair:
    """Cumulative supply/demand curves sampled on a grid.

    F_z is the supply cdf (supplied units are z_total * F_z, increasing in
    price); F_n is the demand cdf (demanded units are n_total * (1 - F_n),
    decreasing in price).  Both must effectively span [0, 1] on the grid.
    """

    grid: PriceGrid
    F_z: np.ndarray
    F_n: np.ndarray
    n_total: float
    z_total: float

    _ENDPOINT_TOL = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "F_z", np.asarray(self.F_z, dtype=float))
        object.__setattr__(self, "F_n", np.asarray(self.F_n, dtype=float))
        if self.n_total <= 0 or self.z_total <= 0:
            raise ValueError("n_total and z_total must be positive")
        for name, F in (("F_z", self.F_z), ("F_n", self.F_n)):
            if F.shape != (self.grid.n_points,):
                raise ValueError(f"{name} must have one value per grid point")
            if np.any(F < -1e-15) or np.any(F > 1 + 1e-15):
                raise ValueError(f"{name} must lie within [0, 1]")
            if np.any(np.diff(F) < -1e-12):
                raise ValueError(f"{name} must be nondecreasing")
            if F[0] > self._ENDPOINT_TOL or F[-1] < 1.0 - self._ENDPOINT_TOL:
                raise ValueError(
                    f"{name} must run from ~0 to ~1 across the grid "
                    f"(got {F[0]:.3g} .. {F[-1]:.3g}); widen the grid or "
                    f"tighten the model tails"
                )

    @property
    def demand_units(self) -> np.ndarray:
        """n(p) = n_total * (1 - F_n(p)), nonincreasing."""
        return self.n_total * (1.0 - self.F_n)

    @property
    def supply_units(self) -> np.ndarray:
        """z(p) = z_total * F_z(p), nondecreasing."""
        return self.z_total * self.F_z


def build_curves(model: LogisticPriceModel, n_total: float, z_total: float,
                 grid: PriceGrid) -> CurvePair:
    """Sample the model's cdf into supply and demand curves on the grid."""
    if n_total <= 0 or z_total <= 0:
        raise ValueError("n_total and z_total must be positive")
    F = logistic_cdf(grid.points, model)
    return CurvePair(grid=grid, F_z=F, F_n=F.copy(), n_total=n_total, z_total=z_total)


def purchase_density(curves: CurvePair) -> tuple[np.ndarray, float]:
    """Normalized purchase density F_z*(1-F_n)/T and the raw overlap integral T.

    T has currency units; for logistic curves it equals the scale Q' exactly
    (the dimensionless statement of the theory is T/Q' = 1).
    """
    raw = curves.F_z * (1.0 - curves.F_n)
    T = float(np.trapezoid(raw, curves.grid.points))
    if T <= 0:
        raise DegenerateCurves("supply/demand overlap integral T is not positive")
    return raw / T, T


def intersection_price(curves: CurvePair) -> float:
    """Equilibrium price where demanded and supplied units coincide.

    Bisection on the piecewise-linear interpolant of n(p) - z(p), which is
    monotone decreasing.  The answer is exact for the interpolant (bracket
    driven far below one cell), hence within half a grid cell of the
    underlying curves' crossing.
    """
    return intersection_price_from_units(
        curves.grid.points, curves.demand_units, curves.supply_units
    )


def intersection_price_from_units(p: np.ndarray, n: np.ndarray, z: np.ndarray) -> float:
    """Intersection of raw unit curves n(p) decreasing and z(p) increasing."""
    p = np.asarray(p, dtype=float)
    d = np.asarray(n, dtype=float) - np.asarray(z, dtype=float)
    if not (d[0] > 0 and d[-1] < 0):
        raise NoIntersection(
            f"curves do not cross: n-z runs from {d[0]:.3g} to {d[-1]:.3g}"
        )
    lo, hi = p[0], p[-1]
    tol = 1e-7 * (p[1] - p[0])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.interp(mid, p, d) > 0:
            lo = mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def mean_price_shift(delta_n: float, delta_z: float, n_total: float,
                     Q: float, mu: float) -> float:
    """First-order mean-price response mu * (2Q/n_total) * (dn - dz).

    delta_n and delta_z are the perturbations of demanded and supplied units
    evaluated at the mean price.
    """
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    return mu * (2.0 * Q / n_total) * (delta_n - delta_z)
