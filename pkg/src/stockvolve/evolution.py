"""Slow-timescale mean-price evolution and cross-stock competition.

A stock's relative mean-price growth is proportional to its excess demand
rate (Walras relation).  Dividing each mean price by the total over all
stocks turns that relation into replicator dynamics on the simplex: the
relative price of a stock with above-average fitness grows at the expense
of the others.  With fluctuating fitness the single-stock mean price follows
a multiplicative random walk whose terminal law is lognormal.

Two coefficient conventions coexist in the source model: the price response
H = 2Q/n_total and the fitness f = (Q/n_total)*(D - S), which differ by a
factor of two.  Both are implemented as written; callers choose which to
feed where.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import InsufficientData, ModelDomainError, StepTooLarge

__all__ = [
    "StockEvolutionParams",
    "MarketEnsemble",
    "GbmParams",
    "FitnessAdvantage",
    "walras_step",
    "growth_rate",
    "replicator_step",
    "run_replicator",
    "fitness_advantage",
    "gbm_simulate",
    "gbm_ensemble",
    "lognormal_pdf",
]


@dataclass(frozen=True)
class StockEvolutionParams:
    """Single-stock inputs for the mean-price equation.

    H is the price-response coefficient 2Q/n_total used in the Walras
    relation; the fitness fed to the replicator uses Q/n_total.
    """

    Q: float
    n_total: float
    demand_rate_fn: Callable[[float], float]
    supply_rate_fn: Callable[[float], float]

    def __post_init__(self):
        if self.Q <= 0 or self.n_total <= 0:
            raise ValueError("Q and n_total must be positive")

    @property
    def H(self) -> float:
        return 2.0 * self.Q / self.n_total


@dataclass(frozen=True)
class MarketEnsemble:
    """B stocks with mean prices mu_j, relative prices w_j and fitness f_j."""

    mu: np.ndarray
    fitness: np.ndarray
    w: np.ndarray = field(default=None)

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        f = np.asarray(self.fitness, dtype=float)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "fitness", f)
        if mu.ndim != 1 or mu.size == 0:
            raise ValueError("mu must be a nonempty 1-d array")
        if np.any(mu <= 0):
            raise ValueError("all mean prices must be positive")
        if f.shape != mu.shape:
            raise ValueError("fitness must match mu in length")
        w = mu / mu.sum() if self.w is None else np.asarray(self.w, dtype=float)
        object.__setattr__(self, "w", w)
        if w.shape != mu.shape:
            raise ValueError("w must match mu in length")
        if abs(w.sum() - 1.0) > 1e-12 or np.max(np.abs(w - mu / mu.sum())) > 1e-12:
            raise ValueError("w must equal mu normalized by its sum")

    @property
    def B(self) -> int:
        return self.mu.size

    @property
    def mean_fitness(self) -> float:
        """Relative-price-weighted mean fitness."""
        return float(self.fitness @ self.w)


@dataclass(frozen=True)
class GbmParams:
    """Multiplicative mean-price growth: drift mean_growth, volatility sigma_prime."""

    mean_growth: float
    sigma_prime: float
    mu0: float

    def __post_init__(self):
        if self.sigma_prime < 0:
            raise ValueError("sigma_prime must be >= 0")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")


def walras_step(mu: float, D_at_mu: float, S_at_mu: float, H: float,
                dt: float) -> float:
    """One Euler step of (1/mu) dmu/dt = H * (D - S)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    change = H * (D_at_mu - S_at_mu) * dt
    if abs(change) >= 0.5:
        raise StepTooLarge(
            f"relative price change {change:.3g} per step; reduce dt"
        )
    return mu * (1.0 + change)


def growth_rate(params: StockEvolutionParams, t: float) -> float:
    """Fitness f(t) = (Q/n_total) * (D(t) - S(t))."""
    return params.Q / params.n_total * (
        params.demand_rate_fn(t) - params.supply_rate_fn(t)
    )


def replicator_step(ensemble: MarketEnsemble, dt: float) -> MarketEnsemble:
    """One Euler step of dw_j/dt = (f_j - <f>) w_j, renormalized.

    The mean prices advance consistently: each mu_j grows by its own fitness
    through the total price, so the returned w again equals mu normalized.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = ensemble.fitness
    favg = ensemble.mean_fitness
    if np.max(np.abs(f - favg)) * dt >= 0.1:
        raise StepTooLarge("fitness spread times dt must stay below 0.1")
    w_new = ensemble.w * (1.0 + (f - favg) * dt)
    w_new /= w_new.sum()
    total = ensemble.mu.sum() * (1.0 + favg * dt)
    return MarketEnsemble(mu=w_new * total, fitness=f, w=w_new)


def run_replicator(ensemble: MarketEnsemble, dt: float, n_steps: int,
                   fitness_fn: Callable[[float], np.ndarray] | None = None,
                   record_every: int = 1):
    """Iterate replicator steps, recording (t, mu, w) every record_every steps.

    fitness_fn(t) may supply time-dependent fitness; otherwise the ensemble's
    fitness is held constant.  Returns (times, mu_history, w_history) with the
    initial state in row 0.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    B = ensemble.B
    const_f = fitness_fn is None
    if const_f and B == 2:
        return _run_replicator_pair(ensemble, dt, n_steps, record_every)
    times = [0.0]
    mu_hist = [ensemble.mu.copy()]
    w_hist = [ensemble.w.copy()]
    current = ensemble
    for k in range(1, n_steps + 1):
        if not const_f:
            current = MarketEnsemble(mu=current.mu,
                                     fitness=fitness_fn((k - 1) * dt))
        current = replicator_step(current, dt)
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            mu_hist.append(current.mu.copy())
            w_hist.append(current.w.copy())
    return np.array(times), np.array(mu_hist), np.array(w_hist)


def _run_replicator_pair(ensemble: MarketEnsemble, dt: float, n_steps: int,
                         record_every: int):
    """Scalar fast path for two stocks with constant fitness.

    Identical arithmetic to replicator_step, just without array overhead;
    long fixation runs (millions of steps) need it.
    """
    f1, f2 = float(ensemble.fitness[0]), float(ensemble.fitness[1])
    if max(abs(f1), abs(f2)) * dt >= 0.1:
        raise StepTooLarge("fitness spread times dt must stay below 0.1")
    w1, w2 = float(ensemble.w[0]), float(ensemble.w[1])
    total = float(ensemble.mu.sum())
    times = [0.0]
    mu_hist = [[w1 * total, w2 * total]]
    w_hist = [[w1, w2]]
    for k in range(1, n_steps + 1):
        favg = f1 * w1 + f2 * w2
        w1 *= 1.0 + (f1 - favg) * dt
        w2 *= 1.0 + (f2 - favg) * dt
        s = w1 + w2
        w1 /= s
        w2 /= s
        total *= 1.0 + favg * dt
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            mu_hist.append([w1 * total, w2 * total])
            w_hist.append([w1, w2])
    return np.array(times), np.array(mu_hist), np.array(w_hist)


class FitnessAdvantage(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def fitness_advantage(times, w_j, w_l) -> FitnessAdvantage:
    """Time-averaged fitness difference from two relative-price series.

    Ordinary least squares of ln(w_j/w_l) against time: the slope estimates
    the fitness advantage, the intercept is the integration constant.
    """
    t = np.asarray(times, dtype=float)
    wj = np.asarray(w_j, dtype=float)
    wl = np.asarray(w_l, dtype=float)
    if not (t.shape == wj.shape == wl.shape):
        raise ValueError("times, w_j, w_l must be aligned")
    if t.size < 3:
        raise InsufficientData(f"need at least 3 points, got {t.size}")
    if np.any(wj <= 0) or np.any(wl <= 0):
        raise ValueError("relative prices must be strictly positive")
    y = np.log(wj / wl)
    tc = t - t.mean()
    stt = float(tc @ tc)
    if stt == 0:
        raise InsufficientData("all observations share one timestamp")
    slope = float(tc @ (y - y.mean())) / stt
    intercept = float(y.mean() - slope * t.mean())
    resid = y - (intercept + slope * t)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if sst == 0 else 1.0 - float(resid @ resid) / sst
    return FitnessAdvantage(slope, intercept, r2)


_GBM_MAX_RESAMPLES = 100


def gbm_simulate(params: GbmParams, horizon: float, dt: float, seed) -> np.ndarray:
    """One multiplicative-growth path, mu[0] = mu0, length round(horizon/dt)+1.

    Multipliers 1 + f*dt + sigma'*sqrt(dt)*xi are resampled when nonpositive
    (the continuous process never crosses zero); a hundred rejections of the
    same step mean dt is far too coarse for the volatility and raise.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("horizon and dt must be positive")
    rng = np.random.default_rng(seed)
    n_steps = int(round(horizon / dt))
    drift = params.mean_growth * dt
    vol = params.sigma_prime * math.sqrt(dt)
    mult = 1.0 + drift + vol * rng.standard_normal(n_steps)
    bad = mult <= 0.0
    tries = 0
    while bad.any():
        tries += 1
        if tries > _GBM_MAX_RESAMPLES:
            raise ModelDomainError(
                "multiplier stayed nonpositive after "
                f"{_GBM_MAX_RESAMPLES} resamples; decrease dt"
            )
        mult[bad] = 1.0 + drift + vol * rng.standard_normal(int(bad.sum()))
        bad = mult <= 0.0
    out = np.empty(n_steps + 1)
    out[0] = params.mu0
    np.cumprod(mult, out=out[1:])
    out[1:] *= params.mu0
    return out


def gbm_ensemble(params: GbmParams, horizon: float, dt: float, n_paths: int,
                 seed, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Independent paths with per-path derived seeds.

    Path k uses generator seed (seed, k), so the result is independent of the
    thread count; threads only parallelize the work.
    Returns (times, paths) with paths shaped (n_paths, n_steps + 1).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    n_steps = int(round(horizon / dt))
    times = np.arange(n_steps + 1) * dt

    def one(k: int) -> np.ndarray:
        return gbm_simulate(params, horizon, dt, seed=[seed, k])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            paths = list(pool.map(one, range(n_paths)))
    else:
        paths = [one(k) for k in range(n_paths)]
    return times, np.vstack(paths)


def lognormal_pdf(mu, rho: float, omega: float, mu0: float):
    """Terminal mean-price density exp(-(ln(mu/mu0)-rho)^2/(2 omega^2)) / (sqrt(2 pi) omega mu)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    if mu0 <= 0:
        raise ValueError("mu0 must be positive")
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise ValueError("mu must be positive")
    x = np.log(mu / mu0) - rho
    return np.exp(-x * x / (2.0 * omega**2)) / (math.sqrt(2.0 * math.pi) * omega * mu)
