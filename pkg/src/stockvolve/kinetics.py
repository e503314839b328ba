"""Fast-timescale purchase kinetics on a price grid.

Demanded units n(p) grow with the demand rate and shrink with purchases;
supplied units z(p) grow with the supply rate and shrink with purchases.
Purchases follow mass action, y(p) = eta * n(p) * z(p), so the stationary
state satisfies D = S = y pointwise.  Explicit Euler with the step bound
dtau <= 0.1/(eta*(max n + max z)) is sufficient because the only stiffness
scale is the linearized relaxation rate eta*(n0 + z0).
"""

import io
from dataclasses import dataclass, replace

import numpy as np

from .errors import NoStationaryState, NotConverged, StepTooLarge
from .grid import PriceGrid

__all__ = [
    "MarketState",
    "StabilityReport",
    "purchase_rate",
    "max_stable_step",
    "step",
    "relax",
    "stationarity_residual",
    "stability_eigenvalues",
    "totals",
    "write_state_csv",
    "read_state_csv",
    "STATE_CSV_HEADER",
]

STATE_CSV_HEADER = "p,n,z,D,S,y"

# Euler steps may undershoot zero by a few ulps; anything worse means the
# step size was too large for the current state.
_CLAMP_FACTOR = 10.0


@dataclass(frozen=True)
class MarketState:
    """Demanded/supplied unit counts and their generation rates on a grid."""

    grid: PriceGrid
    n: np.ndarray
    z: np.ndarray
    demand_rate: np.ndarray
    supply_rate: np.ndarray
    eta: float

    def __post_init__(self):
        for name in ("n", "z", "demand_rate", "supply_rate"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (self.grid.n_points,):
                raise ValueError(f"{name} must have one value per grid point")
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


@dataclass(frozen=True)
class StabilityReport:
    """Eigenvalues of the kinetics linearized at a uniform stationary node.

    The analytic pair is (-eta*(n0 + z0), 0).  The zero eigenvalue direction
    (delta_n = -delta_z rescaled) is only marginal under linearization; the
    quadratic term -eta*dn*dz makes the stationary state attracting, so the
    overall classification is "stable" whenever n0 + z0 > 0 and "marginal"
    only for the empty market n0 = z0 = 0.
    """

    lambda_negative: float
    lambda_zero: float
    numeric_eigenvalues: tuple[float, float]
    classification: str


def purchase_rate(state: MarketState) -> np.ndarray:
    """Mass-action purchase rate y(p) = eta * n(p) * z(p)."""
    return state.eta * state.n * state.z


def max_stable_step(state: MarketState) -> float:
    """Largest explicit-Euler step honoring the relaxation-rate bound."""
    scale = state.eta * (state.n.max() + state.z.max())
    if scale <= 0:
        return np.inf
    return 0.1 / scale


def step(state: MarketState, dtau: float) -> MarketState:
    """One explicit Euler step of the conservation laws.

    Raises StepTooLarge when a pre-clamp value drops further below zero than
    float rounding can explain.
    """
    if dtau <= 0:
        raise ValueError(f"dtau must be positive, got {dtau}")
    y = purchase_rate(state)
    n_new = state.n + dtau * (state.demand_rate - y)
    z_new = state.z + dtau * (state.supply_rate - y)
    scale = max(state.n.max(), state.z.max(), 1.0)
    floor = -_CLAMP_FACTOR * np.finfo(float).eps * scale
    worst = min(n_new.min(), z_new.min())
    if worst < floor:
        raise StepTooLarge(
            f"step dtau={dtau:g} drives units to {worst:.3g} "
            f"(allowed rounding floor {floor:.3g}); reduce dtau"
        )
    return replace(state, n=np.maximum(n_new, 0.0), z=np.maximum(z_new, 0.0))


def stationarity_residual(state: MarketState) -> float:
    """Relative sup-norm of (D - y) and (S - y); zero at the fixed point."""
    y = purchase_rate(state)
    res = 0.0
    for rate in (state.demand_rate, state.supply_rate):
        scale = rate.max()
        gap = np.abs(rate - y).max()
        res = max(res, gap / scale if scale > 0 else gap)
    return float(res)


def relax(state: MarketState, tol: float = 1e-8, max_steps: int = 100_000,
          trace: list | None = None) -> MarketState:
    """Integrate to the stationary state D = S = y within relative tol.

    Requires D and S equal pointwise (within tol relative to max D): the
    conservation laws have no fixed point otherwise.  If `trace` is a list,
    (step_index, residual) pairs are appended every step.
    """
    D, S = state.demand_rate, state.supply_rate
    d_scale = D.max() if D.max() > 0 else 1.0
    if np.abs(D - S).max() / d_scale > tol:
        raise NoStationaryState(
            "demand and supply rates differ pointwise by "
            f"{np.abs(D - S).max() / d_scale:.3g} (relative), beyond tol={tol:g}; "
            "the kinetics admit no stationary state"
        )
    current = state
    res = stationarity_residual(current)
    if trace is not None:
        trace.append((0, res))
    for k in range(1, max_steps + 1):
        if res <= tol:
            return current
        current = step(current, max_stable_step(current))
        res = stationarity_residual(current)
        if trace is not None:
            trace.append((k, res))
    if res <= tol:
        return current
    raise NotConverged(
        f"residual {res:.3g} > tol {tol:g} after {max_steps} steps"
    )


def stability_eigenvalues(n0: float, z0: float, eta: float) -> StabilityReport:
    """Linear stability of the stationary node (n0, z0).

    Assembles the 2x2 Jacobian of the perturbation dynamics
    d(dn)/dtau = d(dz)/dtau = -eta*(z0*dn + n0*dz) and reports its
    eigenvalues next to the analytic pair (-eta*(n0+z0), 0).
    """
    if n0 < 0 or z0 < 0:
        raise ValueError("n0 and z0 must be nonnegative")
    if eta <= 0:
        raise ValueError("eta must be positive")
    jac = np.array([[-eta * z0, -eta * n0],
                    [-eta * z0, -eta * n0]])
    eig = np.sort(np.linalg.eigvals(jac).real)
    classification = "stable" if n0 + z0 > 0 else "marginal"
    return StabilityReport(
        lambda_negative=-eta * (z0 + n0),
        lambda_zero=0.0,
        numeric_eigenvalues=(float(eig[0]), float(eig[1])),
        classification=classification,
    )


def totals(state: MarketState) -> tuple[float, float, float]:
    """Trapezoidal totals (n_total, z_total, y_total) over the grid."""
    p = state.grid.points
    return (
        float(np.trapezoid(state.n, p)),
        float(np.trapezoid(state.z, p)),
        float(np.trapezoid(purchase_rate(state), p)),
    )


def write_state_csv(state: MarketState, path_or_file) -> None:
    """Snapshot columns p,n,z,D,S,y with 17 significant digits."""
    y = purchase_rate(state)
    cols = (state.grid.points, state.n, state.z,
            state.demand_rate, state.supply_rate, y)

    def _write(fh):
        fh.write(STATE_CSV_HEADER + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    if hasattr(path_or_file, "write"):
        _write(path_or_file)
    else:
        with open(path_or_file, "w") as fh:
            _write(fh)


def read_state_csv(path_or_file, eta: float | None = None) -> MarketState:
    """Rebuild a MarketState from its CSV snapshot.

    The snapshot carries no eta column; unless given explicitly, eta is
    recovered as the median of y/(n*z) over nodes where n*z > 0.
    """
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[1] != 6:
        raise ValueError(f"expected 6 columns ({STATE_CSV_HEADER}), got {rows.shape[1]}")
    p, n, z, D, S, y = rows.T
    dp = np.diff(p)
    if not np.allclose(dp, dp[0], rtol=1e-9, atol=1e-12):
        raise ValueError("price column is not a uniform grid")
    grid = PriceGrid(p_min=float(p[0]), p_max=float(p[-1]), n_points=len(p))
    if eta is None:
        mask = n * z > 0
        if not mask.any():
            raise ValueError("cannot infer eta: n*z vanishes everywhere; pass eta=")
        eta = float(np.median(y[mask] / (n[mask] * z[mask])))
    return MarketState(grid=grid, n=n, z=z, demand_rate=D, supply_rate=S, eta=eta)
