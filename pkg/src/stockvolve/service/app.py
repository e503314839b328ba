"""FastAPI application wrapping the library.

Endpoint map:

    GET  /health
    POST /simulate/kinetics    relax purchase kinetics to the stationary state
    POST /simulate/market      replicator ensemble and/or GBM mean-price paths
    POST /fit/returns          maximum-likelihood fits of return distributions
    POST /analyze/fisher-pry   relative-price trend segmentation

Library input errors map to HTTP 400, model-domain errors (no stationary
state, degenerate fits, ...) to HTTP 409; both carry {"code", "message"}.
Schema violations are FastAPI's usual 422.
"""

import datetime as _dt

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from .. import __version__, analysis, evolution, kinetics, price_dist, returns
from ..errors import InputError, ModelDomainError, StockvolveError
from ..grid import PriceGrid
from ..svgplot import line_chart_svg
from . import schemas as sch

__all__ = ["app", "create_app"]


def _http_error(exc: StockvolveError) -> HTTPException:
    status = 409 if isinstance(exc, ModelDomainError) else 400
    return HTTPException(
        status_code=status,
        detail={"code": type(exc).__name__, "message": str(exc)},
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="stockvolve",
        version=__version__,
        description="Evolutionary stock-market simulation and analysis service",
    )

    @app.exception_handler(StockvolveError)
    async def _domain_error(request, exc: StockvolveError):
        # safety net for library errors escaping outside the run_* wrappers
        http = _http_error(exc)
        return JSONResponse(status_code=http.status_code,
                            content={"detail": http.detail})

    @app.get("/health", response_model=sch.HealthResponse)
    def health():
        return sch.HealthResponse(status="ok", version=__version__)

    @app.post("/simulate/kinetics", response_model=sch.KineticsResponse)
    def simulate_kinetics(req: sch.KineticsRequest):
        return run_kinetics(req)

    @app.post("/simulate/market", response_model=sch.MarketResponse)
    def simulate_market(req: sch.MarketRequest):
        return run_market(req)

    @app.post("/fit/returns", response_model=sch.FitResponse)
    def fit_returns(req: sch.FitRequest):
        return run_fit(req)

    @app.post("/analyze/fisher-pry", response_model=sch.FisherPryResponse)
    def fisher_pry(req: sch.FisherPryRequest):
        return run_fisher_pry(req)

    return app


# The run_* functions hold the actual wiring so tests and the CLI's
# in-process mode can reuse them without spinning up HTTP.

def run_kinetics(req: sch.KineticsRequest) -> sch.KineticsResponse:
    try:
        grid = PriceGrid(req.grid.p_min, req.grid.p_max, req.grid.n_points)
        model = price_dist.LogisticPriceModel(
            mu=req.model.mu, mu_m=req.model.mu_m, eps=req.model.eps)
        curves = price_dist.build_curves(model, req.n_total, req.z_total, grid)
        n = curves.demand_units
        z = curves.supply_units
        rates = req.eta * n * z
        state = kinetics.MarketState(
            grid=grid, n=n * req.start_scale, z=z * req.start_scale,
            demand_rate=rates * req.demand_scale,
            supply_rate=rates * req.supply_scale,
            eta=req.eta)
        trace: list[tuple[int, float]] = []
        final = kinetics.relax(state, tol=req.tol, max_steps=req.max_steps,
                               trace=trace)
        n_tot, z_tot, y_tot = kinetics.totals(final)
        # eigenvalues at the per-unit-price scale of the equilibrium node
        p_star = price_dist.intersection_price_from_units(
            grid.points, final.n, final.z)
        k = int(np.argmin(np.abs(grid.points - p_star)))
        stab = kinetics.stability_eigenvalues(
            float(final.n[k]), float(final.z[k]), final.eta)
    except StockvolveError as exc:
        raise _http_error(exc) from exc

    kept = [pt for i, pt in enumerate(trace)
            if i % req.record_every == 0 or i == len(trace) - 1]
    return sch.KineticsResponse(
        state=sch.StateSnapshot(
            p=grid.points.tolist(),
            n=final.n.tolist(),
            z=final.z.tolist(),
            demand_rate=final.demand_rate.tolist(),
            supply_rate=final.supply_rate.tolist(),
            purchase_rate=kinetics.purchase_rate(final).tolist(),
        ),
        residual_trace=[sch.ResidualPoint(step=s, residual=r) for s, r in kept],
        steps_taken=trace[-1][0] if trace else 0,
        final_residual=kinetics.stationarity_residual(final),
        stability=sch.StabilityModel(
            lambda_negative=stab.lambda_negative,
            lambda_zero=stab.lambda_zero,
            numeric_eigenvalues=stab.numeric_eigenvalues,
            classification=stab.classification,
        ),
        n_total=n_tot, z_total=z_tot, y_total=y_tot,
        intersection_price=p_star,
    )


def _phase_fitness(phases: list[sch.FitnessPhase]):
    """Piecewise-constant fitness lookup; the last phase extends to infinity."""
    bounds = [p.until for p in phases]
    tables = [np.asarray(p.rates, dtype=float) for p in phases]

    def fitness(t: float) -> np.ndarray:
        for bound, rates in zip(bounds, tables):
            if t < bound:
                return rates
        return tables[-1]

    return fitness


def run_market(req: sch.MarketRequest) -> sch.MarketResponse:
    rep_out = None
    gbm_out = None
    try:
        if req.replicator is not None:
            spec = req.replicator
            n_steps = int(round(spec.horizon / spec.dt))
            fitness_fn = _phase_fitness(spec.phases)
            ens = evolution.MarketEnsemble(
                mu=np.asarray(spec.mu0, dtype=float), fitness=fitness_fn(0.0))
            constant = len(spec.phases) == 1
            t, mu, w = evolution.run_replicator(
                ens, dt=spec.dt, n_steps=n_steps,
                fitness_fn=None if constant else fitness_fn,
                record_every=spec.record_every)
            rep_out = sch.ReplicatorTrajectory(
                t=t.tolist(), mu=mu.tolist(), w=w.tolist())
        if req.gbm is not None:
            g = req.gbm
            params = evolution.GbmParams(
                mean_growth=g.mean_growth, sigma_prime=g.sigma_prime, mu0=g.mu0)
            t, paths = evolution.gbm_ensemble(
                params, horizon=g.horizon, dt=g.dt, n_paths=g.n_paths,
                seed=req.seed, threads=req.threads)
            keep = np.arange(0, t.size, g.record_every)
            if keep[-1] != t.size - 1:
                keep = np.append(keep, t.size - 1)
            gbm_out = sch.GbmTrajectories(
                t=t[keep].tolist(), paths=paths[:, keep].tolist())
    except StockvolveError as exc:
        raise _http_error(exc) from exc
    return sch.MarketResponse(replicator=rep_out, gbm=gbm_out)


def run_fit(req: sch.FitRequest) -> sch.FitResponse:
    try:
        if req.data.returns is not None:
            values = np.asarray(req.data.returns, dtype=float)
        else:
            values = returns.log_returns(req.data.prices, step=req.data.step).values
        fits = []
        for family in req.families:
            init = None
            if family == "gauss_laplace_sum":
                init = returns.GaussLaplaceSum(theta=req.theta, rho=0.0,
                                               omega=1.0, q=1.0)
            fits.append(returns.fit_mle(values, family, init=init))
        fits.sort(key=lambda f: f.aic)
        centers, emp = returns.binned_density(values - values.mean(),
                                              n_bins=req.n_bins)
        fitted = {f.spec.family: f.spec.pdf(centers).tolist() for f in fits}
    except StockvolveError as exc:
        raise _http_error(exc) from exc
    return sch.FitResponse(
        fits=[sch.FitModel(
            family=f.spec.family,
            params={k: float(v) for k, v in f.spec.params().items()},
            log_likelihood=f.log_likelihood,
            aic=f.aic, bic=f.bic, iterations=f.iterations,
            converged=f.converged, skewness=f.skewness,
            n_observations=f.n_observations,
        ) for f in fits],
        density=sch.DensityTable(
            bin_center=centers.tolist(), empirical=emp.tolist(), fitted=fitted),
    )


def _parse_series(payload: sch.SeriesPayload) -> analysis.PriceSeries:
    try:
        dates = [_dt.date.fromisoformat(d) for d in payload.dates]
    except ValueError as exc:
        raise InputError(f"bad date in series {payload.label!r}: {exc}") from exc
    order = ("sorted" if all(a < b for a, b in zip(dates, dates[1:]))
             else "unsorted")
    if order == "unsorted":
        pairs = sorted(zip(dates, payload.prices), key=lambda x: x[0])
        dates = [d for d, _ in pairs]
        prices = [p for _, p in pairs]
    else:
        prices = payload.prices
    try:
        return analysis.PriceSeries(dates=dates, prices=prices,
                                    label=payload.label)
    except ValueError as exc:
        raise InputError(f"series {payload.label!r}: {exc}") from exc


def run_fisher_pry(req: sch.FisherPryRequest) -> sch.FisherPryResponse:
    try:
        stock = _parse_series(req.stock)
        index = _parse_series(req.index)
        stock_a, index_a = analysis.align(stock, index)
        w = analysis.relative_price(stock_a, index_a)
        y = analysis.fisher_pry_transform(w)
        t = analysis.years_from_dates(stock_a.dates)
        seg = req.segmentation
        segments = analysis.segment_trends(
            y, t, max_segments=seg.max_segments, penalty=seg.penalty,
            min_segment_length=seg.min_segment_length,
            refine_breakpoints=seg.refine_breakpoints)
        report = analysis.trend_report(segments, dates=stock_a.dates,
                                       label=stock_a.label or "stock",
                                       neutral_threshold=seg.neutral_threshold)
    except StockvolveError as exc:
        raise _http_error(exc) from exc

    fitted = np.empty_like(y)
    for s in segments:
        sl = slice(s.start_index, s.end_index)
        fitted[sl] = s.intercept + s.slope * t[sl]
    svg = None
    if req.include_svg:
        overlays = [("data", t.tolist(), y.tolist())]
        for k, s in enumerate(segments, start=1):
            sl = slice(s.start_index, s.end_index)
            overlays.append((f"segment {k}", t[sl].tolist(), fitted[sl].tolist()))
        svg = line_chart_svg(overlays, title=report["label"],
                             x_label="time [years]",
                             y_label="ln(relative price)")
    return sch.FisherPryResponse(
        label=report["label"],
        n_aligned=len(stock_a),
        segments=[sch.SegmentModel(
            start_index=e["start_index"],
            end_index=e["end_index"],
            start_date=e["start_date"],
            end_date=e["end_date"],
            fitness_advantage_per_year=e["fitness_advantage_per_year"],
            intercept=e["intercept"],
            r_squared=e["r_squared"],
            classification=e["classification"],
        ) for e in report["segments"]],
        plot=sch.FisherPryPlot(
            dates=[d.isoformat() for d in stock_a.dates],
            t_years=t.tolist(),
            log_relative_price=y.tolist(),
            fitted=fitted.tolist(),
        ),
        svg=svg,
    )


app = create_app()
