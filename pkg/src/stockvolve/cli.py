"""Batch command-line client of the stockvolve service.

The CLI owns all file I/O: it reads local CSVs into inline request payloads,
posts them to the service (in-process by default, or a remote instance via
--server), and writes the response out as CSV/JSON/SVG artifacts.  Identical
config and seed produce byte-identical outputs.

Exit codes: 0 success, 1 config or I/O error, 2 model-domain error.
"""

import argparse
import copy
import json
import os
import sys
from pathlib import Path

from . import __version__, analysis, returns

_EXIT_OK = 0
_EXIT_CONFIG = 1
_EXIT_DOMAIN = 2


class _CliError(Exception):
    """Config or I/O problem; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; 2 is reserved for
    # model-domain errors here, so remap usage problems to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_EXIT_CONFIG)


_DEFAULTS = {
    "simulate-kinetics": {
        "grid": {"p_min": 0.0, "p_max": 300.0, "n_points": 512},
        "model": {"mu": 100.0, "mu_m": 1.0, "eps": 1e-8},
        "n_total": 1e6,
        "z_total": 1e6,
        "eta": 1.0,
        "tol": 1e-8,
        "max_steps": 100000,
        "record_every": 10,
        "demand_scale": 1.0,
        "supply_scale": 1.0,
    },
    "simulate-market": {
        "seed": 0,
        "threads": 1,
        "replicator": {
            "mu0": [100.0, 100.0],
            "phases": [{"until": 100.0, "rates": [0.02, 0.0]}],
            "dt": 0.001,
            "horizon": 100.0,
            "record_every": 100,
        },
    },
    "fit-returns": {
        "input": {"path": None, "kind": "prices", "date_column": "Date",
                  "price_column": "Close", "step": 1},
        "families": ["ged", "laplace", "normal"],
        "theta": 0.5,
        "n_bins": 60,
    },
    "fisher-pry": {
        "stock": {"path": None, "label": "", "date_column": "Date",
                  "price_column": "Close"},
        "index": {"path": None, "label": "", "date_column": "Date",
                  "price_column": "Close"},
        "segmentation": {"max_segments": 8, "penalty": None,
                         "min_segment_length": 60, "refine_breakpoints": True,
                         "neutral_threshold": 0.01},
        "svg": False,
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stockvolve",
                     description="Evolutionary stock-market simulation toolkit")
    parser.add_argument("--version", action="version",
                        version=f"stockvolve {__version__}")
    parser.add_argument("--server", metavar="URL", default=None,
                        help="remote service URL (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate-kinetics", "relax purchase kinetics to the stationary state"),
        ("simulate-market", "replicator ensemble and/or GBM price paths"),
        ("fit-returns", "fit return distributions by maximum likelihood"),
        ("fisher-pry", "segment relative-price trends"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="JSON run configuration (defaults used if omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the run seed")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (fallback: $STOCKVOLVE_OUT, then .)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for independent replicas")
        p.add_argument("--set", metavar="KEY=VALUE", action="append",
                       dest="overrides", default=[],
                       help="override a config entry, e.g. --set model.mu=120")
    return parser


def _deep_merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_override(config: dict, item: str) -> None:
    if "=" not in item:
        raise _CliError(f"--set needs KEY=VALUE, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.split(".")
    for part in parts[:-1]:
        nxt = node.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            node[part] = nxt
        node = nxt
    node[parts[-1]] = value


def _load_config(args) -> dict:
    config = copy.deepcopy(_DEFAULTS[args.command])
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise _CliError(f"config file not found: {path}")
        try:
            user = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise _CliError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise _CliError(f"config {path} must hold a JSON object")
        config = _deep_merge(config, user)
    for item in args.overrides:
        _apply_override(config, item)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    return config


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("STOCKVOLVE_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(client, path: str, payload: dict) -> dict:
    try:
        resp = client.post(path, json=payload)
    except Exception as exc:  # connection problems on remote servers
        raise _CliError(f"request to {path} failed: {exc}") from exc
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail")
    except Exception:
        detail = resp.text
    if resp.status_code == 409 and isinstance(detail, dict):
        print(f"error [{detail.get('code')}]: {detail.get('message')}",
              file=sys.stderr)
        raise SystemExit(_EXIT_DOMAIN)
    print(f"error (HTTP {resp.status_code}): {detail}", file=sys.stderr)
    raise SystemExit(_EXIT_CONFIG)


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


# --- commands ---

def _cmd_simulate_kinetics(config: dict, client, out: Path) -> int:
    body = _post(client, "/simulate/kinetics", config)
    state = body["state"]
    _write_csv(out / "state.csv", ["p", "n", "z", "D", "S", "y"],
               zip(state["p"], state["n"], state["z"], state["demand_rate"],
                   state["supply_rate"], state["purchase_rate"]))
    _write_csv(out / "residuals.csv", ["step", "residual"],
               ((pt["step"], float(pt["residual"]))
                for pt in body["residual_trace"]))
    _write_json(out / "stability.json", {
        "stability": body["stability"],
        "steps_taken": body["steps_taken"],
        "final_residual": body["final_residual"],
        "totals": {"n_total": body["n_total"], "z_total": body["z_total"],
                   "y_total": body["y_total"]},
        "intersection_price": body["intersection_price"],
    })
    print(f"stationary after {body['steps_taken']} steps, "
          f"residual {body['final_residual']:.3e}; "
          f"equilibrium price {body['intersection_price']:.6g}")
    print(f"wrote {out / 'state.csv'}, {out / 'residuals.csv'}, "
          f"{out / 'stability.json'}")
    return _EXIT_OK


def _cmd_simulate_market(config: dict, client, out: Path) -> int:
    body = _post(client, "/simulate/market", config)
    wrote = []
    rep = body.get("replicator")
    if rep:
        n_stocks = len(rep["mu"][0])
        header = (["t"] + [f"mu_{j + 1}" for j in range(n_stocks)]
                  + [f"w_{j + 1}" for j in range(n_stocks)])
        rows = ([t] + list(map(float, mu)) + list(map(float, w))
                for t, mu, w in zip(rep["t"], rep["mu"], rep["w"]))
        _write_csv(out / "market.csv", header, rows)
        wrote.append(out / "market.csv")
    gbm = body.get("gbm")
    if gbm:
        n_paths = len(gbm["paths"])
        header = ["t"] + [f"path_{k + 1}" for k in range(n_paths)]
        columns = [gbm["t"]] + gbm["paths"]
        _write_csv(out / "gbm.csv", header, zip(*columns))
        wrote.append(out / "gbm.csv")
    print("wrote " + ", ".join(str(p) for p in wrote))
    return _EXIT_OK


def _read_fit_input(config: dict) -> dict:
    spec = config.get("input") or {}
    path = spec.get("path")
    if not path:
        raise _CliError("fit-returns needs input.path in the config")
    if not Path(path).exists():
        raise _CliError(f"input file not found: {path}")
    kind = spec.get("kind", "prices")
    if kind == "prices":
        series = analysis.load_price_csv(
            path, date_column=spec.get("date_column", "Date"),
            price_column=spec.get("price_column", "Close"))
        return {"prices": series.prices.tolist(),
                "step": int(spec.get("step", 1))}
    if kind == "returns":
        series = returns.read_returns_csv(path)
        return {"returns": series.values.tolist()}
    raise _CliError(f"input.kind must be 'prices' or 'returns', got {kind!r}")


def _cmd_fit_returns(config: dict, client, out: Path) -> int:
    payload = {
        "data": _read_fit_input(config),
        "families": config["families"],
        "theta": config.get("theta", 0.5),
        "n_bins": config.get("n_bins", 60),
    }
    body = _post(client, "/fit/returns", payload)
    _write_json(out / "fits.json", body["fits"])
    density = body["density"]
    families = sorted(density["fitted"])
    header = ["bin_center", "empirical"] + families
    rows = ([c, e] + [density["fitted"][f][i] for f in families]
            for i, (c, e) in enumerate(zip(density["bin_center"],
                                           density["empirical"])))
    _write_csv(out / "density.csv", header, rows)
    best = body["fits"][0]
    print(f"best fit by AIC: {best['family']} "
          + " ".join(f"{k}={v:.6g}" for k, v in sorted(best["params"].items())))
    print(f"wrote {out / 'fits.json'}, {out / 'density.csv'}")
    return _EXIT_OK


def _read_series_payload(spec: dict, role: str) -> dict:
    path = spec.get("path")
    if not path:
        raise _CliError(f"fisher-pry needs {role}.path in the config")
    if not Path(path).exists():
        raise _CliError(f"{role} file not found: {path}")
    series = analysis.load_price_csv(
        path, date_column=spec.get("date_column", "Date"),
        price_column=spec.get("price_column", "Close"),
        label=spec.get("label") or Path(path).stem)
    return {
        "label": series.label,
        "dates": [d.isoformat() for d in series.dates],
        "prices": series.prices.tolist(),
    }


def _cmd_fisher_pry(config: dict, client, out: Path) -> int:
    payload = {
        "stock": _read_series_payload(config.get("stock", {}), "stock"),
        "index": _read_series_payload(config.get("index", {}), "index"),
        "segmentation": {k: v for k, v in (config.get("segmentation") or {}).items()
                         if v is not None},
        "include_svg": bool(config.get("svg", False)),
    }
    body = _post(client, "/analyze/fisher-pry", payload)
    _write_json(out / "trends.json", {
        "label": body["label"],
        "n_aligned": body["n_aligned"],
        "segments": body["segments"],
    })
    plot = body["plot"]
    _write_csv(out / "fisher_pry.csv", ["date", "t_years", "log_w", "fitted"],
               zip(plot["dates"], map(float, plot["t_years"]),
                   map(float, plot["log_relative_price"]),
                   map(float, plot["fitted"])))
    wrote = [out / "trends.json", out / "fisher_pry.csv"]
    if body.get("svg"):
        (out / "fisher_pry.svg").write_text(body["svg"])
        wrote.append(out / "fisher_pry.svg")
    for seg in body["segments"]:
        print(f"{seg['start_date']} .. {seg['end_date']}: "
              f"df={seg['fitness_advantage_per_year']:+.4f}/yr "
              f"({seg['classification']}, R2={seg['r_squared']:.3f})")
    print("wrote " + ", ".join(str(p) for p in wrote))
    return _EXIT_OK


_COMMANDS = {
    "simulate-kinetics": _cmd_simulate_kinetics,
    "simulate-market": _cmd_simulate_market,
    "fit-returns": _cmd_fit_returns,
    "fisher-pry": _cmd_fisher_pry,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        config = _load_config(args)
        out = _out_dir(args)
        client = _make_client(args.server)
        try:
            return _COMMANDS[args.command](config, client, out)
        finally:
            client.close()
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else _EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except Exception as exc:  # library errors reached without HTTP mapping
        from .errors import ModelDomainError

        if isinstance(exc, ModelDomainError):
            print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
            return _EXIT_DOMAIN
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
