"""Batch command line front end.

Subcommands cover the full pipeline: fit marginals and a copula from a CSV,
sample correlated events, summarize tail risk, optimize positions under the
tail constraint, simulate/fit/check the regional EEG model, and join
indicator streams from several collection methods.

Every command is deterministic given (inputs, config, seed); reruns write
byte-identical files. Exit codes: 0 success, 2 input or config parse,
3 degenerate data, 4 ill-conditioned correlation, 5 infeasible constraint,
10 internal failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import eeg, indicators
from .anneal import AnnealConfig
from .copula import CopulaModel, estimate_correlation, to_gaussian
from .errors import (ConstraintUnsatisfiable, DegenerateData, DegenerateVariance,
                     EngineError, IllConditioned, InvalidBounds, LengthMismatch,
                     NotPositiveDefinite, OutOfDomain, ParseError, WindowTooShort)
from .events import sample_events
from .marginals import fit_exponential
from .modelfile import (anneal_config_from_dict, ensure_out_dir, fmt, load_json,
                        load_model, load_net, read_series_csv, save_json,
                        save_model, save_net, write_bins_csv, write_events_csv,
                        write_series_csv)
from .risk import (ContractPortfolio, LinearPortfolio, RiskConfig,
                   optimize_positions, portfolio_returns, risk_report)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_ILL_CONDITIONED = 4
EXIT_INFEASIBLE = 5
EXIT_INTERNAL = 10


def exit_code_for(exc: Exception) -> int:
    if isinstance(exc, (ParseError, WindowTooShort, LengthMismatch,
                        OutOfDomain, InvalidBounds)):
        return EXIT_PARSE
    if isinstance(exc, (DegenerateData, DegenerateVariance)):
        return EXIT_DEGENERATE
    if isinstance(exc, (IllConditioned, NotPositiveDefinite)):
        return EXIT_ILL_CONDITIONED
    if isinstance(exc, ConstraintUnsatisfiable):
        return EXIT_INFEASIBLE
    return EXIT_INTERNAL


def _config_of(args) -> dict:
    if args.config is None:
        return {}
    cfg = load_json(args.config)
    if not isinstance(cfg, dict):
        raise ParseError(f"{args.config}: config must be a JSON object")
    return cfg


def _anneal_config(block: dict | None, seed: int) -> AnnealConfig:
    cfg = anneal_config_from_dict(block or {})
    if block is None or "seed" not in block:
        cfg = AnnealConfig(**{**cfg.__dict__, "seed": seed})
    return cfg


# ------------------------------------------------------------------ commands

def cmd_fit_marginals(args) -> int:
    cfg = _config_of(args)
    out = ensure_out_dir(args.out)
    names, data = read_series_csv(args.csv)
    window = cfg.get("marginal_window")
    if window is not None:
        window = int(window)
        if window < 2:
            raise ParseError("marginal_window must be >= 2")
        data = data[-window:]
    asymmetric = bool(cfg.get("asymmetric", False))
    marginals = []
    for i, name in enumerate(names):
        try:
            marginals.append(fit_exponential(data[:, i], asymmetric=asymmetric))
        except DegenerateData as exc:
            raise DegenerateData(f"channel {name!r}: {exc}") from exc
    y = np.stack([to_gaussian(mg, data[:, i]) for i, mg in enumerate(marginals)],
                 axis=0)
    corr = estimate_correlation(
        y, pre_average_window=int(cfg.get("pre_average_window", 3)))
    model = CopulaModel(marginals=tuple(marginals), correlation=corr,
                        channels=tuple(names))
    save_model(os.path.join(out, "model.json"), model)
    print(f"fitted {len(names)} channel(s) from {data.shape[0]} rows")
    for name, mg in zip(names, marginals):
        print(f"  {name}: m={fmt(mg.m)} chi={fmt(mg.chi)}")
    print(f"wrote {os.path.join(out, 'model.json')}")
    return EXIT_OK


def cmd_sample(args) -> int:
    out = ensure_out_dir(args.out)
    model = load_model(args.model)
    if args.n < 1:
        raise ParseError("--n must be >= 1")
    batch = sample_events(model, args.n, args.seed, lanes=args.lanes,
                          parallel=args.lanes > 1)
    path = os.path.join(out, "events.csv")
    write_events_csv(path, batch)
    print(f"sampled {batch.n} events x {len(model.channels)} channel(s)")
    print(f"wrote {path}")
    return EXIT_OK


def _parse_weights(text: str | None, dim: int) -> tuple[float, ...]:
    if text is None:
        return tuple(1.0 for _ in range(dim))
    try:
        weights = tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise ParseError(f"bad --weights value: {exc}") from exc
    if len(weights) != dim:
        raise ParseError(f"--weights needs {dim} value(s), got {len(weights)}")
    return weights


def cmd_risk(args) -> int:
    out = ensure_out_dir(args.out)
    model = load_model(args.model)
    dim = len(model.channels)
    weights = _parse_weights(args.weights, dim)
    config = RiskConfig(var_level=args.var, q_target=args.q)
    batch = sample_events(model, args.n, args.seed)
    dm = portfolio_returns(batch, LinearPortfolio(weights=weights,
                                                  offsets=(0.0,) * dim))
    report, dist = risk_report(dm, config)
    save_json(os.path.join(out, "risk.json"), {
        "kind": "risk_report",
        "mean": report.mean, "width": report.width,
        "q_analytic": report.q_analytic, "q_empirical": report.q_empirical,
        "expected_tail_loss": report.expected_tail_loss,
        "var_level": report.var_level, "q_target": report.q_target,
        "n": report.n, "weights": list(weights),
    })
    write_bins_csv(os.path.join(out, "bins.csv"), dist)
    print(f"portfolio over {report.n} events: mean={fmt(report.mean)} "
          f"width={fmt(report.width)}")
    print(f"  q_analytic={fmt(report.q_analytic)} "
          f"q_empirical={fmt(report.q_empirical)}")
    print(f"wrote {os.path.join(out, 'risk.json')} and "
          f"{os.path.join(out, 'bins.csv')}")
    return EXIT_OK


def _template_of(cfg: dict, dim: int):
    block = cfg.get("template", {"type": "linear"})
    kind = block.get("type", "linear")
    if kind == "linear":
        offsets = block.get("offsets", [0.0] * dim)
        if len(offsets) != dim:
            raise ParseError(f"template offsets need {dim} value(s)")
        return LinearPortfolio(weights=(0.0,) * dim,
                               offsets=tuple(float(v) for v in offsets))
    if kind == "contracts":
        try:
            counts = (0.0,) * dim
            prices = tuple(float(v) for v in block["prices"])
            entry = tuple(float(v) for v in block["entry_prices"])
            cash = float(block["cash"])
        except KeyError as exc:
            raise ParseError(f"contracts template missing {exc.args[0]!r}") from exc
        prev = block.get("prev_counts")
        return ContractPortfolio(
            counts=counts, prices=prices, entry_prices=entry, cash=cash,
            prev_counts=None if prev is None else tuple(float(v) for v in prev),
            slippage=float(block.get("slippage", 0.0)))
    raise ParseError(f"unknown template type {kind!r}")


def cmd_optimize(args) -> int:
    cfg = _config_of(args)
    out = ensure_out_dir(args.out)
    model = load_model(args.model)
    dim = len(model.channels)
    template = _template_of(cfg, dim)
    try:
        bounds = [(float(lo), float(hi)) for lo, hi in cfg["bounds"]]
    except KeyError:
        raise ParseError("optimize config must provide 'bounds'") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad bounds block: {exc}") from exc
    if len(bounds) != dim:
        raise ParseError(f"bounds need {dim} pair(s), got {len(bounds)}")
    risk_block = cfg.get("risk", {})
    risk_cfg = RiskConfig(
        var_level=float(risk_block.get("var_level", 0.05)),
        q_target=float(risk_block.get("q_target", 0.01)),
        q_tolerance=float(risk_block.get("q_tolerance", 0.002)),
        penalty_weight=float(risk_block.get("penalty_weight", 1e3)))
    n = int(cfg.get("n", 10000))
    batch = sample_events(model, n, args.seed)
    acfg = _anneal_config(cfg.get("anneal"), args.seed)
    trace = os.path.join(out, "trace_optimize.csv") if args.verbose else None
    opt = optimize_positions(batch, template, bounds, risk_cfg, acfg,
                             refine_calls=int(cfg.get("refine_calls", 1000)),
                             trace_path=trace)
    values = (opt.portfolio.weights if isinstance(opt.portfolio, LinearPortfolio)
              else opt.portfolio.counts)
    save_json(os.path.join(out, "positions.json"), {
        "kind": "positions",
        "template": "linear" if isinstance(opt.portfolio, LinearPortfolio)
                    else "contracts",
        "values": list(values),
        "objective_value": opt.objective_value,
        "q": opt.q, "cost_q": opt.cost_q, "feasible": opt.feasible,
        "trials": opt.result.trials, "exit_reason": opt.result.exit_reason,
    })
    print(f"optimized {dim} position(s) over {n} events: "
          f"objective={fmt(opt.objective_value)} q={fmt(opt.q)}")
    print(f"wrote {os.path.join(out, 'positions.json')}")
    if not opt.feasible:
        print("error: tail constraint infeasible at the best point found",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _series_for_net(net, csv_path):
    names, data = read_series_csv(csv_path)
    if set(names) != set(net.names):
        raise ParseError(f"{csv_path}: columns {list(names)} do not match "
                         f"net sites {list(net.names)}")
    order = [names.index(n) for n in net.names]
    return data[:, order]


def cmd_eeg(args) -> int:
    cfg = _config_of(args)
    out = ensure_out_dir(args.out)
    net = load_net(args.net)
    if args.mode == "simulate":
        phi = eeg.simulate(net, args.epochs, args.seed)
        path = os.path.join(out, "series.csv")
        write_series_csv(path, phi, net.names, index_name="epoch")
        print(f"simulated {args.epochs} epochs x {len(net.names)} site(s)")
        print(f"wrote {path}")
        return EXIT_OK
    data = _series_for_net(net, args.series)
    if args.mode == "fit":
        free = list(cfg.get("free", []))
        bounds_block = cfg.get("bounds", {})
        try:
            bounds = {k: (float(v[0]), float(v[1])) for k, v in bounds_block.items()}
        except (TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"bad bounds block: {exc}") from exc
        acfg = _anneal_config(cfg.get("anneal"), args.seed)
        trace = os.path.join(out, "trace_fit.csv") if args.verbose else None
        fit = eeg.fit_net(data, net, free, bounds, acfg,
                          penalty_weight=float(cfg.get("penalty_weight", 1e3)),
                          refine_calls=int(cfg.get("refine_calls", 1000)),
                          trace_path=trace)
        save_net(os.path.join(out, "net.json"), fit.net)
        save_json(os.path.join(out, "fit_report.json"), {
            "kind": "fit_report",
            "loglik": fit.loglik,
            "clamp_fraction": fit.clamp_fraction,
            "out_of_range": fit.out_of_range,
            "final_cost": -fit.loglik,
            "trials": 0 if fit.anneal_result is None else fit.anneal_result.trials,
            "exit_reason": (None if fit.anneal_result is None
                            else fit.anneal_result.exit_reason),
        })
        print(f"fitted {len(free)} parameter(s): final cost {fmt(-fit.loglik)}")
        print(f"wrote {os.path.join(out, 'net.json')} and "
              f"{os.path.join(out, 'fit_report.json')}")
        return EXIT_OK
    if args.mode == "check":
        rows = eeg.centering_check(net, data)
        save_json(os.path.join(out, "centering.json"),
                  {"kind": "centering_report", "rows": rows})
        for row in rows:
            flag = " FLAGGED" if row["flagged"] else ""
            print(f"  {row['site']}: mean_e={fmt(row['mean_e'])} "
                  f"rms_e={fmt(row['rms_e'])}{flag}")
        print(f"wrote {os.path.join(out, 'centering.json')}")
        return EXIT_OK
    raise ParseError(f"unknown eeg mode {args.mode!r}")


def cmd_indicators(args) -> int:
    cfg = _config_of(args)
    out = ensure_out_dir(args.out)
    methods = cfg.get("methods")
    if not methods or len(methods) < 2:
        raise ParseError("indicators config needs >= 2 'methods'")
    streams = []
    for block in methods:
        try:
            name = str(block["name"])
            csv_path = block["csv"]
        except KeyError as exc:
            raise ParseError(f"method block missing {exc.args[0]!r}") from exc
        kind = block.get("kind", "values")
        if kind == "values":
            names, data = read_series_csv(csv_path)
            col = block.get("column")
            if col is None:
                if data.shape[1] != 1:
                    raise ParseError(f"{csv_path}: pick one of {list(names)} "
                                     f"with 'column'")
                idx = 0
            else:
                if col not in names:
                    raise ParseError(f"{csv_path}: no column {col!r}")
                idx = names.index(col)
            streams.append(indicators.stream_from_values(name, data[:, idx]))
        elif kind == "net":
            try:
                net = load_net(block["net"])
            except KeyError as exc:
                raise ParseError(f"method {name!r} missing {exc.args[0]!r}") from exc
            data = _series_for_net(net, csv_path)
            streams.append(indicators.stream_from_net(name, net, data))
        else:
            raise ParseError(f"unknown method kind {kind!r}")
    weights = cfg.get("weights")
    acfg = _anneal_config(cfg.get("anneal"), args.seed) if cfg.get("anneal") \
        else None
    report, model = indicators.indicator_report(
        streams,
        holdout_fraction=float(cfg.get("holdout_fraction", 0.25)),
        fit_weights=bool(cfg.get("fit_weights", False)),
        weights=None if weights is None else [float(v) for v in weights],
        state_labels=cfg.get("state_labels"),
        pre_average_window=int(cfg.get("pre_average_window", 3)),
        config=acfg)
    save_json(os.path.join(out, "indicators.json"), report)
    if model is not None:
        save_model(os.path.join(out, "indicator_model.json"), model)
    print(f"joined {len(streams)} stream(s) over {report['epochs']} epochs: "
          f"status {report['status']}")
    print(f"wrote {os.path.join(out, 'indicators.json')}")
    if report["status"] == "degenerate_pairing":
        print("error: duplicated indicator streams make the copula singular",
              file=sys.stderr)
        return EXIT_ILL_CONDITIONED
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file")
    common.add_argument("--seed", type=int, default=0, help="RNG seed (u64)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--verbose", action="store_true",
                        help="extra logs and annealer trace files")

    parser = argparse.ArgumentParser(
        prog="tailfolio",
        description="Tail-risk portfolio engine over copula-joined indicators")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-marginals", parents=[common],
                       help="fit per-channel marginals and the copula from CSV")
    p.add_argument("csv", help="series CSV (header row, one column per channel)")
    p.set_defaults(handler=cmd_fit_marginals)

    p = sub.add_parser("sample", parents=[common],
                       help="draw correlated events from a model file")
    p.add_argument("model", help="model JSON")
    p.add_argument("--n", type=int, default=1000, help="number of events")
    p.add_argument("--lanes", type=int, default=1,
                   help="deterministic parallel lanes")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("risk", parents=[common],
                       help="sample a portfolio and report tail risk")
    p.add_argument("model", help="model JSON")
    p.add_argument("--weights", default=None,
                   help="comma-separated channel weights (default all 1)")
    p.add_argument("--var", type=float, default=0.05, help="VaR level")
    p.add_argument("--q", type=float, default=0.01, help="target tail mass")
    p.add_argument("--n", type=int, default=100000, help="number of events")
    p.set_defaults(handler=cmd_risk)

    p = sub.add_parser("optimize", parents=[common],
                       help="optimize positions under the tail constraint")
    p.add_argument("model", help="model JSON")
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("eeg", parents=[common],
                       help="simulate, fit, or check the regional EEG model")
    p.add_argument("mode", choices=("simulate", "fit", "check"))
    p.add_argument("net", help="net JSON template")
    p.add_argument("series", nargs="?", default=None,
                   help="series CSV (fit and check modes)")
    p.add_argument("--epochs", type=int, default=950,
                   help="epochs to simulate")
    p.set_defaults(handler=cmd_eeg)

    p = sub.add_parser("indicators", parents=[common],
                       help="join indicator streams from several methods")
    p.set_defaults(handler=cmd_indicators)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eeg" and args.mode in ("fit", "check") \
            and args.series is None:
        parser.error("eeg fit/check need a series CSV")
    if not 0 <= args.seed < 2 ** 64:
        parser.error("--seed must fit in u64")
    try:
        return args.handler(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except Exception as exc:  # noqa: BLE001  (CLI boundary: map to exit 10)
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())
