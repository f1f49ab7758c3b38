"""Command-line entry point: ``knockoff-invariance <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .baseline import granger_graph
from .core import MultivariateTimeSeries, RngSeed, load_csv, write_csv
from .eval import config_from_dict, run_benchmark
from .forecaster import ForecastConfig
from .inference import DiscoveryConfig, WindowScheme, discover_graph, report_dict
from .interventions import KINDS, InterventionKind
from .knockoff import diagnose_exchangeability, fit_gaussian, fit_gmm, sample_gmm_knockoffs, sample_knockoffs
from .synthgen import sample_spec, save_dataset, simulate


def _read(args):
    columns = args.columns.split(",") if getattr(args, "columns", None) else None
    return load_csv(args.input, columns=columns, date_column=args.date_column)


def cmd_synth(args):
    root = RngSeed(args.seed)
    ranges = {}
    if args.functions:
        ranges["functions"] = tuple(args.functions.split(","))
    spec = sample_spec(args.nodes, args.edges, root.child("synth-spec"), ranges=ranges or None,
                       length=args.length, burn_in=args.burn_in)
    data = simulate(spec, root.child("synth"))
    out = save_dataset(data, args.out)
    print(f"wrote {out}/series.csv, spec.json, truth.json ({len(spec.edges)} edges)")


def cmd_knockoff(args):
    series = _read(args)
    root = RngSeed(args.seed)
    if args.gmm and args.gmm > 1:
        model = fit_gmm(series, args.gmm, root.child("knockoff-gmm"))
        knock = sample_gmm_knockoffs(model, series, root.child("knockoff"))
    else:
        model = fit_gaussian(series)
        knock = sample_knockoffs(model, series, root.child("knockoff"))
    if args.side_by_side:
        both = np.hstack([series.values, knock.values])
        names = list(series.names) + [f"{n}_knockoff" for n in series.names]
        write_csv(MultivariateTimeSeries(both, tuple(names)), args.out)
    else:
        write_csv(knock, args.out)
    print(diagnose_exchangeability(series, knock, model).table())


def _discovery_config(args) -> DiscoveryConfig:
    return DiscoveryConfig(
        forecaster=ForecastConfig(lag_depth=args.lags, hidden=args.hidden, epochs=args.epochs,
                                  step_size=args.step_size, batch_size=args.batch_size,
                                  weight_decay=args.weight_decay,
                                  validation_fraction=args.validation_fraction, patience=args.patience),
        kind=InterventionKind(args.kind, args.ood_shift, args.ood_scale),
        scheme=WindowScheme(args.window, args.step),
        alpha=args.alpha,
        q=args.q,
        train_fraction=args.train_fraction,
        aggregate=args.aggregate,
        redraws=args.redraws,
        gmm_components=args.gmm,
    )


def cmd_discover(args):
    series = _read(args)
    config = _discovery_config(args)
    graph, reports = discover_graph(series, config, RngSeed(args.seed))
    body = report_dict(graph, reports, config.to_dict())
    Path(args.out).write_text(json.dumps(body, indent=2))
    for i, j in graph.edges():
        print(f"{graph.names[i]} -> {graph.names[j]}")
    print(f"{len(graph.edges())} edge(s); report written to {args.out}")


def cmd_baseline(args):
    series = _read(args)
    graph, tests = granger_graph(series, args.order, args.alpha, return_tests=True)
    body = report_dict(graph, tests, {"order": args.order, "alpha": args.alpha}, method="var-gc")
    Path(args.out).write_text(json.dumps(body, indent=2))
    for i, j in graph.edges():
        print(f"{graph.names[i]} -> {graph.names[j]}")


def _read_config(path) -> dict:
    text = Path(path).read_text()
    if Path(path).suffix.lower() in (".yaml", ".yml"):
        import yaml  # optional; only needed for YAML configs
        return yaml.safe_load(text) or {}
    return json.loads(text)


def cmd_bench(args):
    cfg = _read_config(args.config)
    methods, template, seeds, config = config_from_dict(cfg)
    report = run_benchmark(methods, template, seeds, config, n_jobs=args.jobs)
    Path(args.out).write_text(report.to_json())
    for method, entry in report.summary().items():
        print(f"{method:<9} F {entry['f_score_mean']:.3f} +/- {entry['f_score_std']:.3f}   "
              f"FPR {entry['fpr_mean']:.3f} +/- {entry['fpr_std']:.3f}   failed {entry['n_failed']}")


def _add_input(p):
    p.add_argument("--in", dest="input", required=True, help="CSV file, header row first")
    p.add_argument("--columns", help="comma-separated columns to use; all but the date column when omitted")
    p.add_argument("--date-column", help="leading date column to ignore")


ORIG = "[original setup]"
CHOICE = "[implementation choice]"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knockoff-invariance",
        description="Causal discovery by model invariance under knockoff interventions.",
        epilog=f"{ORIG} marks values taken from the original experimental setup; "
               f"{CHOICE} marks defaults chosen for this implementation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        return sub.add_parser(name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    p = add("synth", "simulate a random nonlinear SCM dataset")
    p.add_argument("--nodes", type=int, default=5, help=f"node count {ORIG}")
    p.add_argument("--edges", type=int, default=5, help=f"number of directed edges {CHOICE}")
    p.add_argument("--length", type=int, default=2000, help=f"rows kept after burn-in {CHOICE}")
    p.add_argument("--burn-in", type=int, default=500, help=f"discarded leading rows {CHOICE}")
    p.add_argument("--functions", help=f"comma-separated subset of linear,exponential {ORIG}")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = add("knockoff", "write a knockoff copy of a CSV and print diagnostics")
    _add_input(p)
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--gmm", type=int, default=0,
                   help=f"mixture components; 0 or 1 fits a single Gaussian {ORIG}")
    p.add_argument("--side-by-side", action="store_true", help="write originals and knockoffs together")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.set_defaults(func=cmd_knockoff)

    p = add("discover", "discover the causal graph of a CSV")
    _add_input(p)
    p.add_argument("--kind", choices=KINDS, default="knockoff", help=f"intervention type {ORIG}")
    p.add_argument("--alpha", type=float, default=0.05, help=f"significance level, 5-10%% {ORIG}")
    p.add_argument("--window", type=int, default=25, help=f"forecast window length, 20-30 {ORIG}")
    p.add_argument("--step", type=int, default=10, help=f"window step, 5-10 {ORIG}")
    p.add_argument("--q", type=float, default=0.5, help=f"rejection-fraction threshold for --aggregate vote {CHOICE}")
    p.add_argument("--aggregate", choices=("pool", "vote"), default="pool",
                   help=f"one KS test on all windowed residuals, or a vote over windows {CHOICE}")
    p.add_argument("--redraws", type=int, default=1, help=f"intervention draws per edge {CHOICE}")
    p.add_argument("--train-fraction", type=float, default=0.8, help=f"share of rows used for training {CHOICE}")
    fc = ForecastConfig()
    p.add_argument("--lags", type=int, default=fc.lag_depth, help=f"forecaster lag depth p, covers lags 0-10 {CHOICE}")
    p.add_argument("--hidden", type=int, default=fc.hidden, help=f"hidden units per network {CHOICE}")
    p.add_argument("--epochs", type=int, default=fc.epochs, help=f"epoch cap; early stopping usually ends sooner {CHOICE}")
    p.add_argument("--step-size", type=float, default=fc.step_size, help=f"Adam step size {CHOICE}")
    p.add_argument("--batch-size", type=int, default=fc.batch_size, help=CHOICE)
    p.add_argument("--weight-decay", type=float, default=fc.weight_decay, help=f"L2 penalty on network weights {CHOICE}")
    p.add_argument("--validation-fraction", type=float, default=fc.validation_fraction,
                   help=f"trailing share of training rows held out for early stopping, 0 disables {CHOICE}")
    p.add_argument("--patience", type=int, default=fc.patience,
                   help=f"epochs without validation gain before stopping {CHOICE}")
    p.add_argument("--gmm", type=int, default=0, help=f"mixture components for knockoffs {ORIG}")
    p.add_argument("--ood-shift", type=float, default=3.0, help=f"OOD mean shift in sd units {CHOICE}")
    p.add_argument("--ood-scale", type=float, default=2.0, help=f"OOD sd multiplier {CHOICE}")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", required=True, help="report JSON")
    p.set_defaults(func=cmd_discover)

    p = add("baseline", "VAR Granger causality graph of a CSV")
    _add_input(p)
    p.add_argument("--order", type=int, default=10, help=f"VAR order {CHOICE}")
    p.add_argument("--alpha", type=float, default=0.05, help=f"significance level {ORIG}")
    p.add_argument("--out", required=True, help="report JSON")
    p.set_defaults(func=cmd_baseline)

    p = add("bench", "multi-seed synthetic benchmark")
    p.add_argument("--config", required=True, help="JSON or YAML config file (keys listed in config_from_dict)")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--jobs", type=int, default=1, help="parallel seeds")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
