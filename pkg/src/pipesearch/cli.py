"""Command line entry points: fit, predict, report, benchmark, serve.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from .config import ConfigError, config_from_dict, load_space_file
from .datasets import DatasetError, read_csv
from .evaluation import METRICS
from .orchestrator import Budget, RunConfig, run_automl
from .postprocess import POST_PROCESSORS, load_model
from .runlog import compare_runs, write_compare_outputs
from .search import STRATEGIES

__all__ = ["main"]


def _fit_config_from_args(args) -> RunConfig:
    space = load_space_file(args.space_file) if args.space_file else None
    return RunConfig(
        data_path=args.data,
        target=args.target,
        budget=Budget(args.time, args.eval_timeout, args.post_fraction),
        seed=args.seed,
        search=args.search,
        post=args.post,
        post_params={"target_size": args.ensemble_size} if args.post == "ensemble" else {},
        metric=args.metric,
        folds=args.folds,
        n_workers=args.workers,
        space=space,
        output_dir=args.out,
        max_evaluations=args.max_evaluations,
    )


def cmd_fit(args) -> int:
    try:
        cfg = _fit_config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = run_automl(cfg)
    if result.phase == "failed":
        print(f"run failed: {result.error}", file=sys.stderr)
        return 1
    summary = result.summary
    best = summary.get("best") or {}
    print(f"run {result.run_id}: {result.phase}")
    print(f"  evaluations: {summary.get('n_evaluations')}")
    print(f"  best pipeline: {best.get('pipeline')}")
    print(f"  best {cfg.metric}: {best.get('objectives', [None])[0]}")
    print(f"  model: {result.model_path}")
    print(f"  log: {result.log_path}")
    return 0


def cmd_predict(args) -> int:
    try:
        model = load_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot load model: {exc}", file=sys.stderr)
        return 1
    try:
        header, rows = read_csv(args.data)
        labels, proba = model.predict_raw(header, rows)
    except (DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_path = Path(args.out)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_id", "prediction"]
                        + [f"prob_{c}" for c in model.classes])
        for i, label in enumerate(labels):
            writer.writerow([i, label] + [repr(float(p)) for p in proba[i]])
    print(f"wrote {len(labels)} predictions to {out_path}")
    return 0


def cmd_report(args) -> int:
    try:
        report = compare_runs(args.logs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report_path, csv_path = write_compare_outputs(report, args.out)
    print(f"report: {report_path}")
    print(f"plot data: {csv_path}")
    return 0


def cmd_benchmark(args) -> int:
    try:
        with open(args.suite, encoding="utf-8") as fh:
            suite = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read suite config: {exc}", file=sys.stderr)
        return 1
    datasets = suite.get("datasets", [])
    configs = suite.get("configs", [])
    seeds = suite.get("seeds", [0])
    budget = float(suite.get("budget_seconds", 60))
    if not datasets or not configs:
        print("error: suite config needs datasets and configs", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = Path(args.suite).parent
    rows = []
    for d_i, ds in enumerate(datasets):
        for c_i, cell_cfg in enumerate(configs):
            for seed in seeds:
                name = cell_cfg.get("name", f"config{c_i}")
                cell_dir = out_dir / f"cell_d{d_i}_c{c_i}_s{seed}"
                started = time.monotonic()
                try:
                    doc = {
                        "data": {"path": str(base / ds["path"])
                                 if not Path(ds["path"]).is_absolute() else ds["path"],
                                 "target": ds["target"]},
                        "search": {"name": cell_cfg.get("search", "random"),
                                   "params": cell_cfg.get("search_params", {})},
                        "post": {"name": cell_cfg.get("post", "best"),
                                 "params": cell_cfg.get("post_params", {})},
                        "metric": cell_cfg.get("metric", "accuracy"),
                        "budget": {"total_seconds": budget},
                        "seed": seed,
                        "n_workers": suite.get("n_workers"),
                        "max_evaluations": cell_cfg.get("max_evaluations",
                                                        suite.get("max_evaluations")),
                        "output_dir": str(cell_dir),
                    }
                    cfg = config_from_dict(doc)
                    result = run_automl(cfg)
                    status = result.phase
                    best = (result.summary.get("best") or {}).get("objectives")
                    metric_value = best[0] if best else ""
                    error = result.error or ""
                except Exception as exc:  # a failing cell never kills the suite
                    status, metric_value, error = "failed", "", str(exc)
                rows.append({
                    "dataset": ds["path"], "config": name, "seed": seed,
                    "metric": metric_value,
                    "duration_s": round(time.monotonic() - started, 3),
                    "status": status, "error": error,
                })
                print(f"[{status}] {ds['path']} x {name} x seed={seed} "
                      f"metric={metric_value}")
    table_path = out_dir / "results.csv"
    with open(table_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["dataset", "config", "seed",
                                                "metric", "duration_s", "status",
                                                "error"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"results table: {table_path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app, default_port
    app = create_app(max_concurrent_runs=args.max_runs,
                     frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port or default_port())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipesearch",
        description="Budgeted AutoML pipeline search over tabular classification data")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="search for a pipeline and train a final model")
    fit.add_argument("data", help="training CSV with a header row")
    fit.add_argument("--target", required=True, help="target column name")
    fit.add_argument("--time", type=float, default=60.0,
                     help="total wall-clock budget in seconds")
    fit.add_argument("--search", default="random", choices=sorted(STRATEGIES))
    fit.add_argument("--post", default="best", choices=list(POST_PROCESSORS))
    fit.add_argument("--metric", default="accuracy", choices=list(METRICS))
    fit.add_argument("--seed", type=int, required=True)
    fit.add_argument("--folds", type=int, default=5)
    fit.add_argument("--workers", type=int, default=None,
                     help=f"worker count (default: $PIPESEARCH_WORKERS or 1)")
    fit.add_argument("--eval-timeout", type=float, default=None)
    fit.add_argument("--post-fraction", type=float, default=None)
    fit.add_argument("--ensemble-size", type=int, default=25)
    fit.add_argument("--max-evaluations", type=int, default=None)
    fit.add_argument("--space-file", default=None,
                     help="JSON search-space definition (default: built-in space)")
    fit.add_argument("--out", default="pipesearch-out", help="output directory")
    fit.set_defaults(func=cmd_fit)

    predict = sub.add_parser("predict", help="predict with a trained model file")
    predict.add_argument("model", help="model.json produced by fit")
    predict.add_argument("data", help="CSV with the training feature columns")
    predict.add_argument("--out", default="predictions.csv")
    predict.set_defaults(func=cmd_predict)

    report = sub.add_parser("report", help="compare run logs")
    report.add_argument("logs", nargs="+", help="run-*.jsonl files")
    report.add_argument("--out", default="pipesearch-report")
    report.set_defaults(func=cmd_report)

    bench = sub.add_parser("benchmark", help="run a local dataset x config suite")
    bench.add_argument("suite", help="suite config JSON")
    bench.add_argument("--out", default="pipesearch-benchmark")
    bench.set_defaults(func=cmd_benchmark)

    serve = sub.add_parser("serve", help="start the HTTP control API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=None,
                       help="default: $PIPESEARCH_PORT or 8700")
    serve.add_argument("--max-runs", type=int, default=2,
                       help="concurrent run cap")
    serve.add_argument("--frontend", default=None,
                       help="directory of built dashboard assets to serve at /")
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
