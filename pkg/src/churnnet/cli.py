"""Command-line entry point: ``churnnet <subcommand>``.

Global flags go before the subcommand::

    churnnet --config exp.cfg --seed 7 --out runs/a --workers 4 grid
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .cdr import CdrSchema, parse_cdr, write_cdr
from .classify import OotWindows, predictions_csv, run_oot
from .config import Settings, load_config, params_hash
from .exceptions import ChurnNetError, ConfigError
from .features import MODES
from .graph import DIRECTIONS, SCHEMES, save_graph
from .pipeline import GraphSpec, Timeline, frame
from .synth import SynthConfig, generate, verify, write_labels

log = logging.getLogger("churnnet")


def _months(text: str) -> tuple[int, int]:
    a, _, b = text.partition("-")
    return int(a), int(b or a)


def _csv_list(text: str | None) -> list[str]:
    return [s.strip() for s in (text or "").split(",") if s.strip()]


def _settings(args) -> Settings:
    values = load_config(args.config)
    if args.seed is not None:
        values["seed"] = str(args.seed)
    return Settings(values)


def _seed(args, settings: Settings) -> int:
    return settings.int("seed", 0)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _timeline(args, settings: Settings) -> Timeline:
    if not args.cdr:
        plan = bench.ExperimentPlan.from_settings(settings)
        if not plan.datasets:
            raise ConfigError("no input: pass --cdr or configure datasets")
        return plan.datasets[0].load()
    schema = CdrSchema.from_settings(settings)
    with open(args.cdr, encoding="utf-8", newline="") as fh:
        store = parse_cdr(fh, schema)
    if store.errors:
        log.warning("%d malformed rows skipped", len(store.errors))
    return Timeline(store)


def _plan(args, settings: Settings) -> bench.ExperimentPlan:
    plan = bench.ExperimentPlan.from_settings(settings)
    if getattr(args, "cdr", None):
        plan = replace(plan, datasets=[bench.DatasetSource(Path(args.cdr).stem, path=args.cdr,
                                                           schema=CdrSchema.from_settings(settings))])
    if getattr(args, "learners", None):
        plan = replace(plan, learners=tuple(_csv_list(args.learners)))
    if not plan.datasets:
        raise ConfigError("no datasets: pass --cdr or configure datasets / synth.count")
    return plan


def _spec(args) -> GraphSpec:
    return GraphSpec(args.direction, args.scheme, bench._decay(args.decay), args.segment, args.reciprocal)


# --- subcommands ----------------------------------------------------------------

def cmd_synth(args, settings):
    cfg = SynthConfig.from_settings(settings, "synth")
    over = {k: v for k, v in (("n_customers", args.customers), ("churn_rate", args.churn_rate),
                              ("sparsity", args.sparsity), ("homophily", args.homophily)) if v is not None}
    cfg = replace(cfg, seed=_seed(args, settings), **over)
    store, truth = generate(cfg)
    out = _out(args)
    with open(out / "cdr.csv", "w", encoding="utf-8", newline="") as fh:
        write_cdr(store, fh)
    with open(out / "labels.csv", "w", encoding="utf-8", newline="") as fh:
        write_labels(truth, fh, cfg.epoch)
    diag = verify(store, truth, cfg)
    (out / "synth.json").write_text(json.dumps({"config": cfg.as_dict(), "diagnostics": diag.as_dict()},
                                               indent=1, sort_keys=True) + "\n", encoding="utf-8")
    for f in diag.flags:
        log.warning("synth: %s", f)
    print(f"wrote {len(store)} calls for {store.n_customers} customers to {out}")


def cmd_build_graph(args, settings):
    tl = _timeline(args, settings)
    g = tl.graph(_spec(args), _months(args.months))
    out = _out(args)
    save_graph(g, out / "graph")
    print(f"graph {g.n} nodes, {g.n_edges} edges -> {out / 'graph.csv'}")


def cmd_featurize(args, settings):
    tl = _timeline(args, settings)
    table = tl.feature_table(_months(args.months), args.label_month, args.mode, _csv_list(args.learners),
                             spec=_spec(args), seed=_seed(args, settings))
    out = _out(args)
    with open(out / "features.csv", "w", encoding="utf-8", newline="") as fh:
        table.to_csv(fh)
    print(f"{len(table)} rows x {len(table.columns)} features -> {out / 'features.csv'}")


def cmd_score(args, settings):
    tl = _timeline(args, settings)
    plan = bench.ExperimentPlan.from_settings(settings)
    fr = frame(args.timeframe, args.target_month)
    out = _out(args)
    learners = _csv_list(args.learners) or list(plan.learners)
    with open(out / "scores.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("customer_id,learner_id,score\n")
        for learner in learners:
            s = tl.score(learner, _spec(args), fr, plan.ci, _seed(args, settings))
            s.to_csv(fh, header=False)
    pop = tl.population(fr.target_month)
    with open(out / "labels.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("customer_id,label\n")
        for cid, y in zip(tl.customers[pop].tolist(), tl.target(fr.target_month)[pop].tolist()):
            fh.write(f"{cid},{y}\n")
    print(f"{len(learners)} learners scored -> {out / 'scores.csv'}")


def cmd_train(args, settings):
    plan = _plan(args, settings)
    out = _out(args)
    if args.cdr or len(plan.datasets) == 1:
        tl = plan.datasets[0].load()
        modes = [args.mode] if args.mode else list(plan.nrc_modes)
        learners = plan.nrc_learners if plan.nrc_learners is not None else plan.learners
        for mode in modes:
            res = run_oot(tl, mode, learners if mode != "network_only" else (), OotWindows(),
                          ratio=plan.oversample_ratio, seed=plan.seed, spec=plan.spec("length"), ci=plan.ci)
            with open(out / f"model_{mode}.json", "w", encoding="utf-8") as fh:
                res.model.dump(fh)
            with open(out / f"predictions_{mode}.csv", "w", encoding="utf-8", newline="") as fh:
                predictions_csv(res.test, res.test_labels, fh)
    if args.mode:
        plan = replace(plan, nrc_modes=(args.mode,))
    report = bench.run_nrc_benchmark(plan, args.workers)
    report.write(out / "nrc_report")
    print(f"{len(report.rows)} report rows -> {out / 'nrc_report.csv'}")


def _read_labels(path) -> dict[str, int]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    key = "label" if rows and "label" in rows[0] else "is_churner"
    return {r["customer_id"]: int(r[key]) for r in rows}


def cmd_evaluate(args, settings):
    out = _out(args)
    plan = None
    if args.scores:
        plan = bench.ExperimentPlan.from_settings(settings)
        if not args.labels:
            raise ConfigError("--scores needs --labels")
        labels = _read_labels(args.labels)
        by_learner: dict[str, list[tuple[str, float]]] = {}
        with open(args.scores, encoding="utf-8", newline="") as fh:
            for r in csv.DictReader(fh):
                if r["customer_id"] in labels:
                    by_learner.setdefault(r.get("learner_id", "model"), []).append((r["customer_id"], float(r["score"])))
        report = bench.EvalReport()
        phash = params_hash(plan.params())
        names = _csv_list(args.metrics) or list(plan.metrics)
        for learner, pairs in sorted(by_learner.items()):
            pairs.sort()
            s = np.array([p[1] for p in pairs])
            y = np.array([labels[p[0]] for p in pairs])
            report.rows += bench._metric_rows(Path(args.scores).stem, "-", learner, "-", s, y, names, plan.emp, phash)
        report.write(out / "metrics")
    else:
        plan = _plan(args, settings)
        report = bench.run_learner_benchmark(plan, args.workers)
        report.write(out / "learner_report")
    for n in report.notices:
        log.warning("%s", n)
    print(f"{len(report.rows)} metric rows -> {out}")


def cmd_grid(args, settings):
    plan = _plan(args, settings)
    print(f"architecture grid: {plan.grid_size} cells per dataset x {len(plan.datasets)} datasets")
    report = bench.run_architecture_grid(plan, _out(args), args.workers, args.limit)
    pending = plan.grid_size * len(plan.datasets) - len({r.architecture + r.dataset for r in report.rows})
    if pending:
        print(f"{pending} cells pending; rerun to resume (grid_report is written once all cells are done)")
    print(f"{len(report.rows)} grid rows in {args.out}")


def cmd_stats(args, settings):
    report = bench.EvalReport()
    for path in args.report:
        report.extend(bench.read_report(path))
    summary = bench.run_stats(report, args.alpha)
    out = _out(args)
    (out / "stats.json").write_text(bench.dump_summary(summary), encoding="utf-8")
    if summary["underpowered"]:
        print("learner comparison underpowered: fewer than 2 complete score sets")
    for name, check in sorted(summary["checks"].items()):
        print(f"{'PASS' if check['pass'] else 'FAIL'} {name}")
    print(f"significance summary -> {out / 'stats.json'}")


def cmd_report(args, settings):
    report = bench.EvalReport()
    for path in args.report:
        report.extend(bench.read_report(path))
    out = _out(args)
    written = 0
    for metric in sorted({r.metric for r in report.rows}):
        for name, rows in bench.grid_tables(report, metric).items():
            if len(rows[0]) <= 2 and len(rows) <= 2:
                continue
            path = out / f"table_{name.replace('/', '_')}_{metric.replace('@', '_at_')}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerows(rows)
            written += 1
    print(f"{written} tables -> {out}")


# --- parser ---------------------------------------------------------------------

def _graph_args(p):
    p.add_argument("--direction", choices=DIRECTIONS, default="undirected")
    p.add_argument("--scheme", choices=SCHEMES, default="length")
    p.add_argument("--decay", default="default", help="'none', 'default' (ln(100)/52 per week) or a rate")
    p.add_argument("--segment", default="whole", help="e.g. wd, evening, 1/2*day+evening")
    p.add_argument("--reciprocal", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="churnnet", description="Relational churn prediction on call graphs.")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic CDR dataset")
    s.add_argument("--customers", type=int)
    s.add_argument("--churn-rate", type=float)
    s.add_argument("--sparsity", type=float)
    s.add_argument("--homophily", type=float)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("build-graph", help="build and export one call graph")
    s.add_argument("--cdr")
    s.add_argument("--months", default="4", help="month window, e.g. 4 or 2-4")
    _graph_args(s)
    s.set_defaults(func=cmd_build_graph)

    s = sub.add_parser("featurize", help="export a feature table")
    s.add_argument("--cdr")
    s.add_argument("--months", default="2-4")
    s.add_argument("--label-month", type=int, default=5)
    s.add_argument("--mode", choices=MODES, default="network_only")
    s.add_argument("--learners", default="")
    _graph_args(s)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("score", help="run relational learners on one timeframe")
    s.add_argument("--cdr")
    s.add_argument("--learners", default="")
    s.add_argument("--timeframe", choices=("short", "long"), default="short")
    s.add_argument("--target-month", type=int, default=5)
    _graph_args(s)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("train", help="out-of-time non-relational models")
    s.add_argument("--cdr")
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--learners", default="")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="metrics for a score file, or the full learner benchmark")
    s.add_argument("--cdr")
    s.add_argument("--scores")
    s.add_argument("--labels")
    s.add_argument("--metrics", default="")
    s.add_argument("--learners", default="")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("grid", help="network-architecture grid with the proxy learner (resumable)")
    s.add_argument("--cdr")
    s.add_argument("--limit", type=int, help="process at most this many new cells")
    s.set_defaults(func=cmd_grid)

    s = sub.add_parser("stats", help="Friedman / Nemenyi / Kruskal-Wallis summary of reports")
    s.add_argument("--report", nargs="+", required=True)
    s.add_argument("--alpha", type=float, default=0.05)
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("report", help="pivot report files into table form")
    s.add_argument("--report", nargs="+", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        args.func(args, _settings(args))
    except (ChurnNetError, OSError, KeyError) as exc:
        print(f"churnnet: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
