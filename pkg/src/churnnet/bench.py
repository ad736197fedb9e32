"""Benchmark orchestration: learner benchmark, non-relational OoT benchmark,
architecture grid and the significance summary.

Every result is a :class:`ReportRow` carrying its provenance
``(dataset, architecture, model, timeframe, metric, value, params_hash)``.
Reports are written in a canonical order so identical runs give identical
bytes.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import metrics as M
from . import stats as S
from .cdr import CdrSchema, parse_cdr
from .classify import LogisticClassifier, OotWindows, run_oot
from .config import Settings, derive_seed, params_hash
from .exceptions import ConfigError, FittingError, MetricError, PretrainingError
from .graph import DEFAULT_DECAY, DIRECTIONS, SCHEMES, paper_segmentations
from .pipeline import GraphSpec, Timeline, frame
from .relational import ALL_LEARNERS, CiConfig, parse_learner
from .synth import SynthConfig, generate

log = logging.getLogger(__name__)

FIELDS = ("dataset", "architecture", "model", "timeframe", "metric", "value", "params_hash")
DEFAULT_METRICS = M.PRESET_METRICS
GRID_METRICS = ("auc", "lift@0.005")
NRC_MODES = ("network_only", "rl_only", "all")


# --- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    dataset: str
    architecture: str
    model: str
    timeframe: str
    metric: str
    value: float
    params_hash: str

    def cells(self) -> list[str]:
        return [self.dataset, self.architecture, self.model, self.timeframe, self.metric,
                _fmt(self.value), self.params_hash]

    @property
    def sort_key(self):
        return (self.dataset, self.architecture, self.model, self.timeframe, self.metric)


def _fmt(v: float) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)

    def extend(self, other: "EvalReport") -> None:
        self.rows.extend(other.rows)
        self.notices.extend(other.notices)

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(self.rows, key=lambda r: r.sort_key)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for r in self.sorted_rows():
            w.writerow(r.cells())
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [dict(zip(FIELDS, r.cells())) for r in self.sorted_rows()]
        return json.dumps({"rows": rows, "notices": sorted(self.notices)}, indent=1, sort_keys=True) + "\n"

    def write(self, path: str | Path) -> None:
        """Write ``<path>.csv`` and a ``<path>.json`` manifest."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.with_suffix(".csv").write_text(self.to_csv(), encoding="utf-8")
        path.with_suffix(".json").write_text(self.to_json(), encoding="utf-8")

    def values(self, **match) -> list[ReportRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]


def read_report(source) -> EvalReport:
    """Parse a report CSV: a path, CSV text, or a text stream."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        with open(source, encoding="utf-8") as fh:
            return read_report(fh)
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = tuple(next(reader))
    if header != FIELDS:
        raise ConfigError(f"not a report file: header {header}")
    rows = [ReportRow(r[0], r[1], r[2], r[3], r[4], float(r[5]), r[6]) for r in reader if r]
    return EvalReport(rows)


# --- plan -----------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSource:
    """A CDR file or a synthetic configuration."""

    name: str
    path: str | None = None
    synth: SynthConfig | None = None
    schema: CdrSchema = CdrSchema()

    def load(self) -> Timeline:
        if self.synth is not None:
            store, _ = generate(self.synth)
        elif self.path is not None:
            with open(self.path, encoding="utf-8", newline="") as fh:
                store = parse_cdr(fh, self.schema)
        else:
            raise ConfigError(f"dataset {self.name!r} has neither a path nor a synthetic config")
        return Timeline(store)


@dataclass(frozen=True)
class GridCell:
    dataset: str
    spec: GraphSpec

    @property
    def key(self) -> str:
        return f"{self.dataset}|{self.spec.key}"

    @property
    def hash(self) -> str:
        return params_hash({"cell": self.key})


@dataclass
class ExperimentPlan:
    datasets: list[DatasetSource] = field(default_factory=list)
    learners: tuple[str, ...] = ALL_LEARNERS
    nrc_modes: tuple[str, ...] = NRC_MODES
    nrc_learners: tuple[str, ...] | None = None
    metrics: tuple[str, ...] = DEFAULT_METRICS
    timeframes: tuple[str, ...] = ("short", "long")
    schemes: tuple[str, ...] = ("count", "length")
    direction: str = "undirected"
    decay: float | None = DEFAULT_DECAY
    target_month: int = 5
    long_months: int = 3
    ci: CiConfig = field(default_factory=CiConfig)
    emp: M.EmpParams = field(default_factory=M.EmpParams)
    l2: float = 1e-4
    oversample_ratio: float = 0.5
    seed: int = 0
    # architecture grid
    grid_directions: tuple[str, ...] = DIRECTIONS
    grid_schemes: tuple[str, ...] = SCHEMES
    grid_decays: tuple[float | None, ...] = (None, DEFAULT_DECAY)
    grid_segments: tuple[str, ...] = tuple(s.name for s in paper_segmentations())
    grid_reciprocity: tuple[bool, ...] = (False, True)
    proxy: str = "no-nlb"
    grid_metrics: tuple[str, ...] = GRID_METRICS

    def __post_init__(self):
        for learner in (*self.learners, self.proxy, *(self.nrc_learners or ())):
            parse_learner(learner)
        for m in self.nrc_modes:
            if m not in NRC_MODES:
                raise ConfigError(f"unknown NRC mode {m!r}")
        for t in self.timeframes:
            frame(t, self.target_month, self.long_months)
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be unique")

    def spec(self, scheme: str) -> GraphSpec:
        return GraphSpec(self.direction, scheme, self.decay)

    def grid_cells(self) -> list[GridCell]:
        cells = []
        for ds in self.datasets:
            for seg in self.grid_segments:
                for direction in self.grid_directions:
                    for scheme in self.grid_schemes:
                        for decay in self.grid_decays:
                            for recip in self.grid_reciprocity:
                                cells.append(GridCell(ds.name, GraphSpec(direction, scheme, decay, seg, recip)))
        return cells

    @property
    def grid_size(self) -> int:
        return (len(self.grid_directions) * len(self.grid_schemes) * len(self.grid_decays)
                * len(self.grid_segments) * len(self.grid_reciprocity))

    def params(self) -> dict:
        """Parameters that shape every result (hashed into report provenance)."""
        return {
            "ci": asdict(self.ci),
            "emp": self.emp.as_dict(),
            "decay": self.decay,
            "target_month": self.target_month,
            "long_months": self.long_months,
            "l2": self.l2,
            "oversample_ratio": self.oversample_ratio,
            "seed": self.seed,
        }

    @classmethod
    def from_settings(cls, settings: Settings, seed: int | None = None) -> "ExperimentPlan":
        b = settings.section("bench")
        g = settings.section("grid")
        seed = settings.int("seed", 0) if seed is None else seed
        datasets = _datasets_from_settings(settings, seed)
        decay = b.str("decay", "default")
        kw = dict(
            datasets=datasets,
            learners=tuple(b.list("learners", list(ALL_LEARNERS))),
            nrc_modes=tuple(b.list("nrc_modes", list(NRC_MODES))),
            metrics=tuple(b.list("metrics", list(DEFAULT_METRICS))),
            timeframes=tuple(b.list("timeframes", ["short", "long"])),
            schemes=tuple(b.list("schemes", ["count", "length"])),
            direction=b.str("direction", "undirected"),
            decay=_decay(decay),
            target_month=b.int("target_month", 5),
            long_months=b.int("long_months", 3),
            l2=b.float("l2", 1e-4),
            oversample_ratio=b.float("oversample_ratio", 0.5),
            seed=seed,
            ci=_ci_from_settings(settings.section("ci")),
            emp=_emp_from_settings(settings.section("emp")),
            grid_directions=tuple(g.list("directions", list(DIRECTIONS))),
            grid_schemes=tuple(g.list("schemes", list(SCHEMES))),
            grid_decays=tuple(_decay(x) for x in g.list("decay", ["none", "default"])),
            grid_segments=tuple(g.list("segments", [s.name for s in paper_segmentations()])),
            grid_reciprocity=tuple(x == "reciprocal" for x in g.list("reciprocity", ["full", "reciprocal"])),
            proxy=g.str("proxy", "no-nlb"),
            grid_metrics=tuple(g.list("metrics", list(GRID_METRICS))),
        )
        if b.has("nrc_learners"):
            kw["nrc_learners"] = tuple(b.list("nrc_learners", []))
        return cls(**kw)


def _decay(text: str) -> float | None:
    text = str(text).strip().lower()
    if text in ("none", "off", "no", "false"):
        return None
    if text in ("default", "on", "yes", "true"):
        return DEFAULT_DECAY
    return float(text)


def _ci_from_settings(s: Settings) -> CiConfig:
    base = CiConfig()
    return CiConfig(
        burn_in=s.int("burn_in", base.burn_in),
        threshold=s.float("threshold", base.threshold),
        k=s.float("k", base.k),
        alpha=s.float("alpha", base.alpha),
        d=s.float("d", base.d),
    )


def _emp_from_settings(s: Settings) -> M.EmpParams:
    base = M.EmpParams()
    clv = s.float("clv", base.clv)
    gamma = s.get("gamma")
    return M.EmpParams(
        clv=clv,
        delta=s.float("delta", 10.0 / clv),
        phi=s.float("phi", 1.0 / clv),
        alpha=s.float("alpha", base.alpha),
        beta=s.float("beta", base.beta),
        gamma=float(gamma) if gamma is not None else None,
    )


def _datasets_from_settings(settings: Settings, seed: int) -> list[DatasetSource]:
    """``datasets=a,b`` with ``dataset.a.path=...`` or ``dataset.a.synth.*`` keys;
    ``synth.count=N`` adds N synthetic datasets built from the ``synth.*`` keys."""
    out = []
    schema = CdrSchema.from_settings(settings)
    for name in settings.list("datasets", []):
        sec = settings.section(f"dataset.{name}")
        if sec.has("path"):
            out.append(DatasetSource(name, path=sec.str("path", ""), schema=schema))
        else:
            cfg = SynthConfig.from_settings(sec, "synth")
            if not sec.has("synth.seed"):
                cfg = replace(cfg, seed=derive_seed(seed, "synth", name) % 2**32)
            out.append(DatasetSource(name, synth=cfg))
    count = settings.int("synth.count", 0)
    if count:
        base = SynthConfig.from_settings(settings, "synth")
        for i in range(count):
            name = f"synth-{i + 1:02d}"
            out.append(DatasetSource(name, synth=replace(base, seed=derive_seed(seed, "synth", name) % 2**32)))
    return out


# --- shared evaluation --------------------------------------------------------

def _metric_rows(dataset, architecture, model, timeframe, scores, labels, metric_names, emp, phash):
    rows = []
    for name in metric_names:
        try:
            v = M.evaluate(name, scores, labels, emp)
        except MetricError:
            v = float("nan")
        rows.append(ReportRow(dataset, architecture, model, timeframe, name, float(v), phash))
    return rows


def _map(fn, items: Sequence, workers: int, initializer=None, initargs=()):
    """Ordered map, in-process for one worker."""
    if workers <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers, initializer=initializer, initargs=initargs) as ex:
        return list(ex.map(fn, items))


# --- learner benchmark ------------------------------------------------------

def _learner_dataset(args) -> EvalReport:
    plan, ds = args
    report = EvalReport()
    if not plan.learners:
        return report
    tl = ds.load()
    phash = params_hash(plan.params())
    for tf in plan.timeframes:
        fr = frame(tf, plan.target_month, plan.long_months)
        for scheme in plan.schemes:
            spec = plan.spec(scheme)
            for learner in plan.learners:
                try:
                    s = tl.score(learner, spec, fr, plan.ci, plan.seed)
                except (PretrainingError, FittingError) as exc:
                    report.notices.append(f"{ds.name} {spec.key} {tf} {learner}: skipped ({exc})")
                    continue
                scores, labels = tl.evaluation(s, fr.target_month)
                report.rows += _metric_rows(ds.name, spec.key, learner, tf, scores, labels,
                                            plan.metrics, plan.emp, phash)
    return report


def run_learner_benchmark(plan: ExperimentPlan, workers: int = 1) -> EvalReport:
    """Score the target month with every learner, timeframe and weight scheme."""
    report = EvalReport()
    if not plan.learners:
        report.notices.append("empty learner set: nothing to do")
        log.warning("empty learner set: nothing to do")
        return report
    for r in _map(_learner_dataset, [(plan, ds) for ds in plan.datasets], workers):
        report.extend(r)
    return report


# --- non-relational benchmark -------------------------------------------------

def _nrc_dataset(args) -> EvalReport:
    plan, ds = args
    report = EvalReport()
    tl = ds.load()
    learners = plan.learners if plan.nrc_learners is None else plan.nrc_learners
    spec = plan.spec("length")
    phash = params_hash(plan.params())
    windows = OotWindows(
        train_features=(plan.target_month - 4, plan.target_month - 2),
        train_label=plan.target_month - 1,
        test_features=(plan.target_month - 3, plan.target_month - 1),
        test_label=plan.target_month,
    )
    for mode in plan.nrc_modes:
        use = learners if mode != "network_only" else ()
        if mode == "rl_only" and not use:
            report.notices.append(f"{ds.name}: rl_only skipped (no learners)")
            continue
        try:
            res = run_oot(tl, mode, use, windows, LogisticClassifier(l2=plan.l2), plan.oversample_ratio,
                          seed=derive_seed(plan.seed, ds.name, mode) % 2**32, spec=spec, ci=plan.ci)
        except (PretrainingError, FittingError) as exc:
            report.notices.append(f"{ds.name} nrc-{mode}: skipped ({exc})")
            continue
        report.rows += _metric_rows(ds.name, spec.key, f"nrc-{mode}", "oot", res.test.scores, res.test_labels,
                                    plan.metrics, plan.emp, phash)
        report.rows.append(ReportRow(ds.name, spec.key, f"nrc-{mode}", "oot", "n_features",
                                     float(len(res.columns)), phash))
    return report


def run_nrc_benchmark(plan: ExperimentPlan, workers: int = 1) -> EvalReport:
    """Out-of-time logistic models per feature mode, evaluated on the target month."""
    report = EvalReport()
    for r in _map(_nrc_dataset, [(plan, ds) for ds in plan.datasets], workers):
        report.extend(r)
    return report


# --- architecture grid -------------------------------------------------------

_WORKER: dict = {}


def _grid_init(plan: ExperimentPlan):
    _WORKER.clear()
    _WORKER["plan"] = plan
    _WORKER["timelines"] = {}


def _grid_cell(cell: GridCell) -> dict:
    plan: ExperimentPlan = _WORKER["plan"]
    tls = _WORKER["timelines"]
    if cell.dataset not in tls:
        tls.clear()
        tls[cell.dataset] = next(d for d in plan.datasets if d.name == cell.dataset).load()
    tl = tls[cell.dataset]
    fr = frame("short", plan.target_month)
    phash = params_hash({**plan.params(), "proxy": plan.proxy})
    g = tl.graph(cell.spec, fr.months)
    rows = [ReportRow(cell.dataset, cell.spec.key, plan.proxy, fr.name, "n_edges", float(g.n_edges), phash)]
    status = "ok"
    if g.n_edges == 0:
        status = "degenerate"
    else:
        try:
            s = tl.score(plan.proxy, cell.spec, fr, plan.ci, plan.seed)
            scores, labels = tl.evaluation(s, fr.target_month)
            rows += _metric_rows(cell.dataset, cell.spec.key, plan.proxy, fr.name, scores, labels,
                                 plan.grid_metrics, plan.emp, phash)
        except (PretrainingError, FittingError) as exc:
            status = f"degenerate: {exc}"
    if status != "ok":
        rows += [ReportRow(cell.dataset, cell.spec.key, plan.proxy, fr.name, m, float("nan"), phash)
                 for m in plan.grid_metrics]
    return {"cell": cell.hash, "key": cell.key, "status": status, "rows": [r.cells() for r in rows]}


def _read_log(path: Path) -> dict[str, dict]:
    """Completed cells from an append-only log; a torn trailing line is ignored."""
    done: dict[str, dict] = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                continue
            done[entry["cell"]] = entry
    return done


def _rows_from_entries(entries: Iterable[dict]) -> EvalReport:
    report = EvalReport()
    for e in entries:
        for c in e["rows"]:
            report.rows.append(ReportRow(c[0], c[1], c[2], c[3], c[4], float(c[5]), c[6]))
        if e["status"] != "ok":
            report.notices.append(f"{e['key']}: {e['status']}")
    return report


def run_architecture_grid(plan: ExperimentPlan, out_dir: str | Path, workers: int = 1,
                          limit: int | None = None) -> EvalReport:
    """Evaluate the proxy learner on every grid cell, resuming from ``grid_log.jsonl``.

    Finished cells are appended to the log as they complete, so an
    interrupted run picks up where it stopped. ``limit`` caps the number of
    new cells processed in this call (useful for staged runs).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = plan.grid_cells()
    log.info("architecture grid: %d cells per dataset, %d in total", plan.grid_size, len(cells))
    log_path = out / "grid_log.jsonl"
    done = _read_log(log_path)
    # rewrite the log if a torn line was dropped, so appends start on a clean line
    text = log_path.read_text(encoding="utf-8") if log_path.exists() else ""
    if text and not text.endswith("\n"):
        log_path.write_text("".join(json.dumps(e, sort_keys=True) + "\n" for e in done.values()), encoding="utf-8")
    todo = [c for c in cells if c.hash not in done]
    if limit is not None:
        todo = todo[:limit]
    with open(log_path, "a", encoding="utf-8") as fh:
        def record(entry):
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
            fh.flush()
            done[entry["cell"]] = entry

        if workers <= 1:
            _grid_init(plan)
            for c in todo:
                record(_grid_cell(c))
        else:
            with ProcessPoolExecutor(max_workers=workers, initializer=_grid_init, initargs=(plan,)) as ex:
                # group cells by dataset so each worker loads few timelines
                for entry in ex.map(_grid_cell, todo, chunksize=max(1, len(todo) // (workers * 8) or 1)):
                    record(entry)
    wanted = {c.hash for c in cells}
    report = _rows_from_entries(done[h] for h in sorted(done) if h in wanted)
    if all(c.hash in done for c in cells):
        report.write(out / "grid_report")
    return report


def arch_parts(key: str) -> tuple[str, str, str, str, str]:
    """Split a graph-spec key; the segment part may itself contain '/'."""
    parts = key.split("/")
    if len(parts) < 5:
        raise ConfigError(f"not an architecture key: {key!r}")
    return parts[0], parts[1], parts[2], "/".join(parts[3:-1]), parts[-1]


def grid_tables(report: EvalReport, metric: str = "auc") -> dict[str, list[list[str]]]:
    """Per dataset and reciprocity: rows = segmentation, columns = direction/scheme/decay."""
    tables: dict[str, dict] = {}
    for r in report.rows:
        if r.metric != metric:
            continue
        direction, scheme, decay, segment, recip = arch_parts(r.architecture)
        t = tables.setdefault(f"{r.dataset}/{recip}", {})
        t.setdefault(segment, {})[f"{direction}/{scheme}/{decay}"] = r.value
    out = {}
    for name, t in sorted(tables.items()):
        cols = sorted({c for row in t.values() for c in row})
        seg_order = [s.name for s in paper_segmentations()]
        segs = sorted(t, key=lambda s: (seg_order.index(s) if s in seg_order else len(seg_order), s))
        rows = [["segment", *cols]]
        rows += [[s, *(_fmt(t[s].get(c, float("nan"))) for c in cols)] for s in segs]
        out[name] = rows
    return out


# --- statistics -----------------------------------------------------------------

def _matrix(rows: list[ReportRow], metric: str) -> S.RankMatrix | None:
    """Score sets (dataset, architecture, timeframe) x models; incomplete sets are dropped."""
    cells: dict[tuple, dict[str, float]] = {}
    for r in rows:
        if r.metric == metric and not math.isnan(r.value):
            cells.setdefault((r.dataset, r.architecture, r.timeframe), {})[r.model] = r.value
    if not cells:
        return None
    models = sorted({m for c in cells.values() for m in c})
    sets = sorted(k for k, c in cells.items() if len(c) == len(models))
    if not sets:
        return None
    values = np.array([[cells[k][m] for m in models] for k in sets])
    lower_better = metric in ("n_edges",)
    return S.RankMatrix(tuple(models), tuple("/".join(k) for k in sets), values, not lower_better)


def _is_ci(model: str) -> bool:
    return not model.startswith("no-") and not model.startswith("nrc-")


def run_stats(report: EvalReport, alpha: float = 0.05, metrics: Sequence[str] | None = None) -> dict:
    """Friedman + Nemenyi per metric over learners, Kruskal-Wallis for CI vs no CI and
    relational vs non-relational, and the directional findings as soft checks."""
    rl_rows = [r for r in report.rows if not r.model.startswith("nrc-") and r.timeframe != "oot"]
    nrc_rows = [r for r in report.rows if r.model.startswith("nrc-")]
    names = metrics or sorted({r.metric for r in report.rows} - {"n_edges", "n_features"})
    summary: dict = {"alpha": alpha, "metrics": {}, "checks": {}}
    rank_ci, rank_noci, nrc_ranks = [], [], {}
    for metric in names:
        entry: dict = {}
        m = _matrix(rl_rows, metric)
        if m is None or m.k < 2 or m.n < 2:
            entry["learners"] = {"underpowered": True}
        else:
            fr = S.friedman(m)
            ent = {"underpowered": False, "n_sets": m.n, "k": m.k,
                   "friedman": {"statistic": fr.statistic, "pvalue": fr.pvalue},
                   "average_ranks": dict(zip(m.methods, m.average_ranks.tolist()))}
            if m.k <= S.MAX_K:
                ent["nemenyi"] = S.rank_diagram(m, alpha)
            entry["learners"] = ent
            r = m.average_ranks
            ci_mask = np.array([_is_ci(x) for x in m.methods])
            if ci_mask.any() and (~ci_mask).any():
                rank_ci.append(float(r[ci_mask].mean()))
                rank_noci.append(float(r[~ci_mask].mean()))
        vals = [r for r in rl_rows if r.metric == metric and not math.isnan(r.value)]
        ci_vals = [r.value for r in vals if _is_ci(r.model)]
        no_vals = [r.value for r in vals if not _is_ci(r.model)]
        if ci_vals and no_vals:
            kw = S.kruskal_wallis([no_vals, ci_vals])
            entry["kruskal_ci_vs_no_ci"] = {"statistic": kw.statistic, "pvalue": kw.pvalue,
                                            "n": [len(no_vals), len(ci_vals)]}
        nrc_vals = [r.value for r in nrc_rows if r.metric == metric and not math.isnan(r.value)]
        if nrc_vals and vals:
            kw = S.kruskal_wallis([[r.value for r in vals], nrc_vals])
            entry["kruskal_rl_vs_nrc"] = {"statistic": kw.statistic, "pvalue": kw.pvalue,
                                          "n": [len(vals), len(nrc_vals)]}
        nm = _matrix(nrc_rows, metric)
        if nm is not None and nm.k >= 2:
            entry["nrc"] = {"average_ranks": dict(zip(nm.methods, nm.average_ranks.tolist())), "n_sets": nm.n}
            if nm.n >= 2:
                fr = S.friedman(nm)
                entry["nrc"]["friedman"] = {"statistic": fr.statistic, "pvalue": fr.pvalue}
            for meth, rk in zip(nm.methods, nm.average_ranks.tolist()):
                nrc_ranks.setdefault(meth, []).append(rk)
        summary["metrics"][metric] = entry

    arch = _architecture_effects(report, names)
    if arch:
        summary["architecture"] = arch

    checks = summary["checks"]
    if all(k in nrc_ranks for k in ("nrc-all", "nrc-network_only", "nrc-rl_only")):
        a = float(np.mean(nrc_ranks["nrc-all"]))
        others = [float(np.mean(nrc_ranks[k])) for k in ("nrc-network_only", "nrc-rl_only")]
        checks["nrc_all_best"] = {"pass": bool(a < min(others)), "rank_all": a,
                                  "rank_network_only": others[0], "rank_rl_only": others[1]}
    if rank_ci:
        a, b = float(np.mean(rank_noci)), float(np.mean(rank_ci))
        checks["no_ci_better"] = {"pass": bool(a < b), "rank_no_ci": a, "rank_ci": b}
    summary["underpowered"] = not any(
        not e.get("learners", {}).get("underpowered", True) for e in summary["metrics"].values()
    )
    return summary


GRID_FACTORS = ("direction", "scheme", "decay", "segment", "reciprocity")


def _architecture_effects(report: EvalReport, metrics: Sequence[str]) -> dict:
    """Kruskal-Wallis across the levels of each grid factor, per model and metric.

    Only grid rows take part; they are the ones that also report ``n_edges``.
    """
    grid = {(r.dataset, r.architecture, r.model) for r in report.rows if r.metric == "n_edges"}
    out: dict = {}
    for metric in metrics:
        by_model: dict[str, list[ReportRow]] = {}
        for r in report.rows:
            if r.metric == metric and (r.dataset, r.architecture, r.model) in grid and not math.isnan(r.value):
                by_model.setdefault(r.model, []).append(r)
        for model, rows in sorted(by_model.items()):
            for pos, factor in enumerate(GRID_FACTORS):
                levels: dict[str, list[float]] = {}
                for r in rows:
                    levels.setdefault(arch_parts(r.architecture)[pos], []).append(r.value)
                if len(levels) < 2:
                    continue
                names = sorted(levels)
                kw = S.kruskal_wallis([levels[k] for k in names])
                out.setdefault(metric, {}).setdefault(model, {})[factor] = {
                    "statistic": kw.statistic, "pvalue": kw.pvalue,
                    "levels": {k: float(np.mean(levels[k])) for k in names},
                }
    return out


def dump_summary(summary: dict) -> str:
    return json.dumps(_clean(summary), indent=1, sort_keys=True) + "\n"


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return None if math.isnan(v) else v
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x
