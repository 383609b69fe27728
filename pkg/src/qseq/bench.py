"""EduRank vs NCF comparison, NCF hyperparameter sweeps, and report files."""

from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import edurank
from .core import AnswerAttempt, PartialOrder, QuestionId, StudentId
from .difficulty import DEFAULT_WEIGHTS, DifficultyWeights, orders_from_log, scores_from_log
from .metrics import DegenerateTestError, TTestResult, ap_correlation, ndpm, paired_t_test, spearman_rho
from .ncf import NcfConfig, fit_model, records_from_scores
from .protocol import EvalCase

log = logging.getLogger(__name__)

Ranker = Callable[[StudentId, frozenset[QuestionId]], PartialOrder]

METRICS = ("sap", "sr", "ndpm")
TESTED_METRICS = ("sap", "sr")
REPORT_COLUMNS = ["algorithm", "student", "questionnaire", "n_candidates", "sap", "sr", "ndpm", "status", "wall_time_s"]


@dataclass
class EvalRow:
    algorithm: str
    student: StudentId
    questionnaire: str
    n_candidates: int
    sap: float = math.nan
    sr: float = math.nan
    ndpm: float = math.nan
    status: str = "ok"
    wall_time_s: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class TTestOutcome:
    metric: str
    result: TTestResult | None
    note: str = ""


@dataclass
class EvalReport:
    algorithms: list[str]
    rows: list[EvalRow]
    ttests: list[TTestOutcome] = field(default_factory=list)
    train_seconds: dict[str, float] = field(default_factory=dict)

    def means(self) -> dict[str, dict[str, float]]:
        return mean_metrics(self.rows, self.algorithms)


def mean_metrics(rows: Sequence[EvalRow], algorithms: Sequence[str]) -> dict[str, dict[str, float]]:
    out = {}
    for alg in algorithms:
        good = [r for r in rows if r.algorithm == alg and r.ok]
        out[alg] = {
            m: (float(np.mean([getattr(r, m) for r in good])) if good else math.nan)
            for m in METRICS
        }
        out[alg]["n"] = len(good)
    return out


def score_case(case: EvalCase, predicted: PartialOrder) -> tuple[float, float, float]:
    """SAP, SR and NDPM of a prediction linearized with the global tie-break."""
    lin = PartialOrder.from_sequence(predicted.linearize(), predicted.owner)
    return (
        ap_correlation(case.reference, lin),
        spearman_rho(case.reference, lin),
        ndpm(case.reference, lin),
    )


def evaluate(cases: Sequence[EvalCase], rankers: Mapping[str, Ranker]) -> list[EvalRow]:
    """Rank and score every case with every ranker; failures become rows."""
    rows = []
    for case in cases:
        for name, ranker in rankers.items():
            row = EvalRow(name, case.student, case.questionnaire, len(case.candidates))
            t0 = time.perf_counter()
            try:
                predicted = ranker(case.student, case.candidates)
                row.sap, row.sr, row.ndpm = score_case(case, predicted)
            except Exception as exc:  # reported per row, never dropped
                row.status = f"failed: {type(exc).__name__}: {exc}"
                log.warning("%s failed on %s/%s: %s", name, case.student, case.questionnaire, exc)
            row.wall_time_s = time.perf_counter() - t0
            rows.append(row)
    return rows


def paired_tests(
    rows: Sequence[EvalRow],
    first: str,
    second: str,
    alpha: float = 0.05,
) -> list[TTestOutcome]:
    """Paired t-tests of ``first - second`` over cases where both succeeded."""
    by_case: dict[tuple[str, str], dict[str, EvalRow]] = {}
    for r in rows:
        if r.ok:
            by_case.setdefault((r.student, r.questionnaire), {})[r.algorithm] = r
    both = [v for _, v in sorted(by_case.items()) if first in v and second in v]
    outcomes = []
    for m in TESTED_METRICS:
        pairs = [(getattr(v[first], m), getattr(v[second], m)) for v in both]
        if len(pairs) < 2:
            outcomes.append(TTestOutcome(m, None, f"not enough paired cases ({len(pairs)})"))
            continue
        try:
            outcomes.append(TTestOutcome(m, paired_t_test(pairs, alpha)))
        except DegenerateTestError:
            outcomes.append(TTestOutcome(m, None, "no difference (zero-variance differences)"))
    return outcomes


def edurank_ranker(training: Sequence[AnswerAttempt], memory_size: int, weights: DifficultyWeights) -> Ranker:
    orders = orders_from_log(training, weights)
    return lambda student, candidates: edurank.rank(student, candidates, orders, memory_size)


def ncf_ranker(training: Sequence[AnswerAttempt], config: NcfConfig, weights: DifficultyWeights):
    records = records_from_scores(scores_from_log(training, weights))
    model, history = fit_model(records, config)
    return model.rank, model, history


def run_comparison(
    training: Sequence[AnswerAttempt],
    cases: Sequence[EvalCase],
    memory_size: int = 5,
    ncf_config: NcfConfig = NcfConfig(),
    weights: DifficultyWeights = DEFAULT_WEIGHTS,
    alpha: float = 0.05,
    rankers: Mapping[str, Ranker] | None = None,
) -> EvalReport:
    """Evaluate NCF and EduRank on ``cases`` and t-test NCF against EduRank.

    ``rankers`` replaces the two trained algorithms (mainly for plumbing
    checks); the first two entries are the t-tested pair.
    """
    train_seconds = {}
    if rankers is None:
        t0 = time.perf_counter()
        ncf_rank, _, _ = ncf_ranker(training, ncf_config, weights)
        train_seconds["ncf"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        edu_rank = edurank_ranker(training, memory_size, weights)
        train_seconds["edurank"] = time.perf_counter() - t0
        rankers = {"ncf": ncf_rank, "edurank": edu_rank}
    algorithms = list(rankers)
    rows = evaluate(cases, rankers)
    ttests = paired_tests(rows, algorithms[0], algorithms[1], alpha) if len(algorithms) >= 2 else []
    return EvalReport(algorithms, rows, ttests, train_seconds)


# -- sweep -------------------------------------------------------------------


@dataclass
class SweepRow:
    activation: str
    k: int
    layers: int
    mean_sap: float = math.nan
    mean_sr: float = math.nan
    mean_ndpm: float = math.nan
    n_ok: int = 0
    train_seconds: float = math.nan
    status: str = "ok"


def make_grid(
    activations: Iterable[str],
    ks: Iterable[int],
    layer_counts: Iterable[int],
) -> list[tuple[str, int, int]]:
    grid = []
    seen = set()
    for point in itertools.product(activations, ks, layer_counts):
        if point in seen:
            log.warning("duplicate grid point %s ignored", point)
            continue
        seen.add(point)
        grid.append(point)
    if not grid:
        raise ValueError("empty sweep grid")
    return grid


def _sweep_point(args) -> SweepRow:
    training, cases, base, weights, (activation, k, layers) = args
    row = SweepRow(activation, k, layers)
    try:
        config = replace(base, activation=activation, k=k, layers=layers)
        t0 = time.perf_counter()
        rank, _, _ = ncf_ranker(training, config, weights)
        row.train_seconds = time.perf_counter() - t0
        rows = evaluate(cases, {"ncf": rank})
        means = mean_metrics(rows, ["ncf"])["ncf"]
        row.mean_sap, row.mean_sr, row.mean_ndpm = means["sap"], means["sr"], means["ndpm"]
        row.n_ok = int(means["n"])
        if row.n_ok < len(cases):
            row.status = f"{len(cases) - row.n_ok} cases failed"
    except Exception as exc:
        row.status = f"failed: {type(exc).__name__}: {exc}"
        log.warning("sweep point %s failed: %s", (activation, k, layers), exc)
    return row


def sweep(
    training: Sequence[AnswerAttempt],
    cases: Sequence[EvalCase],
    grid: Sequence[tuple[str, int, int]],
    base_config: NcfConfig = NcfConfig(),
    weights: DifficultyWeights = DEFAULT_WEIGHTS,
    parallel: bool = False,
) -> list[SweepRow]:
    """Evaluate NCF once per (activation, k, layers) grid point on fixed data and seed.

    Points run one after another unless ``parallel``; parallel wall-times
    are not comparable across points.
    """
    grid = _dedupe_grid(grid)
    jobs = [(list(training), list(cases), base_config, weights, point) for point in grid]
    if parallel:
        with ProcessPoolExecutor() as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(job) for job in jobs]


def _dedupe_grid(grid: Sequence[tuple[str, int, int]]) -> list[tuple[str, int, int]]:
    out = []
    for point in grid:
        point = tuple(point)
        if point in out:
            log.warning("duplicate grid point %s ignored", point)
            continue
        out.append(point)
    if not out:
        raise ValueError("empty sweep grid")
    return out


def sweep_panels(rows: Sequence[SweepRow]) -> dict[str, list[dict]]:
    """Per-parameter marginals (mean over the other grid axes) for plotting."""
    panels = {}
    for param in ("activation", "k", "layers"):
        values = sorted({getattr(r, param) for r in rows}, key=str if param == "activation" else None)
        panel = []
        for v in values:
            sel = [r for r in rows if getattr(r, param) == v and r.n_ok > 0]
            panel.append({
                param: v,
                "mean_sap": float(np.mean([r.mean_sap for r in sel])) if sel else math.nan,
                "mean_sr": float(np.mean([r.mean_sr for r in sel])) if sel else math.nan,
                "mean_train_seconds": float(np.mean([r.train_seconds for r in sel])) if sel else math.nan,
                "n_configs": len(sel),
            })
        panels[param] = panel
    return panels


# -- report files ------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def write_report(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.csv",
        "means": out / "means.csv",
        "ttest": out / "ttest.csv",
        "summary": out / "summary.txt",
    }
    with open(paths["report"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in REPORT_COLUMNS])

    means = report.means()
    with open(paths["means"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "mean_sap", "mean_sr", "mean_ndpm", "n_cases"])
        for alg in report.algorithms:
            m = means[alg]
            w.writerow([alg, _fmt(m["sap"]), _fmt(m["sr"]), _fmt(m["ndpm"]), m["n"]])

    write_ttests(report.ttests, paths["ttest"])
    paths["summary"].write_text(format_summary(report))
    return paths


def write_ttests(outcomes: Sequence[TTestOutcome], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "t_statistic", "dof", "t_critical", "alpha", "mean_difference", "reject_null", "note"])
        for o in outcomes:
            r = o.result
            if r is None:
                w.writerow([o.metric, "", "", "", "", "", "", o.note])
            else:
                w.writerow([o.metric, _fmt(r.t_statistic), r.degrees_of_freedom, _fmt(r.t_critical),
                            _fmt(r.alpha), _fmt(r.mean_difference), r.reject_null, o.note])


def format_summary(report: EvalReport) -> str:
    lines = ["algorithm   mean SAP   mean SR   mean NDPM   cases"]
    for alg, m in report.means().items():
        lines.append(f"{alg:<10} {m['sap']:9.4f} {m['sr']:9.4f} {m['ndpm']:11.4f}   {m['n']}")
    failed = [r for r in report.rows if not r.ok]
    if failed:
        lines.append(f"{len(failed)} failed rows (see report.csv)")
    if report.ttests:
        a, b = report.algorithms[:2]
        lines.append("")
        lines.append(f"paired t-test, {a} - {b}")
        for o in report.ttests:
            if o.result is None:
                lines.append(f"  {o.metric}: {o.note}")
            else:
                r = o.result
                verdict = "reject H0" if r.reject_null else "keep H0"
                lines.append(
                    f"  {o.metric}: t={r.t_statistic:.4f} dof={r.degrees_of_freedom} "
                    f"t_crit={r.t_critical:.4f} (alpha={r.alpha}) -> {verdict}"
                )
    if report.train_seconds:
        lines.append("")
        for alg, sec in report.train_seconds.items():
            lines.append(f"{alg} fit time: {sec:.3f} s")
    return "\n".join(lines) + "\n"


def read_report(path: str | Path) -> list[EvalRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(EvalRow(
                algorithm=rec["algorithm"],
                student=rec["student"],
                questionnaire=rec["questionnaire"],
                n_candidates=int(rec["n_candidates"]),
                sap=float(rec["sap"]) if rec["sap"] else math.nan,
                sr=float(rec["sr"]) if rec["sr"] else math.nan,
                ndpm=float(rec["ndpm"]) if rec["ndpm"] else math.nan,
                status=rec["status"],
                wall_time_s=float(rec["wall_time_s"] or 0.0),
            ))
    return rows


SWEEP_COLUMNS = ["activation", "k", "layers", "mean_sap", "mean_sr", "mean_ndpm", "n_ok", "train_seconds", "status"]


def write_sweep(rows: Sequence[SweepRow], out_dir: str | Path, parallel: bool = False) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"sweep": out / "sweep.csv"}
    with open(paths["sweep"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS + ["wall_time_comparable"])
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in SWEEP_COLUMNS] + [not parallel])
    for param, panel in sweep_panels(rows).items():
        p = out / f"sweep_by_{param}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(panel[0]) if panel else [param])
            for entry in panel:
                w.writerow([_fmt(v) for v in entry.values()])
        paths[f"by_{param}"] = p
    return paths
