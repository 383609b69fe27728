"""Command line entry point: ``qseq {ingest,bench,sweep,ttest}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .bench import (
    make_grid,
    paired_tests,
    read_report,
    run_comparison,
    sweep,
    write_report,
    write_sweep,
    write_ttests,
)
from .data import DatasetSpec, IngestError, SyntheticSpec, ingest, write_attempts_csv
from .difficulty import DifficultyWeights
from .ncf import ACTIVATIONS, NcfConfig
from .protocol import ProtocolError, make_cases

log = logging.getLogger("qseq")


def _synthetic_arg(text: str) -> tuple[int, int, int]:
    try:
        s, q, u = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected STUDENTSxQUESTIONSxQUESTIONNAIRES, e.g. 30x40x4") from None
    return s, q, u


def _int_range(text: str) -> list[int]:
    """``20:80:20`` (inclusive) or ``20,40,80``."""
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        start, stop = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(start, stop + 1, step))
    return [int(x) for x in text.split(",")]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="KDD-style tab-separated export or normalized attempts CSV")
    src.add_argument("--synthetic", type=_synthetic_arg, metavar="SxQxU",
                     help="synthetic data: students x questions x questionnaires")
    p.add_argument("--latent-dim", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--max-attempts", type=int, default=None)
    p.add_argument("--questionnaire-column", default="Problem Hierarchy")
    p.add_argument("--question-key", choices=("step", "problem"), default="step")
    p.add_argument("--max-malformed", type=float, default=0.01, help="fraction of rows allowed to be malformed")
    p.add_argument("--seed", type=int, default=0)


def _add_protocol_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--students", type=int, default=3)
    p.add_argument("--questionnaires", type=int, default=4)
    p.add_argument("--holdout-fraction", type=float, default=0.5)
    p.add_argument("--w-grade", type=float, default=0.5)
    p.add_argument("--w-retries", type=float, default=0.3)
    p.add_argument("--w-duration", type=float, default=0.2)
    p.add_argument("--retry-cap", type=int, default=5)
    p.add_argument("--duration-cap", type=float, default=300.0)
    p.add_argument("--dropout", type=float, default=0.25)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--out", required=True, help="output directory")


def _dataset_spec(args) -> DatasetSpec:
    synthetic = None
    if args.synthetic is not None:
        s, q, u = args.synthetic
        synthetic = SyntheticSpec(s, q, u, latent_dim=args.latent_dim, noise=args.noise, seed=args.seed)
    return DatasetSpec(
        path=args.data,
        synthetic=synthetic,
        max_attempts=args.max_attempts,
        seed=args.seed,
        questionnaire_column=args.questionnaire_column,
        question_key=args.question_key,
        max_malformed_fraction=args.max_malformed,
    )


def _weights(args) -> DifficultyWeights:
    return DifficultyWeights(args.w_grade, args.w_retries, args.w_duration, args.retry_cap, args.duration_cap)


def _prepare(args):
    attempts = ingest(_dataset_spec(args))
    weights = _weights(args)
    training, cases = make_cases(
        attempts, args.students, args.questionnaires, args.seed, weights, args.holdout_fraction
    )
    log.info("%d attempts, %d training, %d cases", len(attempts), len(training), len(cases))
    return training, cases, weights


def cmd_ingest(args) -> int:
    attempts = ingest(_dataset_spec(args))
    students = {a.student for a in attempts}
    questions = {a.question for a in attempts}
    units = {a.questionnaire for a in attempts}
    print(f"{len(attempts)} attempts, {len(students)} students, {len(questions)} questions, {len(units)} questionnaires")
    if args.out:
        write_attempts_csv(attempts, args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    training, cases, weights = _prepare(args)
    config = NcfConfig(
        k=args.k, layers=args.layers, activation=args.activation, dropout_rate=args.dropout,
        batch_size=args.batch_size, epochs=args.epochs, seed=args.seed,
    )
    report = run_comparison(training, cases, args.memory_size, config, weights, args.alpha)
    paths = write_report(report, args.out)
    print(paths["summary"].read_text(), end="")
    return 0


def cmd_sweep(args) -> int:
    training, cases, weights = _prepare(args)
    grid = make_grid(args.activation_set.split(","), _int_range(args.k_range), _int_range(args.layer_set))
    base = NcfConfig(dropout_rate=args.dropout, batch_size=args.batch_size, epochs=args.epochs, seed=args.seed)
    rows = sweep(training, cases, grid, base, weights, parallel=args.parallel)
    paths = write_sweep(rows, args.out, parallel=args.parallel)
    for r in rows:
        print(f"{r.activation:<7} k={r.k:<3} l={r.layers:<2} SAP={r.mean_sap:.4f} SR={r.mean_sr:.4f} "
              f"fit={r.train_seconds:.2f}s {r.status}")
    print(f"wrote {paths['sweep']}")
    return 0


def cmd_ttest(args) -> int:
    rows = read_report(args.report)
    algorithms = list(dict.fromkeys(r.algorithm for r in rows))
    if len(algorithms) < 2:
        print("report needs two algorithms", file=sys.stderr)
        return 2
    first = args.first or algorithms[0]
    second = args.second or next(a for a in algorithms if a != first)
    outcomes = paired_tests(rows, first, second, args.alpha)
    print(f"paired t-test, {first} - {second}")
    for o in outcomes:
        if o.result is None:
            print(f"  {o.metric}: {o.note}")
        else:
            r = o.result
            print(f"  {o.metric}: t={r.t_statistic:.4f} dof={r.degrees_of_freedom} "
                  f"t_crit={r.t_critical:.4f} reject_null={r.reject_null}")
    if args.out:
        write_ttests(outcomes, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qseq", description="Personalized question sequencing: EduRank vs NCF")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset and optionally write normalized attempts CSV")
    _add_data_args(p)
    p.add_argument("--out", help="normalized attempts CSV to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bench", help="EduRank vs NCF on held-out questionnaires")
    _add_data_args(p)
    _add_protocol_args(p)
    p.add_argument("--memory-size", type=int, default=5)
    p.add_argument("--k", type=int, default=40)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--activation", choices=ACTIVATIONS, default="tanh")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="NCF grid over activation, k and depth")
    _add_data_args(p)
    _add_protocol_args(p)
    p.add_argument("--k-range", default="20:80:20")
    p.add_argument("--layer-set", default="0,1,2,4,8")
    p.add_argument("--activation-set", default="tanh,linear,relu")
    p.add_argument("--parallel", action="store_true", help="run grid points in processes (wall-times not comparable)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ttest", help="recompute paired t-tests from a report.csv")
    p.add_argument("--report", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--first", help="algorithm on the left of the difference")
    p.add_argument("--second")
    p.add_argument("--out", help="CSV to write")
    p.set_defaults(func=cmd_ttest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ProtocolError, IngestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
