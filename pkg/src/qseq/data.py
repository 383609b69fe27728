"""Attempt ingestion: KDD-Cup Algebra style exports, normalized CSV, and a
synthetic low-rank generator with known ground-truth difficulty."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import AnswerAttempt

log = logging.getLogger(__name__)

KDD_STUDENT = "Anon Student Id"
KDD_UNIT = "Problem Hierarchy"
KDD_PROBLEM = "Problem Name"
KDD_STEP = "Step Name"
KDD_CORRECT = "Correct First Attempt"
KDD_INCORRECTS = "Incorrects"
KDD_DURATION = "Step Duration (sec)"

NORMALIZED_COLUMNS = ["student", "question", "first_attempt_grade", "retries", "duration", "questionnaire"]


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n_students: int = 30
    n_questions: int = 40
    n_questionnaires: int = 4
    latent_dim: int = 3
    noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if min(self.n_students, self.n_questions, self.n_questionnaires, self.latent_dim) < 1:
            raise ValueError("synthetic counts must be positive")
        if self.n_questionnaires > self.n_questions:
            raise ValueError("more questionnaires than questions")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


@dataclass(frozen=True)
class DatasetSpec:
    """Either a file ``path`` or ``synthetic`` generator parameters."""

    path: str | None = None
    synthetic: SyntheticSpec | None = None
    max_attempts: int | None = None
    seed: int = 0
    questionnaire_column: str = KDD_UNIT
    question_key: str = "step"
    max_malformed_fraction: float = 0.01

    def __post_init__(self):
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("give exactly one of path or synthetic")
        if self.max_attempts is not None and self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.question_key not in ("step", "problem"):
            raise ValueError("question_key must be 'step' or 'problem'")


@dataclass
class IngestResult:
    attempts: list[AnswerAttempt] = field(default_factory=list)
    n_rows: int = 0
    n_malformed: int = 0
    n_missing_duration: int = 0


@dataclass
class SyntheticData:
    attempts: list[AnswerAttempt]
    # noisy difficulty that generated each attempt, student -> question -> p
    true_difficulty: dict[str, dict[str, float]]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Every student answers every question once.

    Difficulty is ``sigmoid(u . v + noise)``. The first latent coordinate of
    every student is fixed to 1, so the first question coordinate acts as a
    shared difficulty level and the rest is personal. Attempt fields are
    monotone in difficulty (grade strictly), so any valid difficulty weights
    recover the same per-student order.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.latent_dim
    users = rng.normal(size=(spec.n_students, d))
    users[:, 0] = 1.0
    items = rng.normal(size=(spec.n_questions, d))
    noise = rng.normal(scale=spec.noise, size=(spec.n_students, spec.n_questions))
    p = _sigmoid(users @ items.T / math.sqrt(d) * 2.0 + noise)

    sw = len(str(spec.n_students - 1))
    qw = len(str(spec.n_questions - 1))
    sids = [f"s{j:0{sw}d}" for j in range(spec.n_students)]
    qids = [f"q{j:0{qw}d}" for j in range(spec.n_questions)]
    unit = [f"unit{j * spec.n_questionnaires // spec.n_questions}" for j in range(spec.n_questions)]

    attempts = []
    truth: dict[str, dict[str, float]] = {}
    for a, s in enumerate(sids):
        truth[s] = {}
        for b, q in enumerate(qids):
            pv = float(p[a, b])
            truth[s][q] = pv
            attempts.append(AnswerAttempt(
                student=s,
                question=q,
                first_attempt_grade=1.0 - pv,
                retries=int(pv * 5),
                duration=240.0 * pv,
                questionnaire=unit[b],
            ))
    return SyntheticData(attempts, truth)


def _parse_duration(raw: str | None) -> float | None:
    if raw is None:
        return None
    raw = raw.strip()
    if raw in ("", ".", "NA", "nan"):
        return None
    return float(raw)


def read_kdd(
    path: str | Path,
    questionnaire_column: str = KDD_UNIT,
    question_key: str = "step",
    max_malformed_fraction: float = 0.01,
) -> IngestResult:
    """Parse a tab-separated KDD Cup 2010 (Algebra) export.

    Retries are the ``Incorrects`` count. Question identity is problem plus
    step (``question_key="step"``) or the problem alone.
    """
    result = IngestResult()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None:
            log.warning("%s is empty", path)
            return result
        required = {KDD_STUDENT, KDD_PROBLEM, KDD_CORRECT, KDD_INCORRECTS, KDD_DURATION, questionnaire_column}
        if question_key == "step":
            required.add(KDD_STEP)
        missing = required - set(reader.fieldnames)
        if missing:
            raise IngestError(f"{path}: missing columns {sorted(missing)}")

        for row in reader:
            result.n_rows += 1
            try:
                question = row[KDD_PROBLEM].strip()
                if question_key == "step":
                    question = f"{question}::{row[KDD_STEP].strip()}"
                duration = _parse_duration(row[KDD_DURATION])
                if duration is None:
                    result.n_missing_duration += 1
                    duration = 0.0
                attempt = AnswerAttempt(
                    student=row[KDD_STUDENT].strip(),
                    question=question,
                    first_attempt_grade=float(row[KDD_CORRECT]),
                    retries=int(row[KDD_INCORRECTS]),
                    duration=duration,
                    questionnaire=(row[questionnaire_column] or "").strip(),
                )
            except (TypeError, ValueError, AttributeError):
                result.n_malformed += 1
                continue
            result.attempts.append(attempt)

    if result.n_rows == 0:
        log.warning("%s has a header but no rows", path)
    _check_malformed(path, result, max_malformed_fraction)
    if result.n_missing_duration:
        log.warning("%s: %d rows without duration, set to 0", path, result.n_missing_duration)
    return result


def _check_malformed(path, result: IngestResult, max_fraction: float) -> None:
    if not result.n_malformed:
        return
    frac = result.n_malformed / result.n_rows
    if frac > max_fraction:
        raise IngestError(
            f"{path}: {result.n_malformed} of {result.n_rows} rows malformed "
            f"({frac:.2%} > {max_fraction:.2%})"
        )
    log.warning("%s: skipped %d malformed rows", path, result.n_malformed)


def read_attempts_csv(path: str | Path, max_malformed_fraction: float = 0.01) -> IngestResult:
    """Read the comma-separated format written by :func:`write_attempts_csv`."""
    result = IngestResult()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            log.warning("%s is empty", path)
            return result
        missing = set(NORMALIZED_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise IngestError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            result.n_rows += 1
            try:
                result.attempts.append(AnswerAttempt(
                    student=row["student"],
                    question=row["question"],
                    first_attempt_grade=float(row["first_attempt_grade"]),
                    retries=int(row["retries"]),
                    duration=float(row["duration"]),
                    questionnaire=row["questionnaire"],
                ))
            except (TypeError, ValueError):
                result.n_malformed += 1
    _check_malformed(path, result, max_malformed_fraction)
    return result


def write_attempts_csv(attempts: list[AnswerAttempt], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(NORMALIZED_COLUMNS)
        for a in attempts:
            w.writerow([a.student, a.question, repr(a.first_attempt_grade), a.retries,
                        repr(a.duration), a.questionnaire])


def _is_normalized_csv(path: str | Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    return header.strip().split(",") == NORMALIZED_COLUMNS


def cap_attempts(attempts: list[AnswerAttempt], max_attempts: int | None, seed: int) -> list[AnswerAttempt]:
    """Seeded sample of ``max_attempts`` attempts, kept in their original order."""
    if max_attempts is None or len(attempts) <= max_attempts:
        return attempts
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.permutation(len(attempts))[:max_attempts])
    return [attempts[j] for j in keep]


def ingest(spec: DatasetSpec) -> list[AnswerAttempt]:
    if spec.synthetic is not None:
        attempts = generate_synthetic(spec.synthetic).attempts
    elif _is_normalized_csv(spec.path):
        attempts = read_attempts_csv(spec.path, spec.max_malformed_fraction).attempts
    else:
        attempts = read_kdd(
            spec.path,
            questionnaire_column=spec.questionnaire_column,
            question_key=spec.question_key,
            max_malformed_fraction=spec.max_malformed_fraction,
        ).attempts
    return cap_attempts(attempts, spec.max_attempts, spec.seed)
