import logging

import pytest

from kdd_fixture import write_kdd
from qseq.data import (
    DatasetSpec,
    IngestError,
    SyntheticSpec,
    cap_attempts,
    generate_synthetic,
    ingest,
    read_attempts_csv,
    read_kdd,
    write_attempts_csv,
)
from qseq.difficulty import difficulty_of

THREE_ROWS = [
    ("stu1", "Unit A, Section 1", "P1", "3x=6", "12.5", 1, 0),
    ("stu1", "Unit A, Section 1", "P1", "x=2", "40", 0, 2),
    ("stu2", "Unit B", "P7", "y+1=0", "8", 1, 0),
]


def test_reads_kdd_rows(tmp_path):
    path = tmp_path / "algebra.txt"
    write_kdd(path, THREE_ROWS)
    res = read_kdd(path)
    assert res.n_rows == 3 and res.n_malformed == 0
    a = res.attempts[1]
    assert (a.student, a.question, a.first_attempt_grade, a.retries, a.duration, a.questionnaire) == (
        "stu1", "P1::x=2", 0.0, 2, 40.0, "Unit A, Section 1")


def test_problem_key(tmp_path):
    path = tmp_path / "algebra.txt"
    write_kdd(path, THREE_ROWS)
    assert [a.question for a in read_kdd(path, question_key="problem").attempts] == ["P1", "P1", "P7"]


def test_empty_file_warns(tmp_path, caplog):
    path = tmp_path / "empty.txt"
    path.write_text("")
    with caplog.at_level(logging.WARNING):
        assert read_kdd(path).attempts == []
    assert "empty" in caplog.text


def test_missing_column(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("Anon Student Id\tProblem Name\nx\ty\n")
    with pytest.raises(IngestError, match="missing columns"):
        read_kdd(path)


def test_missing_duration_becomes_zero(tmp_path, caplog):
    path = tmp_path / "algebra.txt"
    write_kdd(path, THREE_ROWS + [("stu2", "Unit B", "P7", "y=-1", "", 0, 1)])
    with caplog.at_level(logging.WARNING):
        res = read_kdd(path)
    assert res.n_missing_duration == 1
    assert res.attempts[-1].duration == 0.0
    assert "without duration" in caplog.text


def test_malformed_threshold(tmp_path):
    good = [("s", "U", f"P{j}", "a", "5", 1, 0) for j in range(199)]
    path = tmp_path / "algebra.txt"
    write_kdd(path, good + [("s", "U", "Pbad", "a", "5", "yes", 0)])
    res = read_kdd(path)  # 1 of 200 rows = 0.5% is tolerated
    assert res.n_malformed == 1 and len(res.attempts) == 199
    write_kdd(path, good[:50] + [("s", "U", "Pbad", "a", "5", "yes", 0)])
    with pytest.raises(IngestError, match="malformed"):
        read_kdd(path)


def test_synthetic_shape_and_determinism():
    spec = SyntheticSpec()
    d1, d2 = generate_synthetic(spec), generate_synthetic(spec)
    assert d1.attempts == d2.attempts
    assert len(d1.attempts) == 30 * 40
    assert len({a.questionnaire for a in d1.attempts}) == 4
    assert {a.questionnaire for a in d1.attempts if a.question == "q00"} == {"unit0"}
    assert generate_synthetic(SyntheticSpec(seed=1)).attempts != d1.attempts


def test_synthetic_difficulty_follows_truth():
    data = generate_synthetic(SyntheticSpec(n_students=5, n_questions=12, n_questionnaires=3))
    for a in data.attempts:
        for b in data.attempts:
            if a.student == b.student and data.true_difficulty[a.student][a.question] > data.true_difficulty[b.student][b.question]:
                assert difficulty_of(a) > difficulty_of(b)


def test_cap_attempts():
    attempts = generate_synthetic(SyntheticSpec(n_students=4, n_questions=10, n_questionnaires=2)).attempts
    capped = cap_attempts(attempts, 7, seed=3)
    assert len(capped) == 7
    assert capped == cap_attempts(attempts, 7, seed=3)
    idx = [attempts.index(a) for a in capped]
    assert idx == sorted(idx)
    assert cap_attempts(attempts, None, 0) is attempts


def test_normalized_round_trip(tmp_path):
    attempts = generate_synthetic(SyntheticSpec(n_students=3, n_questions=6, n_questionnaires=2)).attempts
    path = tmp_path / "attempts.csv"
    write_attempts_csv(attempts, path)
    assert read_attempts_csv(path).attempts == attempts
    assert ingest(DatasetSpec(path=str(path))) == attempts


def test_ingest_detects_kdd(tmp_path):
    path = tmp_path / "algebra.txt"
    write_kdd(path, THREE_ROWS)
    assert len(ingest(DatasetSpec(path=str(path), max_attempts=2))) == 2


def test_dataset_spec_validation():
    with pytest.raises(ValueError):
        DatasetSpec()
    with pytest.raises(ValueError):
        DatasetSpec(path="x", synthetic=SyntheticSpec())
    with pytest.raises(ValueError):
        SyntheticSpec(n_questionnaires=50)
