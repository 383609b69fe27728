"""Neural collaborative filtering regressor for difficulty scores, in numpy.

Architecture: user and question embeddings (row lookup, width ``k``) are
concatenated into a ``2k`` vector, passed through ``layers`` dense layers
with a shared activation and inverted dropout, and reduced to a single
sigmoid output neuron. Trained with Adadelta on mean squared error.

Hidden widths follow the usual NCF tower: ``2k -> k``, then halving per
layer, never below 8 (and never wider than the previous layer).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import PartialOrder, QuestionId, StudentId, order_from_scores

log = logging.getLogger(__name__)

ACTIVATIONS = ("tanh", "relu", "linear")
FORMAT_VERSION = 1


class UnknownEntityError(KeyError):
    """A student or question that the model was not built with."""


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass(frozen=True)
class NcfConfig:
    k: int = 40
    layers: int = 1
    activation: str = "tanh"
    dropout_rate: float = 0.25
    batch_size: int = 1024
    epochs: int = 20
    seed: int = 0
    # Adadelta
    learning_rate: float = 1.0
    rho: float = 0.95
    eps: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.layers < 0:
            raise ValueError("layers must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def tower_widths(k: int, layers: int) -> list[int]:
    """Output width of each hidden layer."""
    widths = []
    w = k
    for t in range(layers):
        if t > 0:
            w = max(w // 2, min(8, w))
        widths.append(w)
    return widths


@dataclass(frozen=True)
class TrainingRecord:
    student: StudentId
    question: QuestionId
    target: float

    def __post_init__(self):
        if not 0.0 <= self.target <= 1.0:
            raise ValueError(f"target must be in [0, 1], got {self.target}")


@dataclass
class TrainingLog:
    epoch_mse: list[float] = field(default_factory=list)
    # mean L2 norm of each layer's weight gradient, per epoch
    grad_norms: list[dict[str, float]] = field(default_factory=list)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return np.ones_like(z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class NcfModel:
    """Embeddings, dense tower and Adadelta state for one training run.

    Parameters live in ``self.params`` keyed by name: ``user_emb``,
    ``item_emb``, ``W{t}``/``b{t}`` per hidden layer, ``w_out`` and ``b_out``.
    """

    def __init__(
        self,
        config: NcfConfig,
        students: Sequence[StudentId],
        questions: Sequence[QuestionId],
    ):
        students, questions = list(students), list(questions)
        if not students or not questions:
            raise ValueError("need at least one student and one question")
        if len(set(students)) != len(students):
            raise ValueError("duplicate student ids")
        if len(set(questions)) != len(questions):
            raise ValueError("duplicate question ids")

        self.config = config
        self.students = students
        self.questions = questions
        self.user_index = {s: r for r, s in enumerate(students)}
        self.item_index = {q: r for r, q in enumerate(questions)}

        rng = np.random.default_rng(config.seed)
        k = config.k
        p: dict[str, np.ndarray] = {}
        p["user_emb"] = rng.uniform(-0.05, 0.05, (len(students), k))
        p["item_emb"] = rng.uniform(-0.05, 0.05, (len(questions), k))
        fan_in = 2 * k
        for t, width in enumerate(tower_widths(k, config.layers)):
            limit = math.sqrt(6.0 / (fan_in + width))
            p[f"W{t}"] = rng.uniform(-limit, limit, (fan_in, width))
            p[f"b{t}"] = np.zeros(width)
            fan_in = width
        limit = math.sqrt(6.0 / (fan_in + 1))
        p["w_out"] = rng.uniform(-limit, limit, fan_in)
        p["b_out"] = np.zeros(1)
        self.params = p
        self._eg = {n: np.zeros_like(v) for n, v in p.items()}
        self._ed = {n: np.zeros_like(v) for n, v in p.items()}
        # separate stream so inference never touches it
        self._rng = np.random.default_rng([config.seed, 1])

    @property
    def n_layers(self) -> int:
        return self.config.layers

    def layer_shapes(self) -> list[tuple[int, int]]:
        shapes = [self.params[f"W{t}"].shape for t in range(self.n_layers)]
        return shapes + [(self.params["w_out"].shape[0], 1)]

    def optimizer_state(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {n: (self._eg[n], self._ed[n]) for n in self.params}

    # -- indexing -----------------------------------------------------------

    def _rows(self, ids: Iterable[str], index: dict[str, int], kind: str) -> np.ndarray:
        out = []
        for x in ids:
            try:
                out.append(index[x])
            except KeyError:
                raise UnknownEntityError(f"unknown {kind}: {x!r}") from None
        return np.asarray(out, dtype=np.intp)

    def _encode(self, students, questions):
        u = self._rows(students, self.user_index, "student")
        i = self._rows(questions, self.item_index, "question")
        if len(u) != len(i):
            raise ValueError("students and questions must have equal length")
        return u, i

    # -- forward / backward -------------------------------------------------

    def _forward(self, u, i, rng=None):
        cfg = self.config
        p = self.params
        x = np.concatenate([p["user_emb"][u], p["item_emb"][i]], axis=1)
        xs, zs, acts, masks = [x], [], [], []
        for t in range(cfg.layers):
            z = x @ p[f"W{t}"] + p[f"b{t}"]
            a = _activate(cfg.activation, z)
            mask = None
            if rng is not None and cfg.dropout_rate > 0:
                keep = 1.0 - cfg.dropout_rate
                mask = (rng.random(a.shape) < keep) / keep
                x = a * mask
            else:
                x = a
            zs.append(z)
            acts.append(a)
            masks.append(mask)
            xs.append(x)
        y = _sigmoid(x @ p["w_out"] + p["b_out"][0])
        return y, (xs, zs, acts, masks)

    def _backward(self, u, i, y, t, cache):
        """MSE loss and gradients; embedding grads come as (rows, values)."""
        xs, zs, acts, masks = cache
        p = self.params
        err = y - t
        loss = float(np.mean(err * err))
        dz = (2.0 / len(t)) * err * y * (1.0 - y)
        grads: dict[str, object] = {}
        grads["w_out"] = xs[-1].T @ dz
        grads["b_out"] = np.array([dz.sum()])
        dx = np.outer(dz, p["w_out"])
        for layer in reversed(range(self.config.layers)):
            if masks[layer] is not None:
                dx = dx * masks[layer]
            dzh = dx * _activation_grad(self.config.activation, zs[layer], acts[layer])
            grads[f"W{layer}"] = xs[layer].T @ dzh
            grads[f"b{layer}"] = dzh.sum(axis=0)
            dx = dzh @ p[f"W{layer}"].T
        k = self.config.k
        for name, idx, g in (("user_emb", u, dx[:, :k]), ("item_emb", i, dx[:, k:])):
            rows, inv = np.unique(idx, return_inverse=True)
            acc = np.zeros((len(rows), k))
            np.add.at(acc, inv, g)
            grads[name] = (rows, acc)
        return loss, grads

    def predict(self, students: Sequence[StudentId], questions: Sequence[QuestionId]) -> np.ndarray:
        """Inference-mode predictions for aligned student/question sequences."""
        u, i = self._encode(students, questions)
        y, _ = self._forward(u, i)
        return y

    def forward(self, student: StudentId, question: QuestionId, training_mode: bool = False) -> float:
        u, i = self._encode([student], [question])
        y, _ = self._forward(u, i, self._rng if training_mode else None)
        return float(y[0])

    def loss_and_gradients(self, students, questions, targets):
        """Inference-mode MSE and dense gradients for every parameter."""
        u, i = self._encode(students, questions)
        t = np.asarray(targets, dtype=float)
        y, cache = self._forward(u, i)
        loss, grads = self._backward(u, i, y, t, cache)
        dense = {}
        for name, g in grads.items():
            if isinstance(g, tuple):
                rows, vals = g
                full = np.zeros_like(self.params[name])
                full[rows] = vals
                dense[name] = full
            else:
                dense[name] = g
        return loss, dense

    def mse(self, records: Sequence[TrainingRecord]) -> float:
        y = self.predict([r.student for r in records], [r.question for r in records])
        t = np.array([r.target for r in records])
        return float(np.mean((y - t) ** 2))

    # -- training -----------------------------------------------------------

    def _adadelta(self, name: str, g: np.ndarray, rows: np.ndarray | None = None) -> None:
        cfg = self.config
        rho, eps = cfg.rho, cfg.eps
        p, eg, ed = self.params[name], self._eg[name], self._ed[name]
        if rows is None:
            eg *= rho
            eg += (1.0 - rho) * g * g
            delta = -np.sqrt(ed + eps) / np.sqrt(eg + eps) * g
            ed *= rho
            ed += (1.0 - rho) * delta * delta
            p += cfg.learning_rate * delta
        else:
            # sparse: only rows touched by the batch move
            eg_r = rho * eg[rows] + (1.0 - rho) * g * g
            delta = -np.sqrt(ed[rows] + eps) / np.sqrt(eg_r + eps) * g
            eg[rows] = eg_r
            ed[rows] = rho * ed[rows] + (1.0 - rho) * delta * delta
            p[rows] += cfg.learning_rate * delta

    def fit(self, records: Sequence[TrainingRecord], epochs: int | None = None) -> TrainingLog:
        if not records:
            raise ValueError("fit needs at least one training record")
        cfg = self.config
        epochs = cfg.epochs if epochs is None else epochs
        u, i = self._encode([r.student for r in records], [r.question for r in records])
        t = np.array([r.target for r in records], dtype=float)
        n = len(t)
        layer_names = ["embeddings"] + [f"hidden{l}" for l in range(cfg.layers)] + ["output"]
        history = TrainingLog()

        for epoch in range(epochs):
            perm = self._rng.permutation(n)
            sq_sum = 0.0
            norm_sums = dict.fromkeys(layer_names, 0.0)
            n_batches = 0
            for b, start in enumerate(range(0, n, cfg.batch_size)):
                idx = perm[start:start + cfg.batch_size]
                y, cache = self._forward(u[idx], i[idx], self._rng)
                loss, grads = self._backward(u[idx], i[idx], y, t[idx], cache)
                if not math.isfinite(loss):
                    raise TrainingDivergedError(f"non-finite loss {loss} at epoch {epoch}, batch {b}")
                sq_sum += loss * len(idx)
                n_batches += 1

                emb_sq = 0.0
                for name in ("user_emb", "item_emb"):
                    rows, vals = grads.pop(name)
                    emb_sq += float(np.sum(vals * vals))
                    self._adadelta(name, vals, rows)
                norm_sums["embeddings"] += math.sqrt(emb_sq)
                for l in range(cfg.layers):
                    norm_sums[f"hidden{l}"] += float(np.linalg.norm(grads[f"W{l}"]))
                norm_sums["output"] += float(np.linalg.norm(grads["w_out"]))
                for name, g in grads.items():
                    self._adadelta(name, g)

            history.epoch_mse.append(sq_sum / n)
            history.grad_norms.append({k: v / n_batches for k, v in norm_sums.items()})
            log.debug("epoch %d mse %.6f", epoch, history.epoch_mse[-1])
        return history

    # -- ranking ------------------------------------------------------------

    def rank(self, target: StudentId, candidates: Iterable[QuestionId]) -> PartialOrder:
        cands = sorted(set(candidates))
        if not cands:
            raise ValueError("candidates must be non-empty")
        y = self.predict([target] * len(cands), cands)
        return order_from_scores(target, dict(zip(cands, y.tolist())), 0.0)

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        arrays = {
            "students": np.array(self.students, dtype=str),
            "questions": np.array(self.questions, dtype=str),
            "meta": np.array(json.dumps({"format_version": FORMAT_VERSION, "config": asdict(self.config)})),
        }
        for name in self.params:
            arrays[f"param__{name}"] = self.params[name]
            arrays[f"eg__{name}"] = self._eg[name]
            arrays[f"ed__{name}"] = self._ed[name]
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "NcfModel":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format_version") != FORMAT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
            model = cls(
                NcfConfig(**meta["config"]),
                [str(s) for s in data["students"]],
                [str(q) for q in data["questions"]],
            )
            for name in model.params:
                model.params[name] = data[f"param__{name}"].copy()
                model._eg[name] = data[f"eg__{name}"].copy()
                model._ed[name] = data[f"ed__{name}"].copy()
        return model


def records_from_scores(scores: dict[StudentId, dict[QuestionId, float]]) -> list[TrainingRecord]:
    """Flatten per-student difficulty maps into training records, in sorted order."""
    return [
        TrainingRecord(s, q, v)
        for s in sorted(scores)
        for q, v in sorted(scores[s].items())
    ]


def fit_model(records: Sequence[TrainingRecord], config: NcfConfig) -> tuple[NcfModel, TrainingLog]:
    """Build a model indexed on the entities in ``records`` and train it."""
    students = sorted({r.student for r in records})
    questions = sorted({r.question for r in records})
    model = NcfModel(config, students, questions)
    history = model.fit(records)
    return model, history
