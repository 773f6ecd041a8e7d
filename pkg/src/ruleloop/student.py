"""The deployed classifier: multinomial logistic regression over instance
embeddings, trained on gold labels plus teacher soft labels.

The objective is mean cross-entropy over the labeled set plus lambda times
mean cross-entropy against the teacher's soft distributions on covered
unlabeled instances. Weak targets stay soft; they are never collapsed to an
argmax.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import macro_f1
from .corpus import Corpus, Instance


@dataclass
class SoftDataset:
    """Instance ids paired with target distributions over the K classes."""

    ids: list[str]
    targets: np.ndarray  # shape (n, K)
    source: str  # one of: gold, teacher, student

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float)
        if len(self.ids) != len(self.targets):
            raise ValueError("ids and targets length mismatch")

    def __len__(self) -> int:
        return len(self.ids)

    @staticmethod
    def empty(num_classes: int, source: str = "teacher") -> "SoftDataset":
        return SoftDataset([], np.zeros((0, num_classes)), source)

    @staticmethod
    def from_gold(pairs: list[tuple[str, int]], num_classes: int) -> "SoftDataset":
        """One-hot targets from (instance id, class) pairs."""
        targets = np.zeros((len(pairs), num_classes))
        ids = []
        for row, (iid, label) in enumerate(pairs):
            ids.append(iid)
            targets[row, label - 1] = 1.0
        return SoftDataset(ids, targets, "gold")

    @staticmethod
    def from_teacher(
        teacher_output, num_classes: int, exclude: set[str] = frozenset()
    ) -> "SoftDataset":
        ids = [iid for iid in sorted(teacher_output.covered) if iid not in exclude]
        if not ids:
            return SoftDataset([], np.zeros((0, num_classes)), "teacher")
        targets = np.stack([teacher_output.soft_labels[iid] for iid in ids])
        return SoftDataset(ids, targets, "teacher")


@dataclass
class StudentHyper:
    lam: float = 1.0
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 32
    early_stop_patience: int | None = 10
    seed: int = 0


@dataclass
class StudentModel:
    weights: np.ndarray  # (K, d)
    bias: np.ndarray  # (K,)
    lam: float = 1.0
    training_meta: dict = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "StudentModel":
        return StudentModel(
            self.weights.copy(), self.bias.copy(), self.lam, dict(self.training_meta)
        )


def init_model(num_classes: int, dim: int, lam: float = 1.0) -> StudentModel:
    return StudentModel(np.zeros((num_classes, dim)), np.zeros(num_classes), lam)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def _embeddings(corpus: Corpus, ids: list[str]) -> np.ndarray:
    if not ids:
        return np.zeros((0, corpus.embedding_dim))
    return np.array([corpus.get(iid).embedding for iid in ids])


def loss_and_gradient(
    model: StudentModel,
    corpus: Corpus,
    labeled: SoftDataset,
    weak: SoftDataset,
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Exact loss and gradient of the joint objective.

    loss = mean CE over labeled + lam * mean CE over weak; the second term
    vanishes when the weak set is empty.
    """
    grad_w = np.zeros_like(model.weights)
    grad_b = np.zeros_like(model.bias)
    loss = 0.0
    for dataset, scale in ((labeled, 1.0), (weak, model.lam)):
        if len(dataset) == 0 or scale == 0.0:
            continue
        X = _embeddings(corpus, dataset.ids)
        P = dataset.targets
        logits = X @ model.weights.T + model.bias
        log_q = _log_softmax(logits)
        loss += scale * float(-(P * log_q).sum() / len(dataset))
        delta = (_softmax(logits) - P) * (scale / len(dataset))
        grad_w += delta.T @ X
        grad_b += delta.sum(axis=0)
    return loss, (grad_w, grad_b)


def predict_proba(model: StudentModel, instances: list[Instance]) -> SoftDataset:
    """Softmax of the affine map, per instance."""
    ids = [inst.id for inst in instances]
    if not instances:
        return SoftDataset([], np.zeros((0, model.num_classes)), "student")
    X = np.array([inst.embedding for inst in instances])
    if X.shape[1] != model.dim:
        raise ValueError(f"embedding dim {X.shape[1]} != model dim {model.dim}")
    return SoftDataset(ids, _softmax(X @ model.weights.T + model.bias), "student")


def predict_labels(model: StudentModel, instances: list[Instance]) -> list[int]:
    """1-based argmax classes (ties toward the smaller index)."""
    probs = predict_proba(model, instances)
    return [int(np.argmax(row)) + 1 for row in probs.targets]


def _validation_f1(model: StudentModel, corpus: Corpus) -> float:
    val = corpus.split_instances("validation")
    preds = predict_labels(model, val)
    gold = [inst.gold_label for inst in val]
    return macro_f1(preds, gold, model.num_classes)


def train(
    corpus: Corpus,
    labeled: SoftDataset,
    weak: SoftDataset,
    hyper: StudentHyper,
) -> StudentModel:
    """Mini-batch gradient descent on the joint objective.

    Early stopping tracks validation macro-F1 (initial snapshot included,
    so the returned model is never worse than the untrained one there).
    With lam == 0 the weak set is dropped entirely, so training is
    identical to passing an empty weak set.
    """
    if len(labeled) == 0:
        raise ValueError("cannot train with an empty labeled set")
    K = labeled.targets.shape[1]
    if hyper.lam == 0.0:
        weak = SoftDataset.empty(K, "teacher")

    early_stop = hyper.early_stop_patience is not None and hyper.early_stop_patience > 0
    if early_stop and not corpus.split_instances("validation"):
        raise ValueError("early stopping requires a non-empty validation split")

    X = np.vstack([_embeddings(corpus, labeled.ids), _embeddings(corpus, weak.ids)])
    P = np.vstack([labeled.targets, weak.targets])
    n_total = len(X)
    example_weight = np.concatenate(
        [
            np.full(len(labeled), 1.0 / len(labeled)),
            np.full(len(weak), hyper.lam / len(weak) if len(weak) else 0.0),
        ]
    )

    model = init_model(K, corpus.embedding_dim, hyper.lam)
    rng = np.random.default_rng(hyper.seed)

    best = model.copy()
    best_f1 = _validation_f1(model, corpus) if early_stop else -1.0
    best_epoch = 0
    since_improvement = 0
    epochs_run = 0

    for epoch in range(1, hyper.epochs + 1):
        epochs_run = epoch
        order = rng.permutation(n_total)
        for start in range(0, n_total, hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            logits = X[batch] @ model.weights.T + model.bias
            delta = (_softmax(logits) - P[batch]) * example_weight[batch, None]
            scale = n_total / len(batch)
            model.weights -= hyper.learning_rate * scale * (delta.T @ X[batch])
            model.bias -= hyper.learning_rate * scale * delta.sum(axis=0)

        if early_stop:
            val_f1 = _validation_f1(model, corpus)
            if val_f1 > best_f1:
                best_f1 = val_f1
                best = model.copy()
                best_epoch = epoch
                since_improvement = 0
            else:
                since_improvement += 1
                if since_improvement >= hyper.early_stop_patience:
                    break

    final = best if early_stop else model
    final.lam = hyper.lam
    train_loss, _ = loss_and_gradient(final, corpus, labeled, weak)
    val = corpus.split_instances("validation")
    val_loss = None
    if val:
        val_gold = SoftDataset.from_gold([(i.id, i.gold_label) for i in val], K)
        val_loss, _ = loss_and_gradient(final, corpus, val_gold, SoftDataset.empty(K))
    final.training_meta = {
        "epochs_run": epochs_run,
        "best_epoch": best_epoch if early_stop else epochs_run,
        "final_train_loss": train_loss,
        "final_validation_loss": val_loss,
        "final_validation_f1": best_f1 if early_stop else None,
        "seed": hyper.seed,
    }
    return final


def save_model(model: StudentModel, path: str | Path) -> None:
    """Flat JSON record of dims, weights, bias, lambda, seed; round-trip exact."""
    record = {
        "num_classes": model.num_classes,
        "dim": model.dim,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "lambda": model.lam,
        "training_meta": model.training_meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh)
        fh.write("\n")


def load_model(path: str | Path) -> StudentModel:
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    weights = np.array(record["weights"], dtype=float)
    bias = np.array(record["bias"], dtype=float)
    if weights.shape != (record["num_classes"], record["dim"]):
        raise ValueError("model record dims inconsistent with weights shape")
    if bias.shape != (record["num_classes"],):
        raise ValueError("model record dims inconsistent with bias shape")
    return StudentModel(weights, bias, float(record["lambda"]), record.get("training_meta", {}))
