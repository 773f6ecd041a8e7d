"""Evaluation metrics, the precision-vs-coverage importance fit, and
report table emitters.

Convention for macro-F1: a class that occurs in neither the gold labels nor
the predictions is skipped; a class that occurs in one of them but earns no
true positives contributes an F1 of 0 to the unweighted mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PRECISION_FLOOR = 1e-6


def macro_f1(predictions: list[int], gold: list[int], num_classes: int) -> float:
    if len(predictions) != len(gold):
        raise ValueError("predictions and gold lengths differ")
    scores = []
    for k in range(1, num_classes + 1):
        tp = sum(1 for p, g in zip(predictions, gold) if p == k and g == k)
        fp = sum(1 for p, g in zip(predictions, gold) if p == k and g != k)
        fn = sum(1 for p, g in zip(predictions, gold) if p != k and g == k)
        if tp + fp + fn == 0:
            continue
        scores.append(2 * tp / (2 * tp + fp + fn) if tp else 0.0)
    return sum(scores) / len(scores) if scores else 0.0


@dataclass
class PCRecord:
    """One teacher/student measurement: teacher precision and coverage on
    the unlabeled split, and the trained student's test macro-F1."""

    teacher_precision: float
    teacher_coverage: float
    student_f1: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("teacher_precision", "teacher_coverage", "student_f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass
class PCWeights:
    w_precision: float
    w_coverage: float
    fit_error: float

    def __post_init__(self):
        if abs(self.w_precision + self.w_coverage - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")


def fit_pc_weights(records: list[PCRecord], grid_step: float = 0.01) -> PCWeights:
    """Grid-search the exponents of f1_hat = a * precision^wp * coverage^wc.

    The scale a is least-squares fit per grid point; the weights minimizing
    mean squared error win, smallest w_precision on ties. Zero precision or
    coverage values are floored at 1e-6 before exponentiation.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    if not 0.0 < grid_step <= 0.5:
        raise ValueError("grid_step must lie in (0, 0.5]")

    prec = np.maximum([r.teacher_precision for r in records], PRECISION_FLOOR)
    cov = np.maximum([r.teacher_coverage for r in records], PRECISION_FLOOR)
    f1 = np.array([r.student_f1 for r in records])

    steps = int(round(1.0 / grid_step))
    best: PCWeights | None = None
    for i in range(steps + 1):
        wp = min(i * grid_step, 1.0)
        g = prec**wp * cov ** (1.0 - wp)
        denom = float(g @ g)
        a = float(f1 @ g) / denom if denom > 0 else 0.0
        mse = float(np.mean((f1 - a * g) ** 2))
        if best is None or mse < best.fit_error:
            best = PCWeights(w_precision=wp, w_coverage=1.0 - wp, fit_error=mse)
    assert best is not None
    return best


def teacher_pc(teacher_output, corpus) -> tuple[float, float] | None:
    """(precision, coverage) of a teacher over the unlabeled split.

    Needs unlabeled gold labels (simulation/analysis only). Returns None
    when the teacher covers nothing.
    """
    unlabeled = corpus.split_ids("unlabeled")
    covered = [iid for iid in unlabeled if iid in teacher_output.covered]
    if not covered:
        return None
    correct = sum(
        1 for iid in covered if teacher_output.argmax_label(iid) == corpus.get(iid).gold_label
    )
    return correct / len(covered), len(covered) / len(unlabeled)


def sweep_teachers(
    corpus,
    rules,
    fractions: list[float],
    teacher_names: list[str],
    seeds: list[int],
    student_hyper=None,
) -> list[PCRecord]:
    """Teacher-subset sweep: sample each fraction of the rule set, build the
    teacher, train a student, and record (precision, coverage, test F1)."""
    from .rules import build_label_matrix
    from .student import SoftDataset, StudentHyper, predict_labels, train
    from .teacher import train_teacher

    if not rules:
        raise ValueError("rule set is empty")
    if student_hyper is None:
        student_hyper = StudentHyper()

    unlabeled = corpus.split_instances("unlabeled")
    test = corpus.split_instances("test")
    labeled_pairs = [(i.id, i.gold_label) for i in corpus.split_instances("labeled")]
    labeled = SoftDataset.from_gold(labeled_pairs, corpus.num_classes)

    records = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for fraction in fractions:
            n_rules = max(1, round(fraction * len(rules)))
            chosen_idx = sorted(rng.choice(len(rules), size=n_rules, replace=False))
            chosen = [rules[i] for i in chosen_idx]
            for teacher_name in teacher_names:
                matrix = build_label_matrix(chosen, unlabeled)
                output = train_teacher(teacher_name, matrix, corpus.num_classes)
                pc = teacher_pc(output, corpus)
                if pc is None:
                    continue
                weak = SoftDataset.from_teacher(
                    output, corpus.num_classes, exclude={i for i, _ in labeled_pairs}
                )
                hyper = StudentHyper(
                    lam=student_hyper.lam,
                    learning_rate=student_hyper.learning_rate,
                    epochs=student_hyper.epochs,
                    batch_size=student_hyper.batch_size,
                    early_stop_patience=student_hyper.early_stop_patience,
                    seed=seed,
                )
                model = train(corpus, labeled, weak, hyper)
                preds = predict_labels(model, test)
                f1 = macro_f1(preds, [i.gold_label for i in test], corpus.num_classes)
                records.append(
                    PCRecord(
                        teacher_precision=pc[0],
                        teacher_coverage=pc[1],
                        student_f1=f1,
                        metadata={
                            "teacher": teacher_name,
                            "fraction": fraction,
                            "seed": seed,
                            "num_rules": n_rules,
                        },
                    )
                )
    return records


def write_pc_records(records: list[PCRecord], path: str | Path) -> None:
    """Scatter-plot data: one record per row, tab-separated."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("precision\tcoverage\tstudent_f1\tteacher\tfraction\tseed\n")
        for r in records:
            fh.write(
                f"{r.teacher_precision:.6f}\t{r.teacher_coverage:.6f}\t{r.student_f1:.6f}"
                f"\t{r.metadata.get('teacher', '')}\t{r.metadata.get('fraction', '')}"
                f"\t{r.metadata.get('seed', '')}\n"
            )


def read_pc_records(path: str | Path) -> list[PCRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            row = dict(zip(header, parts))
            records.append(
                PCRecord(
                    teacher_precision=float(row["precision"]),
                    teacher_coverage=float(row["coverage"]),
                    student_f1=float(row["student_f1"]),
                    metadata={k: row[k] for k in ("teacher", "fraction", "seed") if k in row},
                )
            )
    return records


def write_weights_table(weights: PCWeights, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("w_precision\tw_coverage\tfit_mse\n")
        fh.write(f"{weights.w_precision:.4f}\t{weights.w_coverage:.4f}\t{weights.fit_error:.8f}\n")
