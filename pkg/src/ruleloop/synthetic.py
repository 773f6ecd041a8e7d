"""Synthetic corpora with planted predictive tokens.

Each planted atom is a single token assigned to one class with a chosen
coverage (fraction of the unlabeled split containing it) and precision
(fraction of those occurrences that fall on instances of its class).
Instance text is the space-joined token bag, so unigram extraction recovers
the planted atoms exactly. Embeddings are class-conditional Gaussians.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, Instance


@dataclass
class PlantedAtomSpec:
    token: str
    label: int
    coverage: float
    precision: float


@dataclass
class SyntheticSpec:
    num_classes: int = 2
    num_unlabeled: int = 2000
    labeled_per_class: int = 4
    validation_per_class: int = 10
    test_per_class: int = 100
    embedding_dim: int = 16
    class_separation: float = 1.2
    num_planted_atoms: int = 30
    coverage_range: tuple[float, float] = (0.04, 0.15)
    precision_range: tuple[float, float] = (0.82, 0.98)
    filler_vocab: int = 3000
    fillers_per_instance: int = 10
    seed: int = 0
    planted: list[PlantedAtomSpec] = field(default_factory=list)


def generate(spec: SyntheticSpec) -> tuple[Corpus, list[PlantedAtomSpec]]:
    rng = np.random.default_rng(spec.seed)
    K = spec.num_classes

    means = rng.normal(size=(K, spec.embedding_dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    means *= spec.class_separation

    counts = {
        "labeled": spec.labeled_per_class * K,
        "validation": spec.validation_per_class * K,
        "test": spec.test_per_class * K,
        "unlabeled": spec.num_unlabeled,
    }
    instances: list[Instance] = []
    serial = 0
    for split, n in counts.items():
        for _ in range(n):
            label = int(rng.integers(1, K + 1)) if split == "unlabeled" else serial % K + 1
            emb = means[label - 1] + rng.normal(size=spec.embedding_dim)
            fillers = rng.integers(0, spec.filler_vocab, size=spec.fillers_per_instance)
            tokens = [f"w{v:04d}" for v in fillers]
            instances.append(
                Instance(
                    id=f"i{serial:05d}",
                    text=" ".join(tokens),
                    split=split,
                    embedding=[float(x) for x in emb],
                    gold_label=label,
                )
            )
            serial += 1

    planted = list(spec.planted)
    if not planted:
        for a in range(spec.num_planted_atoms):
            planted.append(
                PlantedAtomSpec(
                    token=f"atom{a:03d}",
                    label=int(rng.integers(1, K + 1)),
                    coverage=float(rng.uniform(*spec.coverage_range)),
                    precision=float(rng.uniform(*spec.precision_range)),
                )
            )

    unlabeled = [inst for inst in instances if inst.split == "unlabeled"]
    by_class: dict[int, list[Instance]] = {k: [] for k in range(1, K + 1)}
    for inst in unlabeled:
        by_class[inst.gold_label].append(inst)

    for atom in planted:
        n_cov = max(1, round(atom.coverage * len(unlabeled)))
        n_hit = min(round(atom.precision * n_cov), len(by_class[atom.label]))
        hits = rng.choice(len(by_class[atom.label]), size=n_hit, replace=False)
        chosen = [by_class[atom.label][i] for i in hits]
        others = [inst for inst in unlabeled if inst.gold_label != atom.label]
        n_miss = min(n_cov - n_hit, len(others))
        if n_miss > 0:
            misses = rng.choice(len(others), size=n_miss, replace=False)
            chosen.extend(others[i] for i in misses)
        for inst in chosen:
            inst.text = inst.text + " " + atom.token

    # Planted tokens also appear on labeled/test instances of their class so
    # mined rules have labeled support and the splits look alike.
    non_unlabeled = [inst for inst in instances if inst.split != "unlabeled"]
    for atom in planted:
        for inst in non_unlabeled:
            if inst.gold_label == atom.label and rng.random() < atom.coverage * K * atom.precision:
                inst.text = inst.text + " " + atom.token
            elif inst.gold_label != atom.label and rng.random() < atom.coverage * K * (
                1 - atom.precision
            ):
                inst.text = inst.text + " " + atom.token

    corpus = Corpus(
        instances=instances,
        num_classes=K,
        class_names=[str(k) for k in range(1, K + 1)],
        embedding_dim=spec.embedding_dim,
    )
    return corpus, planted
