"""N-gram extraction and the atom -> instances inverted index.

The tokenizer is deliberately simple and fully deterministic: text is
case-folded, split on whitespace, punctuation characters become separate
tokens, and the contraction "n't" is kept as a single token split from its
stem ("won't" -> "wo", "n't"). N-grams run over the whole token stream;
sentence boundaries are not detected.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, FeatureAtom

_TOKEN_RE = re.compile(r"n't|\w+(?=n't)|\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.casefold())


def extract_ngrams(text: str, n_max: int) -> set[FeatureAtom]:
    """NGRAM atoms for all contiguous token sequences of length 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    tokens = tokenize(text)
    atoms = set()
    for n in range(1, n_max + 1):
        for i in range(len(tokens) - n + 1):
            atoms.add(FeatureAtom.make("NGRAM", " ".join(tokens[i : i + n])))
    return atoms


def annotate_ngrams(corpus: Corpus, n_max: int) -> int:
    """Populate every instance's feature set with its n-gram atoms.

    Part of the single-writer ingestion phase. Returns atoms added.
    """
    added = 0
    for inst in corpus.instances:
        atoms = extract_ngrams(inst.text, n_max)
        added += len(atoms - inst.features)
        inst.features |= atoms
    return added


@dataclass
class FeatureIndex:
    """Inverted index over instance feature sets.

    postings maps each atom to the sorted ids of instances containing it;
    per-split coverage counts for the unlabeled and labeled splits are
    precomputed because rule mining consults them constantly.
    """

    postings: dict[FeatureAtom, tuple[str, ...]]
    unlabeled_ids: dict[FeatureAtom, frozenset[str]]
    labeled_ids: dict[FeatureAtom, frozenset[str]]
    frequency: dict[FeatureAtom, int] = field(default_factory=dict)

    @property
    def vocabulary(self) -> set[FeatureAtom]:
        return set(self.postings)

    def coverage_unlabeled(self, atom: FeatureAtom) -> int:
        return len(self.unlabeled_ids.get(atom, ()))

    def coverage_labeled(self, atom: FeatureAtom) -> int:
        return len(self.labeled_ids.get(atom, ()))


def build_index(corpus: Corpus) -> FeatureIndex:
    """Build the inverted index from per-instance feature sets."""
    by_atom: dict[FeatureAtom, list[str]] = {}
    for inst in corpus.instances:
        for atom in inst.features:
            by_atom.setdefault(atom, []).append(inst.id)

    unlabeled = set(corpus.split_ids("unlabeled"))
    labeled = set(corpus.split_ids("labeled"))

    postings = {}
    unlabeled_ids = {}
    labeled_ids = {}
    frequency = {}
    for atom, ids in by_atom.items():
        postings[atom] = tuple(sorted(ids))
        id_set = set(ids)
        unlabeled_ids[atom] = frozenset(id_set & unlabeled)
        labeled_ids[atom] = frozenset(id_set & labeled)
        frequency[atom] = len(ids)
    return FeatureIndex(postings, unlabeled_ids, labeled_ids, frequency)


def dump_vocabulary(index: FeatureIndex, path: str | Path) -> None:
    """Diagnostic dump: one record per atom with its corpus frequency."""
    atoms = sorted(index.postings)
    with open(path, "w", encoding="utf-8") as fh:
        for atom in atoms:
            record = {
                "kind": atom.kind,
                "value": atom.value,
                "frequency": index.frequency[atom],
                "coverage_unlabeled": index.coverage_unlabeled(atom),
                "coverage_labeled": index.coverage_labeled(atom),
            }
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")
