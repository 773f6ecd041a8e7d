"""Labeling rules: conjunction predicates, coverage/precision statistics,
and the sparse rules-by-instances vote matrix.

A rule fires on an instance iff every atom of its predicate is present in
the instance's feature set; the matrix stores one vote per (rule, covered
instance) pair and encodes abstention by absence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, CorpusError, FeatureAtom, Instance
from .features import FeatureIndex

RULE_SOURCES = ("expert", "mined")
RULE_STATUSES = ("candidate", "accepted", "rejected")


@dataclass(frozen=True)
class Rule:
    id: str
    predicate: frozenset[FeatureAtom]
    label: int
    source: str = "mined"
    status: str = "candidate"

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("predicate must be non-empty")
        if self.source not in RULE_SOURCES:
            raise ValueError(f"unknown rule source {self.source!r}")
        if self.status not in RULE_STATUSES:
            raise ValueError(f"unknown rule status {self.status!r}")

    def key(self) -> tuple:
        """Dedup key: two rules with the same (predicate, label) are one rule."""
        return (tuple(sorted(self.predicate)), self.label)

    def with_status(self, status: str) -> "Rule":
        return Rule(self.id, self.predicate, self.label, self.source, status)

    def render(self) -> str:
        atoms = " AND ".join(f"{a.kind}={a.value!r}" for a in sorted(self.predicate))
        return f"{atoms} -> {self.label}"


def evaluate(rule: Rule, instance: Instance) -> int | None:
    """rule.label if the full conjunction matches, else None (abstain)."""
    if rule.predicate <= instance.features:
        return rule.label
    return None


def covered_ids(rule: Rule, index: FeatureIndex, split: str) -> frozenset[str]:
    """Ids in a split covered by the rule, via postings intersection."""
    pool = index.unlabeled_ids if split == "unlabeled" else index.labeled_ids
    covered: frozenset[str] | None = None
    for atom in sorted(rule.predicate):
        ids = pool.get(atom, frozenset())
        covered = ids if covered is None else covered & ids
        if not covered:
            return frozenset()
    assert covered is not None
    return covered


@dataclass
class RuleStats:
    coverage_unlabeled: int
    coverage_unlabeled_fraction: float
    coverage_labeled: int
    precision_labeled: float | None
    precision_unlabeled_oracle: float | None = None


def compute_stats(
    rule: Rule, corpus: Corpus, index: FeatureIndex, with_oracle: bool = False
) -> RuleStats:
    """Coverage and precision of a rule over the labeled/unlabeled splits.

    Precision over an empty covered set is None (absent), never 0 or 1.
    precision_unlabeled_oracle peeks at unlabeled gold labels and is only
    meaningful in simulation.
    """
    unl = covered_ids(rule, index, "unlabeled")
    lab = covered_ids(rule, index, "labeled")
    n_unlabeled = len(corpus.split_ids("unlabeled"))

    precision_labeled = None
    if lab:
        correct = sum(1 for i in lab if corpus.get(i).gold_label == rule.label)
        precision_labeled = correct / len(lab)

    precision_oracle = None
    if with_oracle and unl:
        with_gold = [i for i in unl if corpus.get(i).gold_label is not None]
        if with_gold:
            correct = sum(1 for i in with_gold if corpus.get(i).gold_label == rule.label)
            precision_oracle = correct / len(with_gold)

    return RuleStats(
        coverage_unlabeled=len(unl),
        coverage_unlabeled_fraction=len(unl) / n_unlabeled if n_unlabeled else 0.0,
        coverage_labeled=len(lab),
        precision_labeled=precision_labeled,
        precision_unlabeled_oracle=precision_oracle,
    )


@dataclass
class LabelMatrix:
    """Sparse rule votes over a fixed instance subset.

    votes holds an entry per (rule id, instance id) the rule covers; a
    missing entry is an abstention. Conflicting votes are preserved as-is;
    resolving them is the teacher's job.
    """

    votes: dict[tuple[str, str], int]
    rule_order: list[str]
    instance_order: list[str]

    def votes_on(self, instance_id: str) -> list[tuple[str, int]]:
        return [
            (rid, self.votes[(rid, instance_id)])
            for rid in self.rule_order
            if (rid, instance_id) in self.votes
        ]

    def covered_instances(self) -> list[str]:
        covered = {iid for (_, iid) in self.votes}
        return [iid for iid in self.instance_order if iid in covered]


def build_label_matrix(rules: list[Rule], instances: list[Instance]) -> LabelMatrix:
    """Evaluate every rule on every instance; deterministic ordering."""
    votes: dict[tuple[str, str], int] = {}
    for rule in rules:
        for inst in instances:
            label = evaluate(rule, inst)
            if label is not None:
                votes[(rule.id, inst.id)] = label
    return LabelMatrix(
        votes=votes,
        rule_order=[r.id for r in rules],
        instance_order=[inst.id for inst in instances],
    )


def rule_to_record(rule: Rule) -> dict:
    return {
        "id": rule.id,
        "predicate": [a.to_record() for a in sorted(rule.predicate)],
        "label": rule.label,
        "source": rule.source,
        "status": rule.status,
    }


def dumps_rules(rules: list[Rule]) -> str:
    return "".join(json.dumps(rule_to_record(r), ensure_ascii=False) + "\n" for r in rules)


def save_rules(rules: list[Rule], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_rules(rules))


def load_rules(path: str | Path, num_classes: int, template_names=frozenset()) -> list[Rule]:
    """Read a rule file; only conjunction-of-atoms rules are representable,
    so anything else in the file is a malformed record."""
    rules: list[Rule] = []
    seen_ids: set[str] = set()
    seen_keys: set[tuple] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed record: {exc}") from None
            for key in ("id", "predicate", "label"):
                if key not in record:
                    raise CorpusError(f"{where}: missing field {key!r}")
            rule_id = str(record["id"])
            if rule_id in seen_ids:
                raise CorpusError(f"{where}: duplicate rule id {rule_id!r}")
            seen_ids.add(rule_id)
            label = record["label"]
            if not isinstance(label, int) or not 1 <= label <= num_classes:
                raise CorpusError(f"{where}: label {label!r} out of range 1..{num_classes}")
            atoms = set()
            for obj in record["predicate"]:
                if not isinstance(obj, dict) or "kind" not in obj or "value" not in obj:
                    raise CorpusError(f"{where}: unsupported predicate element {obj!r}")
                atom = FeatureAtom.make(str(obj["kind"]), str(obj["value"]))
                if atom.kind == "PMT" and atom.pmt_template() not in template_names:
                    raise CorpusError(
                        f"{where}: PMT atom names undeclared template {atom.pmt_template()!r}"
                    )
                atoms.add(atom)
            if not atoms:
                raise CorpusError(f"{where}: empty predicate")
            rule = Rule(
                id=rule_id,
                predicate=frozenset(atoms),
                label=label,
                source=record.get("source", "expert"),
                status=record.get("status", "accepted"),
            )
            if rule.key() in seen_keys:
                raise CorpusError(f"{where}: duplicate (predicate, label) at id {rule_id!r}")
            seen_keys.add(rule.key())
            rules.append(rule)
    return rules
