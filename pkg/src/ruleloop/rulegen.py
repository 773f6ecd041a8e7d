"""Anchored rule mining: level-wise Apriori search over conjunctions of a
freshly labeled instance's feature atoms, plus top-beta selection for
expert querying.

Coverage is anti-monotone in the predicate, so the level-wise search prunes
on the unlabeled-coverage constraint only; the labeled-precision constraint
is applied to the surviving predicates afterwards (precision is not
anti-monotone, and filtering on it level-wise would silently drop valid
conjunctions). Candidates with no labeled coverage have undefined precision;
they pass the filter but rank last when picking rules to query.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

from .corpus import Corpus, FeatureAtom, Instance
from .features import FeatureIndex
from .rules import Rule, compute_stats

logger = logging.getLogger(__name__)

LEVEL_CAP = 5000


@dataclass(frozen=True)
class RuleGenParams:
    min_coverage: int = 100  # minimum unlabeled instances covered
    min_precision: float = 0.75  # minimum labeled precision
    max_predicate_len: int = 3
    beta: int = 1  # max rules queried per instance

    def __post_init__(self):
        if self.min_coverage < 1:
            raise ValueError("min_coverage must be >= 1")
        if not 0.0 <= self.min_precision <= 1.0:
            raise ValueError("min_precision must lie in [0, 1]")
        if self.max_predicate_len < 1:
            raise ValueError("max_predicate_len must be >= 1")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


def rule_id_for(predicate: frozenset[FeatureAtom], label: int) -> str:
    """Stable id derived from the dedup key."""
    canon = "|".join(f"{a.kind}\x1f{a.value}" for a in sorted(predicate)) + f"->{label}"
    return "m" + hashlib.sha1(canon.encode("utf-8")).hexdigest()[:12]


def _gold_hits(ids, corpus: Corpus, label: int) -> int:
    return sum(1 for i in ids if corpus.get(i).gold_label == label)


def extract_candidates(
    anchor: Instance,
    anchor_label: int,
    index: FeatureIndex,
    corpus: Corpus,
    params: RuleGenParams,
    existing: set[tuple] = frozenset(),
) -> list[Rule]:
    """All rules with predicate drawn from the anchor's atoms that meet the
    coverage and precision constraints and predict anchor_label.

    The anchor is covered by construction. Output order: unlabeled coverage
    descending, then lexicographic predicate. Rules whose (predicate, label)
    key appears in `existing` are excluded.
    """
    atoms = sorted(anchor.features)

    # Level 1: single atoms passing the coverage constraint.
    level: list[tuple[tuple[FeatureAtom, ...], frozenset, frozenset]] = []
    for atom in atoms:
        cov_u = index.unlabeled_ids.get(atom, frozenset())
        if len(cov_u) >= params.min_coverage:
            level.append(((atom,), cov_u, index.labeled_ids.get(atom, frozenset())))
    level = _cap_level(level, 1)
    survivors = list(level)

    for size in range(2, params.max_predicate_len + 1):
        next_level = []
        for predicate, cov_u, cov_l in level:
            last = predicate[-1]
            for atom in atoms:
                if atom <= last:
                    continue
                new_u = cov_u & index.unlabeled_ids.get(atom, frozenset())
                if len(new_u) < params.min_coverage:
                    continue
                new_l = cov_l & index.labeled_ids.get(atom, frozenset())
                next_level.append((predicate + (atom,), new_u, new_l))
        level = _cap_level(next_level, size)
        survivors.extend(level)

    candidates: list[tuple[int, tuple, Rule]] = []
    for predicate, cov_u, cov_l in survivors:
        if cov_l:
            precision = _gold_hits(cov_l, corpus, anchor_label) / len(cov_l)
            if precision < params.min_precision:
                continue
        pred_set = frozenset(predicate)
        if (tuple(sorted(pred_set)), anchor_label) in existing:
            continue
        rule = Rule(
            id=rule_id_for(pred_set, anchor_label),
            predicate=pred_set,
            label=anchor_label,
            source="mined",
            status="candidate",
        )
        candidates.append((-len(cov_u), tuple(sorted(pred_set)), rule))

    candidates.sort(key=lambda item: (item[0], item[1]))
    return [rule for _, _, rule in candidates]


def _cap_level(level, size):
    if len(level) > LEVEL_CAP:
        logger.warning(
            "rule search level %d truncated from %d to %d predicates", size, len(level), LEVEL_CAP
        )
        return level[:LEVEL_CAP]
    return level


def select_for_query(
    candidates: list[Rule],
    params: RuleGenParams,
    corpus: Corpus,
    index: FeatureIndex,
) -> list[Rule]:
    """Top-beta candidates by labeled precision.

    Undefined precision (no labeled coverage) sorts below any defined value;
    ties break by higher unlabeled coverage, then lexicographic predicate.
    """
    if params.beta == 0:
        return []
    ranked = []
    for rule in candidates:
        stats = compute_stats(rule, corpus, index)
        has_precision = stats.precision_labeled is not None
        ranked.append(
            (
                0 if has_precision else 1,
                -(stats.precision_labeled if has_precision else 0.0),
                -stats.coverage_unlabeled,
                tuple(sorted(rule.predicate)),
                rule,
            )
        )
    ranked.sort(key=lambda item: item[:4])
    return [rule for *_, rule in ranked[: params.beta]]
