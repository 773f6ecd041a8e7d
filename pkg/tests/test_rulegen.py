from itertools import combinations

import numpy as np
import pytest

from ruleloop.corpus import FeatureAtom
from ruleloop.features import build_index
from ruleloop.rulegen import RuleGenParams, extract_candidates, rule_id_for, select_for_query
from ruleloop.rules import Rule, compute_stats, evaluate

from conftest import make_corpus, make_instance, random_featured_corpus


def brute_force_candidates(anchor, anchor_label, corpus, params, existing=frozenset()):
    """Exhaustive enumeration over all predicate subsets of the anchor's
    features up to the length cap, filtered by the coverage and precision
    constraints via per-instance evaluation."""
    unlabeled = corpus.split_instances("unlabeled")
    labeled = corpus.split_instances("labeled")
    out = []
    atoms = sorted(anchor.features)
    for size in range(1, params.max_predicate_len + 1):
        for combo in combinations(atoms, size):
            rule = Rule(id="bf", predicate=frozenset(combo), label=anchor_label)
            covered_u = [i for i in unlabeled if evaluate(rule, i) is not None]
            if len(covered_u) < params.min_coverage:
                continue
            covered_l = [i for i in labeled if evaluate(rule, i) is not None]
            if covered_l:
                precision = sum(
                    1 for i in covered_l if i.gold_label == anchor_label
                ) / len(covered_l)
                if precision < params.min_precision:
                    continue
            if (tuple(sorted(combo)), anchor_label) in existing:
                continue
            out.append((-len(covered_u), tuple(sorted(combo))))
    out.sort()
    return [pred for _, pred in out]


def predicates(rules):
    return [tuple(sorted(r.predicate)) for r in rules]


def anchor_of(corpus):
    for inst in corpus.split_instances("unlabeled"):
        if inst.features:
            return inst
    raise AssertionError("no featured unlabeled instance")


class TestExtractCandidates:
    def test_no_atom_meets_coverage(self):
        instances = [make_instance(f"u{i}", atoms=[("NGRAM", f"x{i}")]) for i in range(5)]
        corpus = make_corpus(instances)
        index = build_index(corpus)
        params = RuleGenParams(min_coverage=3, min_precision=0.0, max_predicate_len=2, beta=1)
        assert extract_candidates(instances[0], 1, index, corpus, params) == []

    def test_planted_atom_recovered(self):
        rng = np.random.default_rng(5)
        instances = []
        for i in range(1000):
            label = int(rng.integers(1, 3))
            atoms = [("NGRAM", f"noise{rng.integers(500)}")]
            if i < 150:
                label = 2
                atoms.append(("NGRAM", "plant"))
            instances.append(make_instance(f"u{i}", label=label, atoms=atoms))
        corpus = make_corpus(instances)
        index = build_index(corpus)
        params = RuleGenParams(min_coverage=100, min_precision=0.75, max_predicate_len=2, beta=1)
        anchor = instances[0]
        found = extract_candidates(anchor, 2, index, corpus, params)
        plant = frozenset({FeatureAtom("NGRAM", "plant")})
        assert plant in {r.predicate for r in found}
        stats = compute_stats(next(r for r in found if r.predicate == plant), corpus, index)
        assert stats.coverage_unlabeled >= 100

    @pytest.mark.parametrize("seed", range(10))
    def test_equals_brute_force(self, seed):
        corpus = random_featured_corpus(seed, n_instances=200, n_atoms=25)
        index = build_index(corpus)
        rng = np.random.default_rng(seed)
        params = RuleGenParams(
            min_coverage=int(rng.integers(5, 40)),
            min_precision=float(rng.choice([0.0, 0.4, 0.75, 1.0])),
            max_predicate_len=int(rng.integers(1, 4)),
            beta=3,
        )
        anchor = anchor_of(corpus)
        label = int(rng.integers(1, 3))
        got = extract_candidates(anchor, label, index, corpus, params)
        expected = brute_force_candidates(anchor, label, corpus, params)
        assert predicates(got) == expected

    @pytest.mark.parametrize("seed", range(5))
    def test_every_rule_covers_anchor_with_its_label(self, seed):
        corpus = random_featured_corpus(seed + 50, n_instances=150)
        index = build_index(corpus)
        params = RuleGenParams(min_coverage=5, min_precision=0.0, max_predicate_len=2, beta=2)
        anchor = anchor_of(corpus)
        for rule in extract_candidates(anchor, 2, index, corpus, params):
            assert evaluate(rule, anchor) == 2
            assert rule.label == 2

    @pytest.mark.parametrize("seed", range(5))
    def test_tightening_constraints_never_adds_rules(self, seed):
        corpus = random_featured_corpus(seed + 80, n_instances=150)
        index = build_index(corpus)
        anchor = anchor_of(corpus)
        loose = RuleGenParams(min_coverage=5, min_precision=0.2, max_predicate_len=2, beta=2)
        for tight in (
            RuleGenParams(min_coverage=15, min_precision=0.2, max_predicate_len=2, beta=2),
            RuleGenParams(min_coverage=5, min_precision=0.8, max_predicate_len=2, beta=2),
        ):
            loose_preds = set(predicates(extract_candidates(anchor, 1, index, corpus, loose)))
            tight_preds = set(predicates(extract_candidates(anchor, 1, index, corpus, tight)))
            assert tight_preds <= loose_preds

    def test_existing_rules_excluded(self):
        corpus = random_featured_corpus(4, n_instances=150)
        index = build_index(corpus)
        params = RuleGenParams(min_coverage=5, min_precision=0.0, max_predicate_len=1, beta=2)
        anchor = anchor_of(corpus)
        first = extract_candidates(anchor, 1, index, corpus, params)
        assert first
        existing = {first[0].key()}
        rest = extract_candidates(anchor, 1, index, corpus, params, existing)
        assert first[0].predicate not in {r.predicate for r in rest}
        assert len(rest) == len(first) - 1

    def test_ordering_coverage_then_lexicographic(self):
        corpus = random_featured_corpus(11, n_instances=150)
        index = build_index(corpus)
        params = RuleGenParams(min_coverage=2, min_precision=0.0, max_predicate_len=2, beta=2)
        anchor = anchor_of(corpus)
        rules = extract_candidates(anchor, 1, index, corpus, params)
        keys = [
            (-compute_stats(r, corpus, index).coverage_unlabeled, tuple(sorted(r.predicate)))
            for r in rules
        ]
        assert keys == sorted(keys)

    def test_rule_ids_stable(self):
        pred = frozenset({FeatureAtom("NGRAM", "http")})
        assert rule_id_for(pred, 2) == rule_id_for(pred, 2)
        assert rule_id_for(pred, 2) != rule_id_for(pred, 1)


class TestSelectForQuery:
    def _setup(self):
        # Three candidate atoms with controlled labeled precision.
        instances = []
        # Atom a: labeled precision 0.8 (4/5); b: 0.9 (9/10); c: 0.75 (3/4).
        specs = {"a": (4, 1), "b": (9, 1), "c": (3, 1)}
        n = 0
        for token, (hit, miss) in specs.items():
            for _ in range(hit):
                instances.append(
                    make_instance(f"l{n}", "labeled", 1, atoms=[("NGRAM", token)])
                )
                n += 1
            for _ in range(miss):
                instances.append(
                    make_instance(f"l{n}", "labeled", 2, atoms=[("NGRAM", token)])
                )
                n += 1
        for i in range(30):
            toks = [("NGRAM", t) for t in "abc"]
            instances.append(make_instance(f"u{i}", "unlabeled", 1, atoms=toks))
        corpus = make_corpus(instances)
        index = build_index(corpus)
        rules = [
            Rule(id=t, predicate=frozenset({FeatureAtom("NGRAM", t)}), label=1)
            for t in "abc"
        ]
        return corpus, index, rules

    def test_beta_one_picks_highest_precision(self):
        corpus, index, rules = self._setup()
        params = RuleGenParams(min_coverage=1, min_precision=0.0, max_predicate_len=1, beta=1)
        chosen = select_for_query(rules, params, corpus, index)
        assert [r.id for r in chosen] == ["b"]

    def test_beta_larger_than_pool_returns_all(self):
        corpus, index, rules = self._setup()
        params = RuleGenParams(min_coverage=1, min_precision=0.0, max_predicate_len=1, beta=5)
        assert len(select_for_query(rules, params, corpus, index)) == 3

    def test_beta_zero_returns_nothing(self):
        corpus, index, rules = self._setup()
        params = RuleGenParams(min_coverage=1, min_precision=0.0, max_predicate_len=1, beta=0)
        assert select_for_query(rules, params, corpus, index) == []

    def test_precision_tie_broken_by_coverage(self):
        instances = [
            make_instance("l0", "labeled", 1, atoms=[("NGRAM", "hi"), ("NGRAM", "lo")]),
        ]
        for i in range(300):
            atoms = [("NGRAM", "hi")] if i < 300 else []
            if i < 120:
                atoms = [("NGRAM", "lo"), ("NGRAM", "hi")]
            instances.append(make_instance(f"u{i}", "unlabeled", 1, atoms=atoms))
        corpus = make_corpus(instances)
        index = build_index(corpus)
        hi = Rule(id="hi", predicate=frozenset({FeatureAtom("NGRAM", "hi")}), label=1)
        lo = Rule(id="lo", predicate=frozenset({FeatureAtom("NGRAM", "lo")}), label=1)
        params = RuleGenParams(min_coverage=1, min_precision=0.0, max_predicate_len=1, beta=1)
        chosen = select_for_query([lo, hi], params, corpus, index)
        assert chosen[0].id == "hi"  # coverage 300 beats 120 at equal precision 1.0

    def test_undefined_precision_ranks_last(self):
        instances = [
            make_instance("l0", "labeled", 1, atoms=[("NGRAM", "seen")]),
            make_instance("u0", "unlabeled", 1, atoms=[("NGRAM", "seen"), ("NGRAM", "unseen")]),
            make_instance("u1", "unlabeled", 1, atoms=[("NGRAM", "unseen")]),
        ]
        corpus = make_corpus(instances)
        index = build_index(corpus)
        seen = Rule(id="seen", predicate=frozenset({FeatureAtom("NGRAM", "seen")}), label=1)
        unseen = Rule(id="unseen", predicate=frozenset({FeatureAtom("NGRAM", "unseen")}), label=1)
        params = RuleGenParams(min_coverage=1, min_precision=0.0, max_predicate_len=1, beta=2)
        chosen = select_for_query([unseen, seen], params, corpus, index)
        assert [r.id for r in chosen] == ["seen", "unseen"]


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            RuleGenParams(min_coverage=0)
        with pytest.raises(ValueError):
            RuleGenParams(min_precision=1.5)
        with pytest.raises(ValueError):
            RuleGenParams(max_predicate_len=0)
        with pytest.raises(ValueError):
            RuleGenParams(beta=-1)
