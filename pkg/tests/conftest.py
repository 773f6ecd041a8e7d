import json

import numpy as np
import pytest

from ruleloop.corpus import Corpus, FeatureAtom, Instance


def make_instance(iid, split="unlabeled", label=None, text="", dim=2, atoms=(), embedding=None):
    if embedding is None:
        embedding = [0.0] * dim
    return Instance(
        id=iid,
        text=text,
        split=split,
        embedding=list(embedding),
        gold_label=label,
        features={FeatureAtom.make(k, v) for k, v in atoms},
    )


def make_corpus(instances, num_classes=2, template_names=frozenset()):
    dim = len(instances[0].embedding)
    return Corpus(
        instances=list(instances),
        num_classes=num_classes,
        class_names=[str(k) for k in range(1, num_classes + 1)],
        embedding_dim=dim,
        template_names=template_names,
    )


def random_featured_corpus(seed, n_instances=100, n_atoms=20, num_classes=2, dim=3,
                           labeled=8, validation=6, test=10):
    """Random corpus with inline NGRAM atoms, for index/rulegen oracles."""
    rng = np.random.default_rng(seed)
    atoms = [f"t{a:02d}" for a in range(n_atoms)]
    instances = []
    for i in range(n_instances):
        if i < labeled:
            split = "labeled"
        elif i < labeled + validation:
            split = "validation"
        elif i < labeled + validation + test:
            split = "test"
        else:
            split = "unlabeled"
        label = int(rng.integers(1, num_classes + 1))
        chosen = rng.random(n_atoms) < rng.uniform(0.05, 0.4)
        feats = tuple(("NGRAM", atoms[a]) for a in range(n_atoms) if chosen[a])
        instances.append(
            make_instance(
                f"i{i:03d}", split=split, label=label, dim=dim,
                embedding=rng.normal(size=dim).tolist(), atoms=feats,
            )
        )
    return make_corpus(instances, num_classes=num_classes)


def session_corpus(seed, num_unlabeled=60, num_classes=2, unique_atoms=False, planted=True):
    """Small corpus with every split populated, gold everywhere (so the
    simulated oracle works), and feature atoms for mining."""
    from ruleloop.features import annotate_ngrams
    from ruleloop.synthetic import SyntheticSpec, generate

    spec = SyntheticSpec(
        num_classes=num_classes,
        num_unlabeled=num_unlabeled,
        labeled_per_class=3,
        validation_per_class=5,
        test_per_class=8,
        embedding_dim=4,
        class_separation=1.5,
        num_planted_atoms=6 if planted else 0,
        coverage_range=(0.15, 0.4),
        precision_range=(0.85, 1.0),
        filler_vocab=400,
        fillers_per_instance=4,
        seed=seed,
    )
    corpus, _ = generate(spec)
    if unique_atoms:
        for i, inst in enumerate(corpus.instances):
            inst.text = inst.text + f" only{i:04d}"
    annotate_ngrams(corpus, 1)
    return corpus


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


def write_session_corpus_file(path, seed=0, num_unlabeled=40):
    """Persist a session-ready corpus (text only; n-grams re-extracted at
    load time) for CLI and server tests."""
    from ruleloop.corpus import save_corpus
    from ruleloop.synthetic import SyntheticSpec, generate

    spec = SyntheticSpec(
        num_classes=2,
        num_unlabeled=num_unlabeled,
        labeled_per_class=3,
        validation_per_class=5,
        test_per_class=8,
        embedding_dim=4,
        class_separation=1.5,
        num_planted_atoms=6,
        coverage_range=(0.15, 0.4),
        precision_range=(0.85, 1.0),
        filler_vocab=400,
        fillers_per_instance=4,
        seed=seed,
    )
    corpus, _ = generate(spec)
    for i, inst in enumerate(corpus.instances):
        inst.text = inst.text + f" only{i:04d}"
    save_corpus(corpus, path)
    return path


@pytest.fixture
def tmp_jsonl(tmp_path):
    def _write(name, records):
        return write_jsonl(tmp_path / name, records)

    return _write
