"""Write a small session-ready corpus file for workbench integration tests."""

import sys

from ruleloop.corpus import save_corpus
from ruleloop.synthetic import SyntheticSpec, generate


def main() -> int:
    out = sys.argv[1]
    spec = SyntheticSpec(
        num_classes=2,
        num_unlabeled=40,
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
        seed=7,
    )
    corpus, _ = generate(spec)
    for i, inst in enumerate(corpus.instances):
        inst.text = inst.text + f" only{i:04d}"
    save_corpus(corpus, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
