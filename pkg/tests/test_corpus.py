import json

import pytest

from ruleloop.corpus import (
    CorpusError,
    FeatureAtom,
    ingest_sidecar,
    load_corpus,
    load_templates,
    save_corpus,
)

from conftest import write_jsonl


def record(iid, split="unlabeled", label=None, embedding=(0.0, 1.0), features=None, text="hello"):
    rec = {"id": iid, "text": text, "split": split, "embedding": list(embedding)}
    if label is not None:
        rec["gold_label"] = label
    if features is not None:
        rec["features"] = features
    return rec


class TestLoadCorpus:
    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(CorpusError, match="no instances"):
            load_corpus(path, num_classes=2)

    def test_split_counts_sms_shaped(self, tmp_path):
        records = []
        for i in range(40):
            records.append(record(f"l{i}", "labeled", label=1 + i % 2))
        for i in range(4531):
            records.append(record(f"u{i}", "unlabeled"))
        for i in range(500):
            records.append(record(f"t{i}", "test", label=1 + i % 2))
        path = write_jsonl(tmp_path / "sms.jsonl", records)
        corpus = load_corpus(path, num_classes=2)
        assert len(corpus.split_ids("labeled")) == 40
        assert len(corpus.split_ids("unlabeled")) == 4531
        assert len(corpus.split_ids("test")) == 500

    def test_dimension_mismatch_names_id(self, tmp_path):
        records = [
            record("a", embedding=[0.0, 1.0, 2.0, 3.0]),
            record("b", embedding=[0.0, 1.0, 2.0, 3.0]),
            record("bad", embedding=[0.0, 1.0, 2.0]),
        ]
        path = write_jsonl(tmp_path / "dim.jsonl", records)
        with pytest.raises(CorpusError, match="bad"):
            load_corpus(path, num_classes=2)

    def test_duplicate_id_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "dup.jsonl", [record("a"), record("a")])
        with pytest.raises(CorpusError, match="duplicate id"):
            load_corpus(path, num_classes=2)

    def test_gold_label_out_of_range(self, tmp_path):
        path = write_jsonl(tmp_path / "oor.jsonl", [record("a", "labeled", label=3)])
        with pytest.raises(CorpusError, match="out of range"):
            load_corpus(path, num_classes=2)

    def test_labeled_missing_gold_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "nog.jsonl", [record("a", "labeled")])
        with pytest.raises(CorpusError, match="missing gold_label"):
            load_corpus(path, num_classes=2)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(record("a")) + "\n{not json\n")
        with pytest.raises(CorpusError, match=":2"):
            load_corpus(path, num_classes=2)

    def test_splits_partition(self, tmp_path):
        records = [
            record("a", "labeled", label=1),
            record("b", "unlabeled"),
            record("c", "validation", label=2),
            record("d", "test", label=1),
        ]
        corpus = load_corpus(write_jsonl(tmp_path / "p.jsonl", records), num_classes=2)
        all_ids = set()
        for split in ("labeled", "unlabeled", "validation", "test"):
            ids = corpus.split_ids(split)
            assert not (all_ids & set(ids))
            all_ids.update(ids)
        assert all_ids == {"a", "b", "c", "d"}

    def test_unknown_split_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "s.jsonl", [record("a", "train")])
        with pytest.raises(CorpusError, match="unknown split"):
            load_corpus(path, num_classes=2)

    def test_inline_features_parsed(self, tmp_path):
        records = [record("a", features=[{"kind": "NGRAM", "value": "HTTP"}])]
        corpus = load_corpus(write_jsonl(tmp_path / "f.jsonl", records), num_classes=2)
        assert FeatureAtom("NGRAM", "http") in corpus.get("a").features  # case-folded

    def test_pmt_requires_declared_template(self, tmp_path):
        records = [record("a", features=[{"kind": "PMT", "value": "EXPERIENCE=bad"}])]
        path = write_jsonl(tmp_path / "pmt.jsonl", records)
        with pytest.raises(CorpusError, match="undeclared template"):
            load_corpus(path, num_classes=2)
        corpus = load_corpus(path, num_classes=2, template_names=frozenset({"EXPERIENCE"}))
        assert FeatureAtom("PMT", "EXPERIENCE=bad") in corpus.get("a").features


class TestSidecar:
    def _base(self, tmp_path):
        records = [record("a"), record("b")]
        return load_corpus(
            write_jsonl(tmp_path / "c.jsonl", records),
            num_classes=2,
            template_names=frozenset({"EXPERIENCE"}),
        )

    def test_ingest_idempotent(self, tmp_path):
        corpus = self._base(tmp_path)
        side = write_jsonl(
            tmp_path / "s.jsonl",
            [{"id": "a", "features": [{"kind": "PMT", "value": "EXPERIENCE=terrible"}]}],
        )
        assert ingest_sidecar(corpus, side) == 1
        assert ingest_sidecar(corpus, side) == 0

    def test_unknown_id_rejected(self, tmp_path):
        corpus = self._base(tmp_path)
        side = write_jsonl(tmp_path / "s.jsonl", [{"id": "zzz", "features": []}])
        with pytest.raises(CorpusError, match="zzz"):
            ingest_sidecar(corpus, side)

    def test_unknown_kind_rejected(self, tmp_path):
        corpus = self._base(tmp_path)
        side = write_jsonl(
            tmp_path / "s.jsonl", [{"id": "a", "features": [{"kind": "REGEX", "value": "x"}]}]
        )
        with pytest.raises(CorpusError, match="unknown feature kind"):
            ingest_sidecar(corpus, side)

    def test_atom_counts(self, tmp_path):
        records = [record(f"i{n}") for n in range(5)]
        corpus = load_corpus(
            write_jsonl(tmp_path / "c.jsonl", records),
            num_classes=2,
            template_names=frozenset({"T"}),
        )
        side_records = [
            {
                "id": f"i{n}",
                "features": [{"kind": "PMT", "value": f"T=tok{j}"} for j in range(10)],
            }
            for n in range(5)
        ]
        side = write_jsonl(tmp_path / "s.jsonl", side_records)
        assert ingest_sidecar(corpus, side) == 50

    def test_commutative_across_files(self, tmp_path):
        side1 = [{"id": "a", "features": [{"kind": "POS", "value": "NOUN"}]}]
        side2 = [
            {"id": "a", "features": [{"kind": "NER", "value": "ORG"}]},
            {"id": "b", "features": [{"kind": "POS", "value": "VERB"}]},
        ]
        p1 = write_jsonl(tmp_path / "s1.jsonl", side1)
        p2 = write_jsonl(tmp_path / "s2.jsonl", side2)

        c12 = self._base(tmp_path)
        ingest_sidecar(c12, p1)
        ingest_sidecar(c12, p2)
        c21 = self._base(tmp_path)
        ingest_sidecar(c21, p2)
        ingest_sidecar(c21, p1)
        for iid in ("a", "b"):
            assert c12.get(iid).features == c21.get(iid).features


class TestTemplates:
    def test_load_and_validate(self, tmp_path):
        path = write_jsonl(
            tmp_path / "t.jsonl",
            [{"name": "EXPERIENCE", "template": "Overall, the experience is [MASK]. [TEXT]"}],
        )
        assert load_templates(path) == frozenset({"EXPERIENCE"})

    def test_mask_count_enforced(self, tmp_path):
        path = write_jsonl(tmp_path / "t.jsonl", [{"name": "X", "template": "[TEXT] no mask"}])
        with pytest.raises(CorpusError, match="exactly one"):
            load_templates(path)


class TestRoundTrip:
    def test_canonical_round_trip_bit_exact(self, tmp_path):
        records = [
            record("a", "labeled", label=1, embedding=[0.25, -1.5],
                   features=[{"kind": "NGRAM", "value": "go"}]),
            record("b", "unlabeled", embedding=[1 / 3, 2.0]),
        ]
        src = write_jsonl(tmp_path / "src.jsonl", records)
        corpus = load_corpus(src, num_classes=2)
        first = tmp_path / "first.jsonl"
        save_corpus(corpus, first)
        reloaded = load_corpus(first, num_classes=2)
        second = tmp_path / "second.jsonl"
        save_corpus(reloaded, second)
        assert first.read_bytes() == second.read_bytes()
