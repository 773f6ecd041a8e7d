import json

import pytest

from pmt_extractor.backends import HashBackend, make_backend
from pmt_extractor.extract import extract, read_corpus_texts
from pmt_extractor.templates import TemplateError, TemplateSpec, load_templates


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


def corpus_records(n):
    return [
        {
            "id": f"i{k}",
            "text": f"sample text number {k}",
            "split": "unlabeled",
            "gold_label": 1 + k % 2,
            "embedding": [0.0, float(k)],
        }
        for k in range(n)
    ]


TEMPLATES = [
    {"name": "EXPERIENCE", "template": "Overall, the experience is [MASK]. [TEXT]"},
    {"name": "RECOMMEND", "template": "[TEXT]. Would I recommend it? The answer is [MASK]."},
    {"name": "IS_ABOUT", "template": "The following message is about [MASK]: [TEXT]."},
    {"name": "ASKS_FOR", "template": "The following message asks for [MASK]: [TEXT]."},
    {"name": "TONE", "template": "The tone of [TEXT] is [MASK]."},
]


class TestTemplates:
    def test_load(self, tmp_path):
        path = write_jsonl(tmp_path / "t.jsonl", TEMPLATES)
        specs = load_templates(path)
        assert [s.name for s in specs] == [t["name"] for t in TEMPLATES]

    def test_mask_required(self, tmp_path):
        path = write_jsonl(tmp_path / "t.jsonl", [{"name": "X", "template": "[TEXT] nothing"}])
        with pytest.raises(TemplateError, match="exactly one"):
            load_templates(path)

    def test_double_mask_rejected(self):
        with pytest.raises(TemplateError):
            TemplateSpec("X", "[MASK] and [MASK] in [TEXT]")

    def test_text_slot_required(self):
        with pytest.raises(TemplateError, match="TEXT"):
            TemplateSpec("X", "no text slot [MASK]")

    def test_render(self):
        spec = TemplateSpec("X", "a [TEXT] b [MASK]")
        assert spec.render("hi", "<mask>") == "a hi b <mask>"


class TestHashBackend:
    def test_distinct_and_deterministic(self):
        backend = HashBackend()
        template = TemplateSpec("X", "[TEXT] is [MASK]")
        first = backend.top_k(template, "some text", 10)
        second = backend.top_k(template, "some text", 10)
        assert first == second
        assert len(set(first)) == 10

    def test_varies_with_inputs(self):
        backend = HashBackend()
        t1 = TemplateSpec("A", "[TEXT] a [MASK]")
        t2 = TemplateSpec("B", "[TEXT] b [MASK]")
        assert backend.top_k(t1, "x", 5) != backend.top_k(t2, "x", 5)

    def test_make_backend_dispatch(self):
        assert isinstance(make_backend("hash"), HashBackend)


class TestExtract:
    def test_record_and_atom_counts(self, tmp_path):
        corpus = write_jsonl(tmp_path / "c.jsonl", corpus_records(3))
        templates = [TemplateSpec("ONLY", "[TEXT] feels [MASK]")]
        out = tmp_path / "side.jsonl"
        total = extract(corpus, templates, HashBackend(), 1, out)
        assert total == 3
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 3
        assert all(len(rec["features"]) == 1 for rec in lines)

    def test_k10_five_templates_fifty_atoms_per_instance(self, tmp_path):
        corpus = write_jsonl(tmp_path / "c.jsonl", corpus_records(4))
        templates = [TemplateSpec(t["name"], t["template"]) for t in TEMPLATES]
        out = tmp_path / "side.jsonl"
        total = extract(corpus, templates, HashBackend(), 10, out)
        assert total == 4 * 5 * 10
        for rec in (json.loads(l) for l in out.read_text().splitlines()):
            assert len(rec["features"]) == 50

    def test_deterministic_output_bytes(self, tmp_path):
        corpus = write_jsonl(tmp_path / "c.jsonl", corpus_records(5))
        templates = [TemplateSpec(t["name"], t["template"]) for t in TEMPLATES[:2]]
        out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        extract(corpus, templates, HashBackend(), 3, out_a)
        extract(corpus, templates, HashBackend(), 3, out_b)
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_no_partial_file_on_error(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text('{"id": "a"}\n')  # missing text field
        out = tmp_path / "side.jsonl"
        with pytest.raises(ValueError):
            extract(corpus, [TemplateSpec("X", "[TEXT] [MASK]")], HashBackend(), 1, out)
        assert not out.exists()

    def test_read_corpus_rejects_duplicates(self, tmp_path):
        records = corpus_records(2)
        records[1]["id"] = records[0]["id"]
        corpus = write_jsonl(tmp_path / "c.jsonl", records)
        with pytest.raises(ValueError, match="duplicate"):
            read_corpus_texts(corpus)


class TestRoundTripWithEngine:
    def test_sidecar_ingests_cleanly(self, tmp_path):
        # The engine validates everything the extractor emits; atom count
        # equals instances x templates x k.
        ruleloop = pytest.importorskip("ruleloop")
        from ruleloop.corpus import ingest_sidecar, load_corpus

        n_instances, k = 6, 10
        corpus_path = write_jsonl(tmp_path / "c.jsonl", corpus_records(n_instances))
        template_path = write_jsonl(tmp_path / "t.jsonl", TEMPLATES)

        templates = load_templates(template_path)
        out = tmp_path / "side.jsonl"
        total = extract(corpus_path, templates, HashBackend(), k, out)
        assert total == n_instances * len(TEMPLATES) * k

        engine_templates = ruleloop.load_templates(template_path)
        corpus = load_corpus(corpus_path, num_classes=2, template_names=engine_templates)
        added = ingest_sidecar(corpus, out)
        assert added == n_instances * len(TEMPLATES) * k
        assert ingest_sidecar(corpus, out) == 0  # idempotent


class TestCli:
    def test_end_to_end(self, tmp_path, capsys):
        from pmt_extractor.cli import main

        corpus = write_jsonl(tmp_path / "c.jsonl", corpus_records(3))
        templates = write_jsonl(tmp_path / "t.jsonl", TEMPLATES[:2])
        out = tmp_path / "side.jsonl"
        code = main([
            "--corpus", str(corpus), "--templates", str(templates),
            "--out", str(out), "--model", "hash", "--k", "4",
        ])
        assert code == 0
        assert "24 atoms" in capsys.readouterr().out
        assert out.exists()

    def test_bad_templates_exit_code(self, tmp_path, capsys):
        from pmt_extractor.cli import main

        corpus = write_jsonl(tmp_path / "c.jsonl", corpus_records(1))
        templates = write_jsonl(tmp_path / "t.jsonl", [{"name": "X", "template": "no mask"}])
        code = main([
            "--corpus", str(corpus), "--templates", str(templates),
            "--out", str(tmp_path / "side.jsonl"),
        ])
        assert code == 1
        assert "error" in capsys.readouterr().err
