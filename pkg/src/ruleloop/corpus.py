"""Dataset loading, validation, and the canonical on-disk record formats.

A corpus is a line-delimited JSON file, one instance per line:

    {"id": ..., "text": ..., "split": ..., "gold_label": ...,
     "embedding": [...], "features": [{"kind": ..., "value": ...}]}

Sidecar files carry extra feature atoms produced externally (POS/NER tags,
prompt-based features), one record per line:

    {"id": ..., "features": [{"kind": ..., "value": ...}]}

Template declaration files list the prompt templates that PMT atoms may
reference, one record per line:

    {"name": ..., "template": ...}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

FEATURE_KINDS = ("NGRAM", "POS", "NER", "PMT")
SPLITS = ("labeled", "unlabeled", "validation", "test")

# Splits whose instances must carry a gold label.
GOLD_REQUIRED_SPLITS = ("labeled", "validation", "test")


class CorpusError(ValueError):
    """Raised on malformed corpus, sidecar, template, or rule files."""


@dataclass(frozen=True, order=True)
class FeatureAtom:
    """A typed feature: an n-gram, a linguistic tag, or a prompt filler.

    PMT values have the form "TEMPLATE_NAME=token".
    """

    kind: str
    value: str

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise CorpusError(f"unknown feature kind {self.kind!r}")
        if not self.value:
            raise CorpusError("feature value must be non-empty")

    @staticmethod
    def make(kind: str, value: str) -> "FeatureAtom":
        """Canonicalize and build an atom (NGRAM values are case-folded)."""
        if kind == "NGRAM":
            value = value.casefold()
        return FeatureAtom(kind, value)

    def pmt_template(self) -> str:
        """Template name of a PMT atom ('' for other kinds)."""
        if self.kind != "PMT":
            return ""
        name, sep, _ = self.value.partition("=")
        if not sep or not name:
            raise CorpusError(f"PMT value {self.value!r} is not 'template=token'")
        return name

    def to_record(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass
class Instance:
    """One text example with split membership and a dense embedding."""

    id: str
    text: str
    split: str
    embedding: list[float]
    gold_label: int | None = None
    features: set[FeatureAtom] = field(default_factory=set)


@dataclass
class Corpus:
    instances: list[Instance]
    num_classes: int
    class_names: list[str]
    embedding_dim: int
    template_names: frozenset[str] = frozenset()

    def __post_init__(self):
        self._by_id = {inst.id: inst for inst in self.instances}

    def __len__(self) -> int:
        return len(self.instances)

    def get(self, instance_id: str) -> Instance:
        try:
            return self._by_id[instance_id]
        except KeyError:
            raise CorpusError(f"unknown instance id {instance_id!r}") from None

    def has(self, instance_id: str) -> bool:
        return instance_id in self._by_id

    def split_instances(self, split: str) -> list[Instance]:
        if split not in SPLITS:
            raise CorpusError(f"unknown split {split!r}")
        return [inst for inst in self.instances if inst.split == split]

    def split_ids(self, split: str) -> list[str]:
        return [inst.id for inst in self.split_instances(split)]


def _parse_atom(obj, where: str, template_names: frozenset[str]) -> FeatureAtom:
    if not isinstance(obj, dict) or "kind" not in obj or "value" not in obj:
        raise CorpusError(f"{where}: feature must be an object with kind and value")
    atom = FeatureAtom.make(str(obj["kind"]), str(obj["value"]))
    if atom.kind == "PMT":
        template = atom.pmt_template()
        if template not in template_names:
            raise CorpusError(f"{where}: PMT atom names undeclared template {template!r}")
    return atom


def load_templates(path: str | Path) -> frozenset[str]:
    """Read a template declaration file and return the declared names.

    Each template must contain exactly one [MASK] placeholder.
    """
    names = set()
    for lineno, record in _iter_records(path):
        where = f"{path}:{lineno}"
        if "name" not in record or "template" not in record:
            raise CorpusError(f"{where}: template record needs name and template")
        name = str(record["name"])
        template = str(record["template"])
        if template.count("[MASK]") != 1:
            raise CorpusError(f"{where}: template {name!r} must contain exactly one [MASK]")
        if name in names:
            raise CorpusError(f"{where}: duplicate template name {name!r}")
        names.add(name)
    return frozenset(names)


def _iter_records(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed record: {exc}") from None
            if not isinstance(record, dict):
                raise CorpusError(f"{path}:{lineno}: record must be a JSON object")
            yield lineno, record


def load_corpus(
    path: str | Path,
    num_classes: int,
    class_names: list[str] | None = None,
    template_names: frozenset[str] = frozenset(),
) -> Corpus:
    """Load and validate a corpus file.

    Class labels are 1-based indices in {1..num_classes}; class_names
    defaults to the stringified indices.
    """
    if num_classes < 2:
        raise CorpusError("num_classes must be >= 2")
    if class_names is None:
        class_names = [str(k) for k in range(1, num_classes + 1)]
    if len(class_names) != num_classes:
        raise CorpusError("class_names length must equal num_classes")

    instances: list[Instance] = []
    seen_ids: set[str] = set()
    dim: int | None = None

    for lineno, record in _iter_records(path):
        where = f"{path}:{lineno}"
        for key in ("id", "text", "split", "embedding"):
            if key not in record:
                raise CorpusError(f"{where}: missing field {key!r}")
        inst_id = str(record["id"])
        if inst_id in seen_ids:
            raise CorpusError(f"{where}: duplicate id {inst_id!r}")
        seen_ids.add(inst_id)

        split = record["split"]
        if split not in SPLITS:
            raise CorpusError(f"{where}: unknown split {split!r} for id {inst_id!r}")

        embedding = record["embedding"]
        if not isinstance(embedding, list) or not embedding:
            raise CorpusError(f"{where}: embedding must be a non-empty array (id {inst_id!r})")
        embedding = [float(x) for x in embedding]
        if dim is None:
            dim = len(embedding)
        elif len(embedding) != dim:
            raise CorpusError(
                f"{where}: embedding dimension {len(embedding)} != {dim} for id {inst_id!r}"
            )

        gold = record.get("gold_label")
        if gold is not None:
            if not isinstance(gold, int) or isinstance(gold, bool):
                raise CorpusError(f"{where}: gold_label must be an integer (id {inst_id!r})")
            if not 1 <= gold <= num_classes:
                raise CorpusError(
                    f"{where}: gold_label {gold} out of range 1..{num_classes} (id {inst_id!r})"
                )
        elif split in GOLD_REQUIRED_SPLITS:
            raise CorpusError(f"{where}: {split} instance {inst_id!r} missing gold_label")

        features = set()
        for obj in record.get("features", []):
            features.add(_parse_atom(obj, where, template_names))

        instances.append(
            Instance(
                id=inst_id,
                text=str(record["text"]),
                split=split,
                embedding=embedding,
                gold_label=gold,
                features=features,
            )
        )

    if not instances:
        raise CorpusError(f"{path}: no instances")

    assert dim is not None
    return Corpus(
        instances=instances,
        num_classes=num_classes,
        class_names=list(class_names),
        embedding_dim=dim,
        template_names=template_names,
    )


def ingest_sidecar(corpus: Corpus, path: str | Path) -> int:
    """Union sidecar atoms into instance feature sets.

    Returns the number of atoms actually added, so re-ingesting the same
    sidecar returns 0. Ingestion order across sidecar files does not matter.
    """
    added = 0
    for lineno, record in _iter_records(path):
        where = f"{path}:{lineno}"
        if "id" not in record or "features" not in record:
            raise CorpusError(f"{where}: sidecar record needs id and features")
        inst_id = str(record["id"])
        if not corpus.has(inst_id):
            raise CorpusError(f"{where}: unknown id {inst_id!r}")
        inst = corpus.get(inst_id)
        for obj in record["features"]:
            atom = _parse_atom(obj, where, corpus.template_names)
            if atom not in inst.features:
                inst.features.add(atom)
                added += 1
    return added


def instance_to_record(inst: Instance) -> dict:
    """Canonical serialized form (fixed key order, sorted features)."""
    record: dict = {"id": inst.id, "text": inst.text, "split": inst.split}
    if inst.gold_label is not None:
        record["gold_label"] = inst.gold_label
    record["embedding"] = inst.embedding
    if inst.features:
        record["features"] = [a.to_record() for a in sorted(inst.features)]
    return record


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus in canonical form (load/save round-trips exactly)."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in corpus.instances:
            fh.write(json.dumps(instance_to_record(inst), ensure_ascii=False))
            fh.write("\n")
