"""Produce sidecar files: one record per corpus instance carrying k
prompt-feature atoms per template, written atomically."""

from __future__ import annotations

import json
import os
from pathlib import Path

from .backends import FillMaskBackend
from .templates import TemplateSpec


def read_corpus_texts(path: str | Path) -> list[tuple[str, str]]:
    """(id, text) pairs from a corpus record file; other fields ignored."""
    pairs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from None
            if "id" not in record or "text" not in record:
                raise ValueError(f"{path}:{lineno}: record needs id and text")
            iid = str(record["id"])
            if iid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {iid!r}")
            seen.add(iid)
            pairs.append((iid, str(record["text"])))
    if not pairs:
        raise ValueError(f"{path}: no instances")
    return pairs


def extract(
    corpus_path: str | Path,
    templates: list[TemplateSpec],
    backend: FillMaskBackend,
    k: int,
    out_path: str | Path,
) -> int:
    """Write one sidecar record per instance; returns the atom count."""
    if k < 1:
        raise ValueError("k must be >= 1")
    pairs = read_corpus_texts(corpus_path)
    out_path = Path(out_path)
    tmp_path = out_path.with_name(out_path.name + ".tmp")

    total = 0
    with open(tmp_path, "w", encoding="utf-8") as fh:
        for iid, text in pairs:
            features = []
            for template in templates:
                for token in backend.top_k(template, text, k):
                    features.append({"kind": "PMT", "value": f"{template.name}={token}"})
            total += len(features)
            fh.write(json.dumps({"id": iid, "features": features}, ensure_ascii=False))
            fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    tmp_path.replace(out_path)
    return total
