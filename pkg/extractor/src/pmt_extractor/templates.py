"""Prompt template declarations: {"name", "template"} records, one per
line, each with exactly one [MASK] and a [TEXT] slot."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class TemplateSpec:
    name: str
    template: str

    def __post_init__(self):
        if self.template.count("[MASK]") != 1:
            raise TemplateError(f"template {self.name!r} must contain exactly one [MASK]")
        if "[TEXT]" not in self.template:
            raise TemplateError(f"template {self.name!r} must contain a [TEXT] slot")

    def render(self, text: str, mask_token: str = "[MASK]") -> str:
        return self.template.replace("[TEXT]", text).replace("[MASK]", mask_token)


def load_templates(path: str | Path) -> list[TemplateSpec]:
    specs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TemplateError(f"{path}:{lineno}: malformed record: {exc}") from None
            if "name" not in record or "template" not in record:
                raise TemplateError(f"{path}:{lineno}: record needs name and template")
            spec = TemplateSpec(str(record["name"]), str(record["template"]))
            if spec.name in seen:
                raise TemplateError(f"{path}:{lineno}: duplicate template {spec.name!r}")
            seen.add(spec.name)
            specs.append(spec)
    if not specs:
        raise TemplateError(f"{path}: no templates")
    return specs
