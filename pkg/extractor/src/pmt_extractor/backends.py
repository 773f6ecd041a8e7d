"""Fill-mask backends.

"hash" is a deterministic stand-in that needs no model download: the
top-k fillers are drawn from a fixed word list by hashing (template, text,
rank). Anything else is treated as a HuggingFace model name or path and
served through the transformers fill-mask pipeline.
"""

from __future__ import annotations

import hashlib
import logging

logger = logging.getLogger(__name__)

_WORDS = [
    f"{prefix}{suffix}"
    for prefix in (
        "good", "bad", "great", "poor", "fine", "odd", "calm", "dark", "warm", "cold",
        "fast", "slow", "rich", "flat", "deep", "wild", "soft", "hard", "pure", "grim",
        "vast", "tiny", "bold", "pale", "loud", "mild", "keen", "raw", "neat", "dull",
    )
    for suffix in ("", "er", "est", "ly", "ish", "ness", "ment", "ing", "ed", "s",
                   "ful", "less", "ary", "ive", "al", "en")
]


class FillMaskBackend:
    name: str

    def top_k(self, template, text: str, k: int) -> list[str]:
        """k distinct lowercase fillers for the template's mask."""
        raise NotImplementedError


class HashBackend(FillMaskBackend):
    name = "hash"

    def top_k(self, template, text: str, k: int) -> list[str]:
        fillers: list[str] = []
        rank = 0
        while len(fillers) < k:
            digest = hashlib.sha256(
                f"{template.name}\x1f{text}\x1f{rank}".encode("utf-8")
            ).digest()
            word = _WORDS[int.from_bytes(digest[:4], "big") % len(_WORDS)]
            if word not in fillers:
                fillers.append(word)
            rank += 1
            if rank > 50 * k:  # word list exhausted relative to k
                raise ValueError(f"cannot produce {k} distinct fillers")
        return fillers


class TransformersBackend(FillMaskBackend):
    def __init__(self, model: str, batch_size: int = 16, max_length: int = 256):
        try:
            from transformers import pipeline
        except ImportError as exc:
            raise RuntimeError(
                "transformers is not installed; use --model hash or install the hf extra"
            ) from exc
        self.name = model
        self.max_length = max_length
        self.pipe = pipeline("fill-mask", model=model, batch_size=batch_size)
        tokenizer = self.pipe.tokenizer
        if tokenizer.mask_token is None:
            raise ValueError(f"model {model!r} has no mask token; cannot fill templates")
        self.mask_token = tokenizer.mask_token
        self.tokenizer = tokenizer

    def _truncate(self, template, text: str) -> str:
        budget = self.max_length - len(self.tokenizer.tokenize(template.render(""))) - 8
        tokens = self.tokenizer.tokenize(text)
        if len(tokens) > budget:
            logger.warning("truncating instance text from %d to %d tokens", len(tokens), budget)
            text = self.tokenizer.convert_tokens_to_string(tokens[:budget])
        return text

    def top_k(self, template, text: str, k: int) -> list[str]:
        prompt = template.render(self._truncate(template, text), self.mask_token)
        fillers: list[str] = []
        for result in self.pipe(prompt, top_k=k * 2):
            token = result["token_str"].strip().lstrip("Ġ▁").replace("##", "")
            token = token.strip().lower()
            if token and token not in fillers:
                fillers.append(token)
            if len(fillers) == k:
                break
        if len(fillers) < k:
            logger.warning(
                "only %d distinct fillers for template %s (wanted %d)",
                len(fillers), template.name, k,
            )
        return fillers


def make_backend(model: str, batch_size: int = 16, max_length: int = 256) -> FillMaskBackend:
    if model == "hash":
        return HashBackend()
    return TransformersBackend(model, batch_size, max_length)
