"""Prompt-feature sidecar generation for the interactive weak-supervision
engine: query a masked language model per (instance, template) and emit the
top-k fillers as typed feature atoms."""

from .backends import FillMaskBackend, HashBackend, make_backend
from .extract import extract, read_corpus_texts
from .templates import TemplateError, TemplateSpec, load_templates

__version__ = "0.1.0"
