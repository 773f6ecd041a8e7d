import argparse
import logging
import sys

from .backends import make_backend
from .extract import extract
from .templates import TemplateError, load_templates


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pmt-extract",
        description="Fill prompt templates with a masked language model and emit a "
        "feature sidecar file.",
    )
    parser.add_argument("--corpus", required=True, help="corpus record file (JSONL)")
    parser.add_argument("--templates", required=True, help="template declaration file (JSONL)")
    parser.add_argument("--out", required=True, help="sidecar output path")
    parser.add_argument("--model", default="hash",
                        help="HuggingFace model name/path, or 'hash' for the deterministic stand-in")
    parser.add_argument("--k", type=int, default=10, help="fillers per template per instance")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-length", type=int, default=256)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        templates = load_templates(args.templates)
        backend = make_backend(args.model, args.batch_size, args.max_length)
        total = extract(args.corpus, templates, backend, args.k, args.out)
    except (TemplateError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: {total} atoms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
