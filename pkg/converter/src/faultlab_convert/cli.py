"""Command-line entry point: `faultlab-convert SRC OUT`."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .convert import convert
from .errors import ConvertError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="faultlab-convert",
        description=(
            "Convert a Hugging Face GPT-2-family checkpoint into faultlab's"
            " container format, exporting BPE vocab/merges files alongside."
        ),
    )
    parser.add_argument(
        "src",
        help="local checkpoint directory, or a hub id already fetched into the local cache",
    )
    parser.add_argument("out", help="output directory (created if needed)")
    parser.add_argument(
        "--model-name",
        default="model",
        help="basename for the checkpoint file (default: model -> model.ckpt)",
    )
    parser.add_argument(
        "--skip-tokenizer",
        action="store_true",
        help="do not export vocab.tsv/merges.txt",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    args = parser.parse_args(argv)

    try:
        summary = convert(
            args.src,
            args.out,
            model_name=args.model_name,
            tokenizer=not args.skip_tokenizer,
        )
    except ConvertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for line in summary.describe():
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
