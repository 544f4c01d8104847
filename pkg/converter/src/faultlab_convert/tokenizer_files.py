"""Export BPE vocab/merges into faultlab's text formats.

Sources, in order of preference: ``vocab.json`` + ``merges.txt``
(classic GPT-2 tokenizer files), else the ``model`` section of a
``tokenizer.json`` (fast-tokenizer bundle).  Output formats follow the
consumer's contract (faultlab repo, ``docs/data_formats.md``):

- ``vocab.tsv``: one ``<token><TAB><id>`` per line
- ``merges.txt``: one space-separated symbol pair per line, rank =
  line order

Tokens are kept in the printable byte alphabet the source files already
use (space appears as ``Ġ``), which is exactly what the consumer's BPE
loader expects.
"""

from __future__ import annotations

import json
import pathlib

from .errors import ConvertError


def _read_classic(src: pathlib.Path) -> tuple[dict[str, int], list[tuple[str, str]]] | None:
    vocab_path = src / "vocab.json"
    merges_path = src / "merges.txt"
    if not (vocab_path.is_file() and merges_path.is_file()):
        return None
    with open(vocab_path, encoding="utf-8") as fh:
        vocab = json.load(fh)
    merges: list[tuple[str, str]] = []
    with open(merges_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise ConvertError(f"{merges_path}:{lineno}: expected two space-separated symbols")
            merges.append((parts[0], parts[1]))
    return vocab, merges


def _read_bundle(src: pathlib.Path) -> tuple[dict[str, int], list[tuple[str, str]]] | None:
    bundle_path = src / "tokenizer.json"
    if not bundle_path.is_file():
        return None
    with open(bundle_path, encoding="utf-8") as fh:
        bundle = json.load(fh)
    model = bundle.get("model") or {}
    if model.get("type") != "BPE":
        raise ConvertError(f"{bundle_path}: tokenizer model type {model.get('type')!r} is not BPE")
    vocab = model.get("vocab")
    raw_merges = model.get("merges")
    if not isinstance(vocab, dict) or not isinstance(raw_merges, list):
        raise ConvertError(f"{bundle_path}: BPE model must carry 'vocab' and 'merges'")
    merges: list[tuple[str, str]] = []
    for i, entry in enumerate(raw_merges):
        # older bundles store "a b", newer ones ["a", "b"]
        pair = entry.split(" ") if isinstance(entry, str) else list(entry)
        if len(pair) != 2:
            raise ConvertError(f"{bundle_path}: merge #{i} is not a symbol pair: {entry!r}")
        merges.append((pair[0], pair[1]))
    return vocab, merges


def export_tokenizer_files(src_dir: str, out_dir: str) -> tuple[str, str] | None:
    """Write ``vocab.tsv`` + ``merges.txt`` under out_dir; None if no source."""
    src = pathlib.Path(src_dir)
    loaded = _read_classic(src) or _read_bundle(src)
    if loaded is None:
        return None
    vocab, merges = loaded

    for token, token_id in vocab.items():
        if not isinstance(token_id, int) or token_id < 0:
            raise ConvertError(f"vocab id for {token!r} must be a non-negative integer, got {token_id!r}")
        if any(c in token for c in "\t\n\r"):
            raise ConvertError(f"vocab token {token!r} contains tab/newline; not representable in vocab.tsv")
    for a, b in merges:
        if not a or not b or " " in a or " " in b:
            raise ConvertError(f"merge pair ({a!r}, {b!r}) symbols must be nonempty and space-free")

    out = pathlib.Path(out_dir)
    vocab_path = out / "vocab.tsv"
    merges_path = out / "merges.txt"
    with open(vocab_path, "w", encoding="utf-8") as fh:
        for token, token_id in sorted(vocab.items(), key=lambda kv: (kv[1], kv[0])):
            fh.write(f"{token}\t{token_id}\n")
    with open(merges_path, "w", encoding="utf-8") as fh:
        for a, b in merges:
            fh.write(f"{a} {b}\n")
    return str(vocab_path), str(merges_path)
