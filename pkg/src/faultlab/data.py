"""Dataset ingestion, tokenization, subsetting, and batching.

File formats (fixture examples live under ``tests/fixtures/``):

- classification JSONL: one ``{"text": str, "label": int}`` object per line
- classification CSV: header ``text,label``, standard quoting
- LM text: plain UTF-8, one line per candidate sequence
- BPE vocab: one ``<token><TAB><id>`` per line
- BPE merges: one space-separated symbol pair per line, rank = line order

The built-in byte-level tokenizer (ids = 2 specials + 256 bytes) keeps the
whole pipeline runnable with zero external assets; BPE vocab/merges files
are the input for converted real checkpoints.  BPE pre-tokenization is a
documented simplification of the usual regex: split on whitespace, then
re-attach a single leading space to every word after the first.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from .errors import DataError
from .rng import SeededRng

__all__ = [
    "ClassificationRecord",
    "ClassificationDataset",
    "LMDataset",
    "Batch",
    "Tokenizer",
    "load_classification",
    "load_lm_lines",
    "subset",
    "batch",
]


@dataclass(frozen=True)
class ClassificationRecord:
    text: str
    label: int


@dataclass
class ClassificationDataset:
    records: list[ClassificationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class LMDataset:
    sequences: list[list[int]] = field(default_factory=list)
    #: lines skipped with a warning: blank, or shorter than 2 tokens
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.sequences)


@dataclass
class Batch:
    """Padded token ids plus attention marks (1 = real, 0 = pad)."""

    token_ids: list[list[int]]
    marks: list[list[int]]
    lengths: list[int]
    labels: list[int] | None = None

    def __len__(self) -> int:
        return len(self.token_ids)


def _bytes_to_unicode() -> dict[int, str]:
    """Reversible byte -> printable-unicode map for BPE vocab files."""
    printable = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    mapping = {b: chr(b) for b in printable}
    shift = 0
    for b in range(256):
        if b not in mapping:
            mapping[b] = chr(256 + shift)
            shift += 1
    return mapping


_BYTE_TO_UNICODE = _bytes_to_unicode()


class Tokenizer:
    """Byte-level or BPE text-to-ids mapping with pad/unk specials."""

    def __init__(
        self,
        mode: str,
        vocab: dict[str, int] | None = None,
        merges: list[tuple[str, str]] | None = None,
        pad_id: int = 0,
        unk_id: int = 1,
    ):
        if mode not in ("byte", "bpe"):
            raise DataError(f"tokenizer mode must be 'byte' or 'bpe', got {mode!r}")
        self.mode = mode
        self.pad_id = pad_id
        self.unk_id = unk_id
        if mode == "bpe":
            if not vocab or merges is None:
                raise DataError("bpe mode requires a vocab map and a merges list")
            self.vocab = vocab
            self.merges = merges
            self._ranks = {}
            for rank, pair in enumerate(merges):
                if pair in self._ranks:
                    raise DataError(f"duplicate merge pair {pair!r}")
                self._ranks[pair] = rank
            self._word_cache: dict[str, list[int]] = {}
        else:
            self.vocab = None
            self.merges = None

    @classmethod
    def byte_level(cls) -> "Tokenizer":
        """256 byte ids shifted past 2 specials (pad=0, unk=1); vocab 258."""
        return cls("byte")

    @classmethod
    def bpe_from_files(cls, vocab_path: str, merges_path: str) -> "Tokenizer":
        vocab: dict[str, int] = {}
        with open(vocab_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if "\t" not in line:
                    raise DataError(f"{vocab_path}:{lineno}: expected <token><TAB><id>")
                token, _, raw_id = line.rpartition("\t")
                try:
                    token_id = int(raw_id)
                except ValueError:
                    raise DataError(f"{vocab_path}:{lineno}: id {raw_id!r} is not an integer") from None
                if token in vocab:
                    raise DataError(f"{vocab_path}:{lineno}: duplicate token {token!r}")
                vocab[token] = token_id
        merges: list[tuple[str, str]] = []
        with open(merges_path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise DataError(f"{merges_path}:{lineno}: expected two space-separated symbols")
                merges.append((parts[0], parts[1]))
        return cls("bpe", vocab=vocab, merges=merges)

    @property
    def vocab_size(self) -> int:
        if self.mode == "byte":
            return 258
        return max(max(self.vocab.values()) + 1, self.pad_id + 1, self.unk_id + 1)

    def _bpe_word(self, word: str) -> list[int]:
        cached = self._word_cache.get(word)
        if cached is not None:
            return cached
        symbols = [_BYTE_TO_UNICODE[b] for b in word.encode("utf-8")]
        while len(symbols) > 1:
            best_rank = None
            best_pair = None
            for pair in zip(symbols, symbols[1:]):
                rank = self._ranks.get(pair)
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_pair = rank, pair
            if best_pair is None:
                break
            merged = []
            i = 0
            while i < len(symbols):
                if (
                    i + 1 < len(symbols)
                    and symbols[i] == best_pair[0]
                    and symbols[i + 1] == best_pair[1]
                ):
                    merged.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        ids = [self.vocab.get(s, self.unk_id) for s in symbols]
        self._word_cache[word] = ids
        return ids

    def encode(self, text: str) -> list[int]:
        """Token ids for a text; empty text gives an empty sequence."""
        if self.mode == "byte":
            return [2 + b for b in text.encode("utf-8")]
        ids: list[int] = []
        for i, word in enumerate(text.split()):
            ids.extend(self._bpe_word(word if i == 0 else " " + word))
        return ids


def _load_jsonl(path: str) -> ClassificationDataset:
    ds = ClassificationDataset()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if not isinstance(obj, dict) or "text" not in obj or "label" not in obj:
                raise DataError(f"{path}:{lineno}: record must have 'text' and 'label'")
            text, label = obj["text"], obj["label"]
            if not isinstance(text, str) or not text.strip():
                raise DataError(f"{path}:{lineno}: 'text' must be a nonempty string")
            if isinstance(label, bool) or not isinstance(label, int) or label < 0:
                raise DataError(f"{path}:{lineno}: 'label' must be a non-negative integer")
            ds.records.append(ClassificationRecord(text=text, label=label))
    return ds


def _load_csv(path: str) -> ClassificationDataset:
    ds = ClassificationDataset()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}:1: CSV header must contain 'text' and 'label'")
        for row in reader:
            lineno = reader.line_num
            text, raw_label = row.get("text"), row.get("label")
            if text is None or raw_label is None:
                raise DataError(f"{path}:{lineno}: row missing 'text' or 'label'")
            if not text.strip():
                raise DataError(f"{path}:{lineno}: 'text' must be nonempty")
            try:
                label = int(raw_label)
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {raw_label!r} is not an integer") from None
            if label < 0:
                raise DataError(f"{path}:{lineno}: label must be non-negative")
            ds.records.append(ClassificationRecord(text=text, label=label))
    return ds


def load_classification(path: str) -> ClassificationDataset:
    """Load (text, label) records from a JSONL or CSV file, in file order."""
    if path.endswith(".csv"):
        return _load_csv(path)
    return _load_jsonl(path)


def load_lm_lines(path: str, tokenizer: Tokenizer, max_tokens: int, max_lines: int) -> LMDataset:
    """First `max_lines` nonempty lines, tokenized and truncated to `max_tokens`.

    Blank lines and lines shorter than 2 tokens are skipped with a counted
    warning (``dataset.skipped``).
    """
    if max_tokens < 2:
        raise DataError(f"max_tokens must be >= 2, got {max_tokens}")
    if max_lines < 0:
        raise DataError(f"max_lines must be >= 0, got {max_lines}")
    ds = LMDataset()
    taken = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if taken >= max_lines:
                break
            stripped = line.strip()
            if not stripped:
                ds.skipped += 1
                continue
            taken += 1
            ids = tokenizer.encode(stripped)[:max_tokens]
            if len(ids) < 2:
                ds.skipped += 1
                continue
            ds.sequences.append(ids)
    return ds


def subset(dataset, n: int, seed: int):
    """n records sampled without replacement, deterministic per seed."""
    size = len(dataset)
    if n < 0 or n > size:
        raise DataError(f"cannot sample {n} records from a dataset of {size}")
    rng = SeededRng(seed).child("subset")
    indices = list(range(size))
    for i in range(n):
        j = i + rng.randint_below(size - i)
        indices[i], indices[j] = indices[j], indices[i]
    chosen = indices[:n]
    if isinstance(dataset, ClassificationDataset):
        return ClassificationDataset(records=[dataset.records[i] for i in chosen])
    if isinstance(dataset, LMDataset):
        return LMDataset(sequences=[dataset.sequences[i] for i in chosen], skipped=dataset.skipped)
    raise DataError(f"cannot subset object of type {type(dataset).__name__}")


def batch(dataset, batch_size: int, tokenizer: Tokenizer | None = None) -> list[Batch]:
    """Contiguous batches in dataset order; the final partial batch is kept.

    Sequences are padded to the batch maximum with the pad id and marked so
    attention ignores pad positions; unpadded positions are unchanged.
    """
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    if isinstance(dataset, ClassificationDataset):
        if tokenizer is None:
            raise DataError("batching a classification dataset requires a tokenizer")
        sequences = [tokenizer.encode(r.text) for r in dataset.records]
        for i, seq in enumerate(sequences):
            if not seq:
                raise DataError(f"record {i} tokenized to an empty sequence")
        labels: list[int] | None = [r.label for r in dataset.records]
        pad_id = tokenizer.pad_id
    elif isinstance(dataset, LMDataset):
        sequences = dataset.sequences
        labels = None
        pad_id = tokenizer.pad_id if tokenizer is not None else 0
    else:
        raise DataError(f"cannot batch object of type {type(dataset).__name__}")

    batches: list[Batch] = []
    for start in range(0, len(sequences), batch_size):
        chunk = sequences[start : start + batch_size]
        width = max(len(s) for s in chunk)
        ids = [list(s) + [pad_id] * (width - len(s)) for s in chunk]
        marks = [[1] * len(s) + [0] * (width - len(s)) for s in chunk]
        lengths = [len(s) for s in chunk]
        chunk_labels = labels[start : start + batch_size] if labels is not None else None
        batches.append(Batch(token_ids=ids, marks=marks, lengths=lengths, labels=chunk_labels))
    return batches
