"""Tokenizers, dataset loaders, subsetting, and batching."""

import pathlib

import pytest
from hypothesis import given, strategies as st

from faultlab import (
    Batch,
    ClassificationDataset,
    ClassificationRecord,
    DataError,
    LMDataset,
    Tokenizer,
    batch,
    load_classification,
    load_lm_lines,
    subset,
)

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


# ---------------------------------------------------------------- byte mode


def test_byte_tokenizer_shifts_past_specials():
    tok = Tokenizer.byte_level()
    assert tok.encode("ab") == [2 + ord("a"), 2 + ord("b")]
    assert tok.pad_id == 0
    assert tok.unk_id == 1
    assert tok.vocab_size == 258


def test_byte_tokenizer_empty_text():
    assert Tokenizer.byte_level().encode("") == []


def test_byte_tokenizer_utf8_multibyte():
    # one codepoint, two UTF-8 bytes
    ids = Tokenizer.byte_level().encode("é")
    raw = "é".encode("utf-8")
    assert ids == [2 + b for b in raw]
    assert len(ids) == 2


def test_tokenizer_mode_validation():
    with pytest.raises(DataError):
        Tokenizer("wordpiece")
    with pytest.raises(DataError):
        Tokenizer("bpe")  # vocab/merges required


# ----------------------------------------------------------------- bpe mode


def bpe_fixture() -> Tokenizer:
    return Tokenizer.bpe_from_files(
        str(FIXTURES / "tiny_vocab.tsv"), str(FIXTURES / "tiny_merges.txt")
    )


def test_bpe_loads_fixture_files():
    tok = bpe_fixture()
    assert tok.vocab["ab"] == 4
    assert tok.merges[0] == ("a", "b")
    # comment line in merges is skipped
    assert len(tok.merges) == 3
    assert tok.vocab_size == 9


def test_bpe_merge_order_is_rank_greedy():
    tok = bpe_fixture()
    # first word has no leading space; later words get one re-attached.
    # "ab"    -> [a, b] -(rank 0)-> [ab]              -> [4]
    # " ab"   -> [Ġ, a, b] -(rank 0 beats rank 1)-> [Ġ, ab] -> [5, 4]
    assert tok.encode("ab ab") == [4, 5, 4]


def test_bpe_unknown_symbol_maps_to_unk():
    tok = bpe_fixture()
    assert tok.encode("ax") == [2, 1]


def test_bpe_unmergeable_pair_stays_split():
    tok = bpe_fixture()
    assert tok.encode("ac") == [2, 8]


def test_bpe_word_cache_is_consistent():
    tok = bpe_fixture()
    first = tok.encode("ab ab ab")
    second = tok.encode("ab ab ab")
    assert first == second == [4, 5, 4, 5, 4]


def test_bpe_vocab_line_without_tab(tmp_path):
    bad = tmp_path / "vocab.tsv"
    bad.write_text("a 2\n", encoding="utf-8")
    merges = tmp_path / "merges.txt"
    merges.write_text("", encoding="utf-8")
    with pytest.raises(DataError, match=r"vocab\.tsv:1"):
        Tokenizer.bpe_from_files(str(bad), str(merges))


def test_bpe_vocab_non_integer_id(tmp_path):
    bad = tmp_path / "vocab.tsv"
    bad.write_text("a\ttwo\n", encoding="utf-8")
    merges = tmp_path / "merges.txt"
    merges.write_text("", encoding="utf-8")
    with pytest.raises(DataError, match=r"vocab\.tsv:1"):
        Tokenizer.bpe_from_files(str(bad), str(merges))


def test_bpe_vocab_duplicate_token(tmp_path):
    bad = tmp_path / "vocab.tsv"
    bad.write_text("a\t2\na\t3\n", encoding="utf-8")
    merges = tmp_path / "merges.txt"
    merges.write_text("", encoding="utf-8")
    with pytest.raises(DataError, match=r"vocab\.tsv:2.*duplicate"):
        Tokenizer.bpe_from_files(str(bad), str(merges))


def test_bpe_merges_wrong_arity(tmp_path):
    vocab = tmp_path / "vocab.tsv"
    vocab.write_text("a\t2\n", encoding="utf-8")
    bad = tmp_path / "merges.txt"
    bad.write_text("a b c\n", encoding="utf-8")
    with pytest.raises(DataError, match=r"merges\.txt:1"):
        Tokenizer.bpe_from_files(str(vocab), str(bad))


def test_bpe_duplicate_merge_pair(tmp_path):
    vocab = tmp_path / "vocab.tsv"
    vocab.write_text("a\t2\n", encoding="utf-8")
    bad = tmp_path / "merges.txt"
    bad.write_text("a b\na b\n", encoding="utf-8")
    with pytest.raises(DataError, match="duplicate merge"):
        Tokenizer.bpe_from_files(str(vocab), str(bad))


# ------------------------------------------------------- classification load


def test_load_jsonl_keeps_file_order_and_skips_blanks():
    ds = load_classification(str(FIXTURES / "tiny_classify.jsonl"))
    assert [r.text for r in ds.records] == ["hello", "bye"]
    assert [r.label for r in ds.records] == [1, 0]
    assert len(ds) == 2


def test_load_csv_with_quoting():
    ds = load_classification(str(FIXTURES / "tiny_classify.csv"))
    assert ds.records[0] == ClassificationRecord(text="hello, world", label=1)
    assert ds.records[1].label == 0


def test_jsonl_invalid_json_reports_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"text": "ok", "label": 0}\n{oops\n', encoding="utf-8")
    with pytest.raises(DataError, match=r"bad\.jsonl:2"):
        load_classification(str(p))


def test_jsonl_missing_keys(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"text": "ok"}\n', encoding="utf-8")
    with pytest.raises(DataError, match=":1"):
        load_classification(str(p))


def test_jsonl_rejects_blank_text(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"text": "  ", "label": 0}\n', encoding="utf-8")
    with pytest.raises(DataError, match="'text'"):
        load_classification(str(p))


@pytest.mark.parametrize("label", ["true", "-1", "1.5", '"3"'])
def test_jsonl_rejects_non_count_labels(tmp_path, label):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"text": "ok", "label": %s}\n' % label, encoding="utf-8")
    with pytest.raises(DataError, match="'label'"):
        load_classification(str(p))


def test_csv_header_must_have_text_and_label(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("sentence,label\nhi,0\n", encoding="utf-8")
    with pytest.raises(DataError, match="header"):
        load_classification(str(p))


def test_csv_non_integer_label_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("text,label\nhi,0\nyo,x\n", encoding="utf-8")
    with pytest.raises(DataError, match=r"bad\.csv:3"):
        load_classification(str(p))


def test_csv_negative_label(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("text,label\nhi,-2\n", encoding="utf-8")
    with pytest.raises(DataError, match="non-negative"):
        load_classification(str(p))


def test_load_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_classification(str(tmp_path / "nope.jsonl"))


# ----------------------------------------------------------------- lm lines


def test_load_lm_lines_skips_and_truncates():
    tok = Tokenizer.byte_level()
    ds = load_lm_lines(str(FIXTURES / "tiny_lines.txt"), tok, max_tokens=8, max_lines=100)
    # "first line" truncated to 8 ids; blank line and "x" (1 token) skipped
    assert len(ds) == 2
    assert ds.sequences[0] == tok.encode("first line")[:8]
    assert len(ds.sequences[0]) == 8
    assert ds.skipped == 2


def test_load_lm_lines_max_lines_counts_examined_nonempty_lines():
    tok = Tokenizer.byte_level()
    ds = load_lm_lines(str(FIXTURES / "tiny_lines.txt"), tok, max_tokens=8, max_lines=2)
    # the two nonempty lines examined are "first line" and "x" (skipped)
    assert len(ds) == 1
    assert ds.skipped == 2  # blank line + "x"


def test_load_lm_lines_argument_validation(tmp_path):
    tok = Tokenizer.byte_level()
    p = tmp_path / "t.txt"
    p.write_text("hello\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_lm_lines(str(p), tok, max_tokens=1, max_lines=10)
    with pytest.raises(DataError):
        load_lm_lines(str(p), tok, max_tokens=4, max_lines=-1)


# ------------------------------------------------------------------- subset


def make_classify(n: int) -> ClassificationDataset:
    return ClassificationDataset(
        records=[ClassificationRecord(text=f"t{i}", label=i % 2) for i in range(n)]
    )


def test_subset_is_deterministic_and_without_replacement():
    ds = make_classify(50)
    a = subset(ds, 20, seed=42)
    b = subset(ds, 20, seed=42)
    assert [r.text for r in a.records] == [r.text for r in b.records]
    assert len({r.text for r in a.records}) == 20


def test_subset_differs_across_seeds():
    ds = make_classify(50)
    a = subset(ds, 20, seed=42)
    b = subset(ds, 20, seed=43)
    assert [r.text for r in a.records] != [r.text for r in b.records]


def test_subset_bounds():
    ds = make_classify(5)
    assert len(subset(ds, 0, seed=1)) == 0
    assert len(subset(ds, 5, seed=1)) == 5
    with pytest.raises(DataError):
        subset(ds, 6, seed=1)
    with pytest.raises(DataError):
        subset(ds, -1, seed=1)


def test_subset_lm_preserves_skip_count():
    ds = LMDataset(sequences=[[2, 3], [4, 5], [6, 7]], skipped=9)
    out = subset(ds, 2, seed=0)
    assert out.skipped == 9
    assert all(s in ds.sequences for s in out.sequences)


def test_subset_rejects_unknown_container():
    with pytest.raises(DataError):
        subset([1, 2, 3], 2, seed=0)


@given(st.integers(0, 30), st.integers(0, 2**32))
def test_subset_members_come_from_source(n, seed):
    ds = make_classify(30)
    out = subset(ds, n, seed=seed)
    source = {r.text for r in ds.records}
    picked = [r.text for r in out.records]
    assert len(picked) == n
    assert len(set(picked)) == n
    assert set(picked) <= source


# -------------------------------------------------------------------- batch


def test_batch_pads_to_batch_maximum():
    tok = Tokenizer.byte_level()
    ds = ClassificationDataset(
        records=[
            ClassificationRecord(text="abc", label=0),
            ClassificationRecord(text="a", label=1),
        ]
    )
    (b,) = batch(ds, batch_size=2, tokenizer=tok)
    assert b.token_ids == [tok.encode("abc"), tok.encode("a") + [0, 0]]
    assert b.marks == [[1, 1, 1], [1, 0, 0]]
    assert b.lengths == [3, 1]
    assert b.labels == [0, 1]
    assert len(b) == 2


def test_batch_keeps_order_and_final_partial():
    tok = Tokenizer.byte_level()
    ds = make_classify(5)
    batches = batch(ds, batch_size=2, tokenizer=tok)
    assert [len(b) for b in batches] == [2, 2, 1]
    flat = [lab for b in batches for lab in b.labels]
    assert flat == [r.label for r in ds.records]


def test_batch_widths_are_per_batch():
    ds = LMDataset(sequences=[[2, 3, 4, 5], [2, 3], [2, 3, 4]])
    batches = batch(ds, batch_size=2)
    assert len(batches[0].token_ids[0]) == 4
    assert len(batches[1].token_ids[0]) == 3
    assert batches[0].labels is None
    assert batches[0].token_ids[1] == [2, 3, 0, 0]


def test_batch_classification_requires_tokenizer():
    with pytest.raises(DataError):
        batch(make_classify(3), batch_size=2)


def test_batch_rejects_empty_encoding():
    tok = bpe_fixture()
    ds = ClassificationDataset(records=[ClassificationRecord(text=" ", label=0)])
    with pytest.raises(DataError, match="empty"):
        batch(ds, batch_size=1, tokenizer=tok)


def test_batch_size_validation():
    with pytest.raises(DataError):
        batch(make_classify(3), batch_size=0, tokenizer=Tokenizer.byte_level())


def test_batch_rejects_unknown_container():
    with pytest.raises(DataError):
        batch({"a": 1}, batch_size=1)


def test_batch_dataclass_shape():
    b = Batch(token_ids=[[2]], marks=[[1]], lengths=[1])
    assert b.labels is None
    assert len(b) == 1
