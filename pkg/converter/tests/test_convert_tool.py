import contextlib
import io
import json
import pathlib

import numpy as np
import pytest

fc = pytest.importorskip("faultlab_convert")

from faultlab_convert import ConvertError, convert, export_tokenizer_files, resolve_source
from faultlab_convert.cli import main
from faultlab_convert.convert import load_state_dict

from conftest import tiny_config, tiny_state, write_source_dir


class TestResolveSource:
    def test_local_directory(self, tmp_path):
        assert resolve_source(str(tmp_path)) == tmp_path

    def test_hub_id_via_cache(self, tmp_path, monkeypatch):
        snap = tmp_path / "hub" / "models--openai-community--gpt2" / "snapshots" / "abc123"
        snap.mkdir(parents=True)
        (snap / "config.json").write_text("{}")
        monkeypatch.setenv("HF_HOME", str(tmp_path))
        assert resolve_source("openai-community/gpt2") == snap

    def test_unknown_source_suggests_download(self, monkeypatch, tmp_path):
        monkeypatch.setenv("HF_HOME", str(tmp_path / "empty"))
        monkeypatch.delenv("HUGGINGFACE_HUB_CACHE", raising=False)
        with pytest.raises(ConvertError, match="hf download no/such-model"):
            resolve_source("no/such-model")


class TestLoadStateDict:
    def test_safetensors(self, tmp_path):
        write_source_dir(tmp_path / "src")
        state = load_state_dict(tmp_path / "src")
        assert np.array_equal(state["transformer.wte.weight"], tiny_state()["transformer.wte.weight"])

    def test_torch_bin(self, tmp_path):
        torch = pytest.importorskip("torch")
        src = tmp_path / "src"
        src.mkdir()
        as_torch = {k: torch.from_numpy(v) for k, v in tiny_state().items()}
        torch.save(as_torch, src / "pytorch_model.bin")
        state = load_state_dict(src)
        assert np.array_equal(state["transformer.ln_f.bias"], tiny_state()["transformer.ln_f.bias"])

    def test_half_precision_upcast(self, tmp_path):
        from safetensors.numpy import save_file

        src = tmp_path / "src"
        src.mkdir()
        save_file({"x": np.array([1.5, -2.25], dtype=np.float16)}, str(src / "model.safetensors"))
        state = load_state_dict(src)
        assert state["x"].tolist() == [1.5, -2.25]

    def test_sharded_safetensors(self, tmp_path):
        from safetensors.numpy import save_file

        src = tmp_path / "src"
        src.mkdir()
        full = tiny_state()
        names = sorted(full)
        half = len(names) // 2
        shards = {
            "model-00001-of-00002.safetensors": {n: full[n] for n in names[:half]},
            "model-00002-of-00002.safetensors": {n: full[n] for n in names[half:]},
        }
        weight_map = {n: shard for shard, block in shards.items() for n in block}
        for shard, block in shards.items():
            save_file(block, str(src / shard))
        (src / "model.safetensors.index.json").write_text(json.dumps({"weight_map": weight_map}))
        state = load_state_dict(src)
        assert set(state) == set(full)
        assert np.array_equal(state["transformer.wpe.weight"], full["transformer.wpe.weight"])

    def test_no_weight_file(self, tmp_path):
        with pytest.raises(ConvertError, match="no weight file"):
            load_state_dict(tmp_path)


VOCAB = {"a": 0, "b": 1, "ab": 2, "Ġ": 3, "Ġa": 4, "Ġab": 5}
MERGES = [("Ġ", "a"), ("a", "b"), ("Ġa", "b")]


def write_classic_tokenizer(path: pathlib.Path) -> None:
    (path / "vocab.json").write_text(json.dumps(VOCAB), encoding="utf-8")
    lines = ["#version: 0.2"] + [f"{a} {b}" for a, b in MERGES]
    (path / "merges.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestTokenizerExport:
    def check_outputs(self, out: pathlib.Path) -> None:
        vocab_lines = (out / "vocab.tsv").read_text(encoding="utf-8").splitlines()
        assert vocab_lines == [f"{t}\t{i}" for t, i in sorted(VOCAB.items(), key=lambda kv: kv[1])]
        merge_lines = (out / "merges.txt").read_text(encoding="utf-8").splitlines()
        assert merge_lines == [f"{a} {b}" for a, b in MERGES]

    def test_classic_files(self, tmp_path):
        src, out = tmp_path / "src", tmp_path / "out"
        src.mkdir(), out.mkdir()
        write_classic_tokenizer(src)
        assert export_tokenizer_files(str(src), str(out)) == (
            str(out / "vocab.tsv"),
            str(out / "merges.txt"),
        )
        self.check_outputs(out)

    @pytest.mark.parametrize("merge_form", ["string", "list"])
    def test_fast_tokenizer_bundle(self, tmp_path, merge_form):
        src, out = tmp_path / "src", tmp_path / "out"
        src.mkdir(), out.mkdir()
        merges = [f"{a} {b}" for a, b in MERGES] if merge_form == "string" else [list(p) for p in MERGES]
        bundle = {"model": {"type": "BPE", "vocab": VOCAB, "merges": merges}}
        (src / "tokenizer.json").write_text(json.dumps(bundle), encoding="utf-8")
        assert export_tokenizer_files(str(src), str(out)) is not None
        self.check_outputs(out)

    def test_exports_load_in_consumer(self, tmp_path):
        faultlab = pytest.importorskip("faultlab")
        src, out = tmp_path / "src", tmp_path / "out"
        src.mkdir(), out.mkdir()
        write_classic_tokenizer(src)
        export_tokenizer_files(str(src), str(out))
        tok = faultlab.Tokenizer.bpe_from_files(str(out / "vocab.tsv"), str(out / "merges.txt"))
        assert tok.encode("ab ab") == [VOCAB["ab"], VOCAB["Ġab"]]

    def test_no_source_files(self, tmp_path):
        assert export_tokenizer_files(str(tmp_path), str(tmp_path)) is None

    def test_tab_in_token_rejected(self, tmp_path):
        (tmp_path / "vocab.json").write_text(json.dumps({"a\tb": 0}), encoding="utf-8")
        (tmp_path / "merges.txt").write_text("a b\n", encoding="utf-8")
        with pytest.raises(ConvertError, match="tab/newline"):
            export_tokenizer_files(str(tmp_path), str(tmp_path))

    def test_malformed_merge_line_rejected(self, tmp_path):
        (tmp_path / "vocab.json").write_text("{}", encoding="utf-8")
        (tmp_path / "merges.txt").write_text("a b c\n", encoding="utf-8")
        with pytest.raises(ConvertError, match="merges.txt:1"):
            export_tokenizer_files(str(tmp_path), str(tmp_path))

    def test_non_bpe_bundle_rejected(self, tmp_path):
        bundle = {"model": {"type": "WordPiece", "vocab": {}}}
        (tmp_path / "tokenizer.json").write_text(json.dumps(bundle), encoding="utf-8")
        with pytest.raises(ConvertError, match="not BPE"):
            export_tokenizer_files(str(tmp_path), str(tmp_path))


class TestConvert:
    def test_end_to_end_with_tokenizer(self, tmp_path):
        src = tmp_path / "src"
        write_source_dir(src)
        write_classic_tokenizer(src)
        summary = convert(str(src), str(tmp_path / "out"))
        assert pathlib.Path(summary.checkpoint).name == "model.ckpt"
        assert summary.tensor_count == 30
        assert summary.config["arch"] == "causal_lm"
        assert summary.vocab and summary.merges
        assert pathlib.Path(summary.vocab).is_file()

    def test_missing_config(self, tmp_path):
        with pytest.raises(ConvertError, match="no config.json"):
            convert(str(tmp_path), str(tmp_path / "out"))

    def test_invalid_config_json(self, tmp_path):
        (tmp_path / "config.json").write_text("{nope", encoding="utf-8")
        with pytest.raises(ConvertError, match="invalid JSON"):
            convert(str(tmp_path), str(tmp_path / "out"))


class TestCli:
    def run(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def test_success(self, tmp_path):
        src = tmp_path / "src"
        write_source_dir(src)
        code, out, err = self.run(str(src), str(tmp_path / "out"), "--model-name", "tiny")
        assert code == 0, err
        assert "tiny.ckpt" in out
        assert "30 tensors" in out
        assert (tmp_path / "out" / "tiny.ckpt").is_file()

    def test_skip_tokenizer(self, tmp_path):
        src = tmp_path / "src"
        write_source_dir(src)
        write_classic_tokenizer(src)
        code, out, _ = self.run(str(src), str(tmp_path / "out"), "--skip-tokenizer")
        assert code == 0
        assert "vocab.tsv" not in out
        assert not (tmp_path / "out" / "vocab.tsv").exists()

    def test_conversion_error_exit_code(self, tmp_path):
        src = tmp_path / "src"
        write_source_dir(src, config=tiny_config() | {"activation_function": "relu"})
        code, out, err = self.run(str(src), str(tmp_path / "out"))
        assert code == 1
        assert "error:" in err and "relu" in err

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            self.run("only-one-arg")
        assert exc.value.code == 2
