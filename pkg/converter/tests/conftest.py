import json
import sys

import numpy as np
import pytest


def tiny_config() -> dict:
    """Source-side config.json contents for a 2-layer toy GPT-2."""
    return {
        "model_type": "gpt2",
        "n_layer": 2,
        "n_head": 2,
        "n_embd": 16,
        "n_positions": 32,
        "vocab_size": 50,
        "n_inner": None,
        "activation_function": "gelu_new",
        "layer_norm_epsilon": 1e-5,
    }


def tiny_state(seed: int = 3, prefix: str = "transformer.", tie_head: bool = True) -> dict:
    """Synthetic GPT-2 state dict (numpy) matching tiny_config shapes."""
    rng = np.random.default_rng(seed)
    d, ff, vocab, pos = 16, 64, 50, 32

    def t(*shape):
        return rng.standard_normal(shape).astype(np.float32)

    state = {
        prefix + "wte.weight": t(vocab, d),
        prefix + "wpe.weight": t(pos, d),
        prefix + "ln_f.weight": t(d),
        prefix + "ln_f.bias": t(d),
    }
    for i in range(2):
        p = f"{prefix}h.{i}."
        state[p + "ln_1.weight"] = t(d)
        state[p + "ln_1.bias"] = t(d)
        state[p + "attn.c_attn.weight"] = t(d, 3 * d)
        state[p + "attn.c_attn.bias"] = t(3 * d)
        state[p + "attn.c_proj.weight"] = t(d, d)
        state[p + "attn.c_proj.bias"] = t(d)
        state[p + "ln_2.weight"] = t(d)
        state[p + "ln_2.bias"] = t(d)
        state[p + "mlp.c_fc.weight"] = t(d, ff)
        state[p + "mlp.c_fc.bias"] = t(ff)
        state[p + "mlp.c_proj.weight"] = t(ff, d)
        state[p + "mlp.c_proj.bias"] = t(d)
    if not tie_head:
        state["lm_head.weight"] = t(vocab, d)
    return state


@pytest.fixture(scope="session")
def tiny_hub_dir(tmp_path_factory):
    """A real save_pretrained directory for a seeded 2-layer GPT-2."""
    torch = pytest.importorskip("torch")
    transformers = pytest.importorskip("transformers")

    torch.manual_seed(7)
    config = transformers.GPT2Config(
        vocab_size=50,
        n_positions=32,
        n_embd=16,
        n_layer=2,
        n_head=2,
        activation_function="gelu_new",
        attn_pdrop=0.0,
        embd_pdrop=0.0,
        resid_pdrop=0.0,
        bos_token_id=0,
        eos_token_id=0,
    )
    model = transformers.GPT2LMHeadModel(config).eval()
    out = tmp_path_factory.mktemp("tiny_hub")
    model.save_pretrained(out)
    return out, model


def pytest_terminal_summary(terminalreporter):
    """Print the converter acceptance verdicts where capture cannot swallow them."""
    module = sys.modules.get("test_fidelity")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("converter acceptance")
    for name, passed in verdicts:
        terminalreporter.write_line(f"[acceptance] {name}: {'PASS' if passed else 'FAIL'}")


def write_source_dir(path, config: dict | None = None, state: dict | None = None) -> None:
    """Materialize a config.json + model.safetensors source directory."""
    from safetensors.numpy import save_file

    path.mkdir(parents=True, exist_ok=True)
    with open(path / "config.json", "w", encoding="utf-8") as fh:
        json.dump(config if config is not None else tiny_config(), fh)
    save_file(state if state is not None else tiny_state(), str(path / "model.safetensors"))
