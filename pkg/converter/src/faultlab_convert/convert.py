"""Source resolution, weight loading, and conversion orchestration."""

from __future__ import annotations

import json
import os
import pathlib
import re
from dataclasses import dataclass, field

import numpy as np

from .container import write_checkpoint
from .errors import ConvertError
from .gpt2 import map_config, plan_tensors
from .tokenizer_files import export_tokenizer_files

_HUB_ID = re.compile(r"^[\w.\-]+(/[\w.\-]+)?$")


def _cache_roots() -> list[pathlib.Path]:
    roots = []
    if os.environ.get("HUGGINGFACE_HUB_CACHE"):
        roots.append(pathlib.Path(os.environ["HUGGINGFACE_HUB_CACHE"]))
    if os.environ.get("HF_HOME"):
        roots.append(pathlib.Path(os.environ["HF_HOME"]) / "hub")
    roots.append(pathlib.Path.home() / ".cache" / "huggingface" / "hub")
    return roots


def resolve_source(src: str) -> pathlib.Path:
    """Resolve a local directory or a hub id cached by `hf download`."""
    path = pathlib.Path(src)
    if path.is_dir():
        return path
    if _HUB_ID.match(src):
        repo_dir = "models--" + src.replace("/", "--")
        candidates = []
        for root in _cache_roots():
            snapshots = root / repo_dir / "snapshots"
            if snapshots.is_dir():
                for snap in snapshots.iterdir():
                    if (snap / "config.json").is_file():
                        candidates.append(snap)
        if candidates:
            return max(candidates, key=lambda p: p.stat().st_mtime)
    raise ConvertError(
        f"{src!r} is neither a local directory nor a cached hub model;"
        f" fetch it first, e.g.: hf download {src} --local-dir ./{src.split('/')[-1]}"
    )


def _from_torch(tensor) -> np.ndarray:
    import torch

    if tensor.dtype == torch.float32:
        return tensor.detach().cpu().numpy()
    return tensor.detach().to(torch.float32).cpu().numpy()


def _load_safetensors_file(path: pathlib.Path) -> dict[str, np.ndarray]:
    try:
        from safetensors.numpy import load_file

        return load_file(str(path))
    except TypeError:
        # numpy cannot represent bfloat16; reread through torch and upcast
        from safetensors.torch import load_file as load_torch

        return {name: _from_torch(t) for name, t in load_torch(str(path)).items()}


def _load_torch_bin(path: pathlib.Path) -> dict[str, np.ndarray]:
    try:
        import torch
    except ImportError:
        raise ConvertError(
            f"{path.name} is a torch pickle; install torch (or re-save the model"
            " as safetensors) to load it"
        ) from None
    state = torch.load(str(path), map_location="cpu", weights_only=True)
    return {name: _from_torch(t) for name, t in state.items()}


def _load_sharded(index_path: pathlib.Path, loader) -> dict[str, np.ndarray]:
    with open(index_path, encoding="utf-8") as fh:
        index = json.load(fh)
    weight_map = index.get("weight_map")
    if not isinstance(weight_map, dict):
        raise ConvertError(f"{index_path}: missing 'weight_map'")
    state: dict[str, np.ndarray] = {}
    for shard_name in sorted(set(weight_map.values())):
        shard = loader(index_path.parent / shard_name)
        overlap = set(shard) & set(state)
        if overlap:
            raise ConvertError(f"tensors repeated across shards: {', '.join(sorted(overlap))}")
        state.update(shard)
    return state


def load_state_dict(src_dir: pathlib.Path) -> dict[str, np.ndarray]:
    """Read the model weights as float32 numpy arrays."""
    candidates = (
        ("model.safetensors", _load_safetensors_file),
        ("model.safetensors.index.json", lambda p: _load_sharded(p, _load_safetensors_file)),
        ("pytorch_model.bin", _load_torch_bin),
        ("pytorch_model.bin.index.json", lambda p: _load_sharded(p, _load_torch_bin)),
    )
    for name, loader in candidates:
        path = src_dir / name
        if path.is_file():
            return loader(path)
    raise ConvertError(
        f"no weight file in {src_dir}: looked for " + ", ".join(n for n, _ in candidates)
    )


@dataclass
class ConversionSummary:
    checkpoint: str
    config: dict
    tensor_count: int
    parameter_count: int
    vocab: str | None = None
    merges: str | None = None
    notes: list[str] = field(default_factory=list)

    def describe(self) -> list[str]:
        cfg = self.config
        lines = [
            f"wrote {self.checkpoint}",
            f"  arch={cfg['arch']} layers={cfg['n_layers']} d_model={cfg['d_model']}"
            f" heads={cfg['n_heads']} d_ff={cfg['d_ff']} vocab={cfg['vocab_size']}"
            f" max_seq_len={cfg['max_seq_len']}",
            f"  {self.tensor_count} tensors, {self.parameter_count:,} parameters",
        ]
        if self.vocab:
            lines.append(f"wrote {self.vocab}")
        if self.merges:
            lines.append(f"wrote {self.merges}")
        lines.extend(f"note: {n}" for n in self.notes)
        return lines


def convert(
    src: str,
    out_dir: str,
    model_name: str = "model",
    tokenizer: bool = True,
) -> ConversionSummary:
    """Convert one GPT-2-family checkpoint; returns what was written."""
    src_path = resolve_source(src)
    config_path = src_path / "config.json"
    if not config_path.is_file():
        raise ConvertError(f"no config.json in {src_path}")
    with open(config_path, encoding="utf-8") as fh:
        try:
            source_config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConvertError(f"{config_path}: invalid JSON: {exc}") from None

    config = map_config(source_config)
    state = load_state_dict(src_path)
    tensors, notes = plan_tensors(state, config)

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / f"{model_name}.ckpt"
    write_checkpoint(tensors, config, str(checkpoint))

    summary = ConversionSummary(
        checkpoint=str(checkpoint),
        config=config,
        tensor_count=len(tensors),
        parameter_count=sum(int(np.prod(t.shape)) for t in tensors.values()),
        notes=notes,
    )
    if tokenizer:
        exported = export_tokenizer_files(str(src_path), str(out))
        if exported is None:
            summary.notes.append("no tokenizer files in the source; vocab/merges not written")
        else:
            summary.vocab, summary.merges = exported
    return summary
