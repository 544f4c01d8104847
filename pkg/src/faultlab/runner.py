"""Seed-swept experiment coordination: inject, evaluate, revert, summarize,
persist.

Protocol for ``run``: evaluate the clean baseline once per metric, then for
every fault spec and every seed in the range derive a trial RNG from
(seed, canonical fault string), inject, evaluate all metrics, revert, and
prove the model clean again.  Per-fault summary statistics compare against
the baseline; results persist to a timestamped directory.

Reproducibility contract: every numeric cell is a pure function of
(config, model, dataset), so rerunning an identical config reproduces
results.json byte-identically except the volatile fields grouped under
``run_info`` (timestamp and wall-clock seconds).

Trial RNG streams are keyed by the fault's canonical string, so adding or
removing a fault from the list never shifts another fault's stream.  The
random subset of the dataset is keyed by the seed-range start.  Parallel
workers each own a full model clone, and cells land in a preallocated grid,
so results are identical for any worker count; the latency metric forces
sequential execution for timing stability.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ._version import __version__ as _tool_version
from .data import batch as make_batches
from .data import subset as take_subset
from .errors import (
    FaultlabError,
    RunnerError,
    RunnerIntegrityError,
)
from .faults import BitFlip, WeightCorruption
from .injector import FaultInjector
from .metrics import MetricResult, evaluate_all, make_metrics
from .model import TransformerModel
from .rng import SeededRng

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "SummaryStats",
    "compute_summary",
    "run",
    "sweep_layers",
    "with_layer",
    "persist",
    "summary_csv",
    "SUMMARY_CSV_COLUMNS",
]

SUMMARY_CSV_COLUMNS = (
    "fault",
    "layer",
    "metric",
    "mean",
    "std",
    "ci95_low",
    "ci95_high",
    "n",
    "baseline",
    "significant",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment protocol: faults x seeds x metrics over one dataset."""

    faults: tuple
    metrics: tuple[str, ...]
    dataset: str
    task: str
    batch_size: int = 16
    num_samples: int | None = None
    seed_start: int = 42
    seed_count: int = 30
    workers: int = 1
    ci_multiplier: float = 1.96
    output_root: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "faults", tuple(self.faults))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.seed_count < 1:
            raise RunnerError(f"seed_count must be >= 1, got {self.seed_count}")
        if self.batch_size < 1:
            raise RunnerError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.num_samples is not None and self.num_samples < 1:
            raise RunnerError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.workers < 1:
            raise RunnerError(f"workers must be >= 1, got {self.workers}")
        if not self.metrics:
            raise RunnerError("at least one metric is required")
        if self.task not in ("classify", "lm"):
            raise RunnerError(f"task must be 'classify' or 'lm', got {self.task!r}")

    def seeds(self) -> range:
        return range(self.seed_start, self.seed_start + self.seed_count)

    def to_dict(self) -> dict:
        return {
            "faults": [spec.canonical() for spec in self.faults],
            "metrics": list(self.metrics),
            "dataset": self.dataset,
            "task": self.task,
            "batch_size": self.batch_size,
            "num_samples": self.num_samples,
            "seeds": {"start": self.seed_start, "count": self.seed_count},
            "workers": self.workers,
            "ci_multiplier": self.ci_multiplier,
            "output_root": self.output_root,
        }

    def digest(self) -> str:
        raw = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:8]


@dataclass
class SummaryStats:
    """Mean / sample std / normal-approximation CI of one fault x metric row."""

    mean: float
    std: float
    ci95_low: float
    ci95_high: float
    n: int
    baseline: float
    significant: bool

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "ci95_low": self.ci95_low,
            "ci95_high": self.ci95_high,
            "n": self.n,
            "baseline": self.baseline,
            "significant": self.significant,
        }


def compute_summary(values: list[float], baseline: float, multiplier: float = 1.96) -> SummaryStats:
    """mean, sample std (n-1 denominator, 0 when n=1), CI = mean ± m·std/√n,
    significant = baseline strictly outside [low, high]."""
    n = len(values)
    if n < 1:
        raise RunnerError("summary statistics need at least one value")
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    half = multiplier * std / math.sqrt(n)
    low, high = mean - half, mean + half
    return SummaryStats(
        mean=mean,
        std=std,
        ci95_low=low,
        ci95_high=high,
        n=n,
        baseline=baseline,
        significant=bool(baseline < low or baseline > high),
    )


@dataclass
class ExperimentResult:
    """Baseline, per-(fault, seed) cells, per-fault summaries, and metadata."""

    config: ExperimentConfig
    baseline: dict[str, MetricResult]
    fault_rows: list[dict]
    tool_version: str = _tool_version
    timestamp_utc: str = ""
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "tool_version": self.tool_version,
            "config": self.config.to_dict(),
            "baseline": {name: r.to_dict() for name, r in self.baseline.items()},
            "faults": self.fault_rows,
            "run_info": {
                "timestamp_utc": self.timestamp_utc,
                "wall_clock_seconds": self.wall_clock_seconds,
            },
        }


def _layer_field(spec) -> object:
    layer = spec.layer
    return layer if layer == "all" else int(layer)


def _run_one_trial(spec, seed: int, model, injector, metrics, batches) -> dict:
    """One (fault, seed) cell; the model is verified clean afterwards."""
    rng = SeededRng(seed).child(spec.canonical())
    try:
        injector.inject(spec, rng)
        try:
            results = evaluate_all(model, metrics, batches)
        finally:
            injector.revert_all()
        if not injector.verify_clean():
            raise RunnerIntegrityError(
                f"model not clean after reverting {spec.canonical()} at seed {seed}"
            )
        return {"seed": seed, "metrics": {r.name: r.to_dict() for r in results}}
    except RunnerIntegrityError:
        raise
    except FaultlabError as exc:
        injector.revert_all()
        if not injector.verify_clean():
            raise RunnerIntegrityError(
                f"model not clean after failed trial {spec.canonical()} at seed {seed}"
            ) from exc
        return {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}


def run(
    config: ExperimentConfig,
    model: TransformerModel,
    injector: FaultInjector,
    dataset,
    tokenizer=None,
) -> ExperimentResult:
    """Execute the full protocol and return the in-memory result."""
    if injector.verify_clean() is not True:
        raise RunnerError("injector reports a dirty model at run start")
    started = time.perf_counter()
    timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    metrics = make_metrics(list(config.metrics))
    ds = dataset
    if config.num_samples is not None:
        ds = take_subset(dataset, config.num_samples, seed=config.seed_start)
    batches = make_batches(ds, config.batch_size, tokenizer)

    baseline_results = evaluate_all(model, metrics, batches)
    baseline = {r.name: r for r in baseline_results}

    seeds = list(config.seeds())
    grid: list[list[dict | None]] = [[None] * len(seeds) for _ in config.faults]
    use_workers = config.workers > 1 and "latency" not in config.metrics

    if not use_workers:
        for fi, spec in enumerate(config.faults):
            for si, seed in enumerate(seeds):
                grid[fi][si] = _run_one_trial(spec, seed, model, injector, metrics, batches)
    else:
        tasks = [(fi, si) for fi in range(len(config.faults)) for si in range(len(seeds))]
        chunks = [tasks[w :: config.workers] for w in range(config.workers)]
        errors: list[BaseException] = []
        lock = threading.Lock()

        def work(chunk):
            try:
                local_model = model.clone()
                local_injector = FaultInjector(local_model)
                local_metrics = make_metrics(list(config.metrics))
                for fi, si in chunk:
                    cell = _run_one_trial(
                        config.faults[fi], seeds[si], local_model, local_injector,
                        local_metrics, batches,
                    )
                    grid[fi][si] = cell
            except BaseException as exc:  # propagate to the main thread
                with lock:
                    errors.append(exc)

        threads = [threading.Thread(target=work, args=(c,)) for c in chunks if c]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if errors:
            raise errors[0]

    fault_rows = []
    for fi, spec in enumerate(config.faults):
        trials = grid[fi]
        summary: dict[str, dict] = {}
        for name in config.metrics:
            values = [
                cell["metrics"][name]["value"]
                for cell in trials
                if cell is not None and "metrics" in cell
            ]
            if values:
                summary[name] = compute_summary(
                    values, baseline[name].value, config.ci_multiplier
                ).to_dict()
        fault_rows.append(
            {
                "fault": spec.canonical(),
                "layer": _layer_field(spec),
                "trials": trials,
                "summary": summary,
            }
        )

    # Isolation check: the clean model must still produce the exact baseline
    # (latency is timing, not a model property, so it is not re-compared).
    recheck_metrics = [m for m in metrics if m.name != "latency"]
    if recheck_metrics:
        for r in evaluate_all(model, recheck_metrics, batches):
            if r.value != baseline[r.name].value or r.sample_count != baseline[r.name].sample_count:
                raise RunnerIntegrityError(
                    f"baseline {r.name} changed over the run: "
                    f"{baseline[r.name].value!r} -> {r.value!r}"
                )

    return ExperimentResult(
        config=config,
        baseline=baseline,
        fault_rows=fault_rows,
        timestamp_utc=timestamp,
        wall_clock_seconds=time.perf_counter() - started,
    )


def with_layer(template, index: int):
    """Copy of a fault spec retargeted at one layer index."""
    if isinstance(template, (BitFlip, WeightCorruption)):
        return dataclasses.replace(template, layer_scope=index)
    return dataclasses.replace(template, layer_idx=index)


def sweep_layers(
    config: ExperimentConfig,
    template,
    layer_indices,
    model: TransformerModel,
    injector: FaultInjector,
    dataset,
    tokenizer=None,
) -> ExperimentResult:
    """Expand a fault template into one spec per layer index, then run."""
    specs = tuple(with_layer(template, i) for i in layer_indices)
    swept = dataclasses.replace(config, faults=specs)
    return run(swept, model, injector, dataset, tokenizer)


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_csv(result: ExperimentResult) -> str:
    """CSV with one row per fault x metric (columns fixed by SUMMARY_CSV_COLUMNS)."""
    lines = [",".join(SUMMARY_CSV_COLUMNS)]
    for row in result.fault_rows:
        for name in result.config.metrics:
            stats = row["summary"].get(name)
            if stats is None:
                continue
            lines.append(
                ",".join(
                    [
                        f'"{row["fault"]}"',
                        str(row["layer"]),
                        name,
                        _csv_cell(stats["mean"]),
                        _csv_cell(stats["std"]),
                        _csv_cell(stats["ci95_low"]),
                        _csv_cell(stats["ci95_high"]),
                        str(stats["n"]),
                        _csv_cell(stats["baseline"]),
                        _csv_cell(stats["significant"]),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def persist(result: ExperimentResult, output_root: str) -> str:
    """Write results.json, config.json, summary.csv under
    ``<root>/<YYYYMMDD-HHMMSSZ>-<8-hex config digest>/``; returns the path."""
    os.makedirs(output_root, exist_ok=True)
    compact_ts = (
        result.timestamp_utc.replace("-", "").replace(":", "").replace("T", "-")
    )
    base = f"{compact_ts}-{result.config.digest()}"
    path = os.path.join(output_root, base)
    suffix = 0
    while True:
        try:
            os.mkdir(path)
            break
        except FileExistsError:
            suffix += 1
            if suffix > 99:
                raise RunnerError(f"too many result directories named {base}") from None
            path = os.path.join(output_root, f"{base}-{suffix:02d}")
    with open(os.path.join(path, "results.json"), "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(path, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(result.config.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(path, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(summary_csv(result))
    return path
