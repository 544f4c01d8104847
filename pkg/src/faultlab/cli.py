"""Command-line interface.

Subcommands: ``run`` (fault sweep over a checkpoint + dataset), ``baseline``
(clean metrics only), ``report`` (render or compare persisted results),
``list-faults`` (fault grammar reference), ``make-toy`` (generate a toy
checkpoint and dataset).

Exit codes: 0 success; 2 usage errors (bad flags, unparsable fault specs,
mismatched task); 3 data errors (unreadable checkpoints or datasets);
4 runtime errors (failed experiment or metric).
"""

from __future__ import annotations

import argparse
import os
import sys

from ._version import __version__
from .data import Tokenizer, load_classification, load_lm_lines
from .errors import (
    CheckpointError,
    DataError,
    FaultlabError,
    InvalidSpecError,
    ReportError,
    SequenceTooLongError,
    SpecParseError,
    StructureError,
    TargetingError,
    VocabRangeError,
)
from .injector import FaultInjector
from .metrics import METRIC_NAMES, evaluate_all, make_metrics
from .model import TransformerModel
from .report import (
    compare,
    comparison_markdown,
    load_result,
    markdown_summary,
    plot_csv,
)
from .runner import ExperimentConfig, persist, run, with_layer
from .spec_grammar import GRAMMAR_HELP, parse_fault_spec
from .toys import make_toy_files

__all__ = ["main", "build_parser"]


class _UsageError(Exception):
    pass


def _parse_seeds(text: str) -> tuple[int, int]:
    try:
        start_text, count_text = text.split(":", 1)
        start, count = int(start_text), int(count_text)
    except ValueError:
        raise _UsageError(f"--seeds wants START:COUNT, got {text!r}") from None
    if count < 1:
        raise _UsageError(f"--seeds count must be >= 1, got {count}")
    return start, count


def _parse_layers(text: str, n_layers: int) -> list[int]:
    """Comma-separated indices and inclusive lo-hi ranges, or 'all'."""
    if text.strip() == "all":
        return list(range(n_layers))
    indices: list[int] = []
    for part in text.split(","):
        part = part.strip()
        try:
            if "-" in part.lstrip("-"):
                lo_text, hi_text = part.rsplit("-", 1)
                lo, hi = int(lo_text), int(hi_text)
                if hi < lo:
                    raise _UsageError(f"--layers range {part!r} is reversed")
                indices.extend(range(lo, hi + 1))
            else:
                indices.append(int(part))
        except ValueError:
            raise _UsageError(f"--layers entry {part!r} is not an index or lo-hi range") from None
    if not indices:
        raise _UsageError("--layers selected no layers")
    for i in indices:
        if not 0 <= i < n_layers:
            raise _UsageError(f"--layers index {i} out of range for {n_layers} layers")
    return indices


def _parse_metrics(text: str | None, task: str) -> list[str]:
    if text is None:
        return ["accuracy"] if task == "classify" else ["perplexity"]
    names = [part.strip() for part in text.split(",") if part.strip()]
    if not names:
        raise _UsageError("--metrics selected no metrics")
    for name in names:
        if name not in METRIC_NAMES:
            raise _UsageError(
                f"unknown metric {name!r} (choose from {', '.join(METRIC_NAMES)})"
            )
    return names


def _load_model(path: str, task: str) -> TransformerModel:
    model = TransformerModel.from_checkpoint(path)
    wanted = "classifier" if task == "classify" else "causal_lm"
    if model.config.arch != wanted:
        raise _UsageError(
            f"--task {task} needs a {wanted} checkpoint, but {path} holds a "
            f"{model.config.arch}"
        )
    return model


def _make_tokenizer(args) -> Tokenizer:
    if getattr(args, "bpe_vocab", None) or getattr(args, "bpe_merges", None):
        if not (args.bpe_vocab and args.bpe_merges):
            raise _UsageError("--bpe-vocab and --bpe-merges must be given together")
        return Tokenizer.bpe_from_files(args.bpe_vocab, args.bpe_merges)
    return Tokenizer.byte_level()


def _load_dataset(args, model: TransformerModel, tokenizer: Tokenizer):
    if args.task == "classify":
        return load_classification(args.dataset)
    dataset = load_lm_lines(
        args.dataset,
        tokenizer,
        max_tokens=model.config.max_seq_len,
        max_lines=10**9,
    )
    if dataset.skipped:
        print(f"warning: skipped {dataset.skipped} unusable line(s)", file=sys.stderr)
    return dataset


def _out_root(args) -> str:
    if args.out:
        return args.out
    return os.environ.get("FAULTLAB_OUT", "results")


def _cmd_run(args) -> int:
    model = _load_model(args.model, args.task)
    tokenizer = _make_tokenizer(args)
    dataset = _load_dataset(args, model, tokenizer)
    metric_names = _parse_metrics(args.metrics, args.task)
    seed_start, seed_count = _parse_seeds(args.seeds)

    if not args.fault:
        raise _UsageError("run needs at least one --fault (see `faultlab list-faults`)")
    specs = [parse_fault_spec(text) for text in args.fault]
    if args.layers is not None:
        if len(specs) != 1:
            raise _UsageError("--layers sweeps exactly one --fault template")
        indices = _parse_layers(args.layers, model.config.n_layers)
        specs = [with_layer(specs[0], i) for i in indices]

    config = ExperimentConfig(
        faults=tuple(specs),
        metrics=tuple(metric_names),
        dataset=args.dataset,
        task=args.task,
        batch_size=args.batch_size,
        num_samples=args.num_samples,
        seed_start=seed_start,
        seed_count=seed_count,
        workers=args.workers,
        output_root=_out_root(args),
    )
    injector = FaultInjector(model)
    tok = tokenizer if args.task == "classify" else None
    result = run(config, model, injector, dataset, tokenizer=tok)
    path = persist(result, _out_root(args))

    for name in sorted(result.baseline):
        entry = result.baseline[name]
        print(f"baseline {name}: {entry.value:.6g} (n={entry.sample_count})")
    for row in result.fault_rows:
        for name in config.metrics:
            stats = row["summary"].get(name)
            if stats is None:
                print(f"{row['fault']} {name}: all trials failed")
                continue
            marker = " *" if stats["significant"] else ""
            print(
                f"{row['fault']} {name}: mean={stats['mean']:.6g} "
                f"ci=[{stats['ci95_low']:.6g}, {stats['ci95_high']:.6g}] "
                f"n={stats['n']}{marker}"
            )
    print(path)
    return 0


def _cmd_baseline(args) -> int:
    model = _load_model(args.model, args.task)
    tokenizer = _make_tokenizer(args)
    dataset = _load_dataset(args, model, tokenizer)
    metric_names = _parse_metrics(args.metrics, args.task)

    from .data import batch as make_batches
    from .data import subset as take_subset

    ds = dataset
    if args.num_samples is not None:
        seed_start, _ = _parse_seeds(args.seeds)
        ds = take_subset(dataset, args.num_samples, seed=seed_start)
    batches = make_batches(ds, args.batch_size, tokenizer if args.task == "classify" else None)
    for result in evaluate_all(model, make_metrics(metric_names), batches):
        print(f"{result.name}: {result.value:.6g} (n={result.sample_count})")
    return 0


def _cmd_report(args) -> int:
    result = load_result(args.result_dir)
    if args.compare is not None:
        other = load_result(args.compare)
        print(comparison_markdown(compare(result, other)), end="")
        return 0
    if args.plot_csv is not None:
        print(plot_csv(result, args.plot_csv), end="")
        return 0
    print(markdown_summary(result))
    return 0


def _cmd_list_faults(_args) -> int:
    print(GRAMMAR_HELP)
    return 0


def _cmd_make_toy(args) -> int:
    paths = make_toy_files(args.out, args.task, seed=args.seed)
    print(paths["checkpoint"])
    print(paths["dataset"])
    return 0


def _add_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--dataset", required=True, help="dataset file (JSONL/CSV or text lines)")
    p.add_argument("--task", required=True, choices=("classify", "lm"))
    p.add_argument("--metrics", default=None, help="comma-separated metric names")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--num-samples", type=int, default=None,
                   help="evaluate a seeded random subset of this size")
    p.add_argument("--seeds", default="42:30", help="trial seed range START:COUNT")
    p.add_argument("--bpe-vocab", default=None, help="BPE vocab file (token<TAB>id lines)")
    p.add_argument("--bpe-merges", default=None, help="BPE merges file (pair per line)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultlab",
        description="Inject reversible faults into transformer checkpoints "
        "and measure the damage.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a fault-injection experiment")
    _add_eval_flags(p_run)
    p_run.add_argument("--fault", action="append", default=[],
                       help="fault spec, repeatable (see `faultlab list-faults`)")
    p_run.add_argument("--layers", default=None,
                       help="sweep one --fault over these layers: 'all', '0-5', '0,2,4'")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--out", default=None,
                       help="output root (default: $FAULTLAB_OUT or ./results)")
    p_run.set_defaults(func=_cmd_run)

    p_base = sub.add_parser("baseline", help="evaluate clean metrics only")
    _add_eval_flags(p_base)
    p_base.set_defaults(func=_cmd_baseline)

    p_rep = sub.add_parser("report", help="render a persisted result directory")
    p_rep.add_argument("result_dir")
    p_rep.add_argument("--plot-csv", default=None, metavar="METRIC",
                       help="emit layer,mean,ci95_low,ci95_high,baseline rows")
    p_rep.add_argument("--compare", default=None, metavar="DIR",
                       help="compare against a second result directory")
    p_rep.set_defaults(func=_cmd_report)

    p_list = sub.add_parser("list-faults", help="show the fault grammar")
    p_list.set_defaults(func=_cmd_list_faults)

    p_toy = sub.add_parser("make-toy", help="write a toy checkpoint + dataset")
    p_toy.add_argument("--task", required=True, choices=("classify", "lm"))
    p_toy.add_argument("--out", required=True, help="output directory")
    p_toy.add_argument("--seed", type=int, default=7)
    p_toy.set_defaults(func=_cmd_make_toy)
    return parser


_USAGE_ERRORS = (_UsageError, SpecParseError, InvalidSpecError, TargetingError)
_DATA_ERRORS = (
    CheckpointError,
    DataError,
    StructureError,
    VocabRangeError,
    SequenceTooLongError,
    ReportError,
    OSError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FaultlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
