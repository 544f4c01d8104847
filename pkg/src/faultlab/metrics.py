"""Composable evaluation metrics: accuracy, log-scale perplexity, latency.

All metrics consume the same batch sequence in the same order, so composing
them never changes individual values.  Accuracy and perplexity are pure
functions of (model, batches); latency measures wall-clock seconds of the
full forward sweep after one untimed warmup run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .data import Batch
from .errors import EmptyDatasetError, FaultlabError, MetricError
from .model import TransformerModel

__all__ = [
    "MetricResult",
    "Metric",
    "AccuracyMetric",
    "PerplexityMetric",
    "LatencyMetric",
    "evaluate_all",
    "make_metrics",
    "METRIC_NAMES",
]


@dataclass
class MetricResult:
    name: str
    value: float
    sample_count: int
    aux: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "sample_count": self.sample_count,
            "aux": self.aux,
        }


class Metric:
    """One evaluation procedure; subclasses define `name` and `evaluate`."""

    name = "metric"

    def evaluate(self, model: TransformerModel, batches: list[Batch]) -> MetricResult:
        raise NotImplementedError


class AccuracyMetric(Metric):
    """Fraction of examples whose argmax class logit matches the label.

    Argmax ties resolve to the lowest class index.
    """

    name = "accuracy"

    def evaluate(self, model: TransformerModel, batches: list[Batch]) -> MetricResult:
        if model.config.arch != "classifier":
            raise MetricError(f"accuracy requires arch=classifier, model is {model.config.arch}")
        n_classes = model.config.n_classes
        total = correct = 0
        for b in batches:
            if b.labels is None:
                raise MetricError("accuracy requires labeled classification batches")
            for label in b.labels:
                if not 0 <= label < n_classes:
                    raise MetricError(f"label {label} out of range for n_classes {n_classes}")
            logits = model.forward_classify(b.token_ids, b.marks)
            for r, label in enumerate(b.labels):
                row = logits.data[r * n_classes : (r + 1) * n_classes]
                best, best_v = 0, row[0]
                for j in range(1, n_classes):
                    if row[j] > best_v:
                        best, best_v = j, row[j]
                correct += best == label
                total += 1
        if total == 0:
            raise EmptyDatasetError("accuracy evaluated on an empty dataset")
        return MetricResult(
            name=self.name,
            value=correct / total,
            sample_count=total,
            aux={"correct": correct},
        )


class PerplexityMetric(Metric):
    """Mean per-token negative log-likelihood (log-scale perplexity).

    value = mean NLL when log_scale (the default), else exp(mean NLL).
    Sequences shorter than 2 tokens are skipped with a counted warning.
    Non-finite logits make the value NaN with an aux reason instead of
    being silently dropped.
    """

    name = "perplexity"

    def __init__(self, log_scale: bool = True):
        self.log_scale = log_scale

    def evaluate(self, model: TransformerModel, batches: list[Batch]) -> MetricResult:
        if model.config.arch != "causal_lm":
            raise MetricError(f"perplexity requires arch=causal_lm, model is {model.config.arch}")
        vocab = model.config.vocab_size
        nll_sum = 0.0
        tokens = 0
        skipped = 0
        nonfinite = 0
        sequences = 0
        for b in batches:
            logits = model.forward_logits(b.token_ids, b.marks)
            seq_width = len(b.token_ids[0])
            for r, length in enumerate(b.lengths):
                if length < 2:
                    skipped += 1
                    continue
                sequences += 1
                for t in range(1, length):
                    base = (r * seq_width + t - 1) * vocab
                    row = logits.data[base : base + vocab]
                    m = row[0]
                    for v in row:
                        if v > m:
                            m = v
                    if not math.isfinite(m):
                        nonfinite += 1
                        continue
                    acc = 0.0
                    for v in row:
                        acc += math.exp(v - m)
                    nll = (m + math.log(acc)) - row[b.token_ids[r][t]]
                    if not math.isfinite(nll):
                        nonfinite += 1
                        continue
                    nll_sum += nll
                    tokens += 1
        if sequences == 0:
            raise EmptyDatasetError("perplexity evaluated on an empty dataset")
        aux = {"token_count": tokens, "skipped_short": skipped, "log_scale": self.log_scale}
        if nonfinite:
            aux["nan_reason"] = f"{nonfinite} token positions produced non-finite log-probabilities"
            value = float("nan")
        else:
            mean_nll = nll_sum / tokens
            value = mean_nll if self.log_scale else math.exp(mean_nll)
        return MetricResult(name=self.name, value=value, sample_count=sequences, aux=aux)


class LatencyMetric(Metric):
    """Mean wall-clock seconds of the full forward sweep over `num_runs`
    timed repetitions after one untimed warmup."""

    name = "latency"

    def __init__(self, num_runs: int = 3):
        if num_runs < 1:
            raise MetricError(f"num_runs must be >= 1, got {num_runs}")
        self.num_runs = num_runs

    def _sweep(self, model: TransformerModel, batches: list[Batch]) -> None:
        forward = (
            model.forward_classify if model.config.arch == "classifier" else model.forward_logits
        )
        for b in batches:
            forward(b.token_ids, b.marks)

    def evaluate(self, model: TransformerModel, batches: list[Batch]) -> MetricResult:
        self._sweep(model, batches)  # warmup, untimed
        runs = []
        for _ in range(self.num_runs):
            start = time.perf_counter()
            self._sweep(model, batches)
            runs.append(time.perf_counter() - start)
        return MetricResult(
            name=self.name,
            value=sum(runs) / len(runs),
            sample_count=sum(len(b) for b in batches),
            aux={"runs": runs, "num_runs": self.num_runs},
        )


def evaluate_all(
    model: TransformerModel, metrics: list[Metric], batches: list[Batch]
) -> list[MetricResult]:
    """Evaluate each metric over the identical batch sequence, in order."""
    results = []
    for metric in metrics:
        try:
            results.append(metric.evaluate(model, batches))
        except FaultlabError as exc:
            raise MetricError(f"{metric.name}: {exc}") from exc
    return results


METRIC_NAMES = ("accuracy", "perplexity", "latency")


def make_metrics(names: list[str]) -> list[Metric]:
    """Instantiate metrics by name ('accuracy', 'perplexity', 'latency')."""
    out: list[Metric] = []
    for name in names:
        if name == "accuracy":
            out.append(AccuracyMetric())
        elif name == "perplexity":
            out.append(PerplexityMetric(log_scale=True))
        elif name == "latency":
            out.append(LatencyMetric())
        else:
            raise MetricError(f"unknown metric {name!r}; known: {', '.join(METRIC_NAMES)}")
    return out
