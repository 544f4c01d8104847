"""Render persisted experiment results: plotting CSVs, Markdown summaries,
and run-to-run comparison."""

from __future__ import annotations

import json
import os

from .errors import ReportError

__all__ = [
    "load_result",
    "plot_csv",
    "markdown_summary",
    "compare",
    "comparison_markdown",
]

PLOT_CSV_COLUMNS = ("layer", "mean", "ci95_low", "ci95_high", "baseline")


def load_result(path: str) -> dict:
    """Load results.json from a result directory (or a direct file path)."""
    candidate = path
    if os.path.isdir(path):
        candidate = os.path.join(path, "results.json")
    if not os.path.isfile(candidate):
        raise ReportError(f"no results.json at {path}")
    try:
        with open(candidate, "r", encoding="utf-8") as fh:
            result = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ReportError(f"cannot parse {candidate}: {exc}") from exc
    for key in ("config", "baseline", "faults"):
        if key not in result:
            raise ReportError(f"{candidate} is missing the {key!r} section")
    return result


def _num(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def plot_csv(result: dict, metric: str) -> str:
    """Layer-sweep CSV for one metric: layer,mean,ci95_low,ci95_high,baseline."""
    if metric not in result["baseline"]:
        have = ", ".join(sorted(result["baseline"])) or "none"
        raise ReportError(f"metric {metric!r} not in result (have: {have})")
    lines = [",".join(PLOT_CSV_COLUMNS)]
    for row in result["faults"]:
        stats = row.get("summary", {}).get(metric)
        if stats is None:
            continue
        lines.append(
            ",".join(
                [
                    str(row["layer"]),
                    _num(stats["mean"]),
                    _num(stats["ci95_low"]),
                    _num(stats["ci95_high"]),
                    _num(stats["baseline"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def markdown_summary(result: dict) -> str:
    """Markdown report: config echo, baseline values, one table per metric.

    Rows whose confidence interval excludes the baseline are marked with
    a trailing ``*`` on the mean.
    """
    config = result["config"]
    out = ["# Fault injection summary", ""]
    out.append(f"- dataset: `{config.get('dataset', '?')}`")
    out.append(f"- task: `{config.get('task', '?')}`")
    seeds = config.get("seeds", {})
    out.append(
        f"- seeds: start={seeds.get('start', '?')} count={seeds.get('count', '?')}"
    )
    out.append(f"- samples: {config.get('num_samples')}")
    out.append(f"- batch size: {config.get('batch_size', '?')}")
    out.append("")
    out.append("## Baseline")
    out.append("")
    for name in sorted(result["baseline"]):
        entry = result["baseline"][name]
        out.append(f"- {name}: {_fmt(entry['value'])} (n={entry['sample_count']})")
    out.append("")
    for metric in config.get("metrics", sorted(result["baseline"])):
        out.append(f"## {metric}")
        out.append("")
        out.append("| fault | layer | mean | std | 95% CI | n | significant |")
        out.append("|---|---|---|---|---|---|---|")
        for row in result["faults"]:
            stats = row.get("summary", {}).get(metric)
            if stats is None:
                errors = sum(1 for t in row.get("trials", []) if t and "error" in t)
                out.append(
                    f"| `{row['fault']}` | {row['layer']} | - | - | - | 0 "
                    f"| all {errors} trials failed |"
                )
                continue
            star = "\\*" if stats["significant"] else ""
            ci = f"[{_fmt(stats['ci95_low'])}, {_fmt(stats['ci95_high'])}]"
            out.append(
                f"| `{row['fault']}` | {row['layer']} | {_fmt(stats['mean'])}{star} "
                f"| {_fmt(stats['std'])} | {ci} | {stats['n']} "
                f"| {'yes' if stats['significant'] else 'no'} |"
            )
        out.append("")
    out.append("\\* mean whose confidence interval excludes the baseline")
    out.append("")
    return "\n".join(out)


def compare(a: dict, b: dict) -> dict:
    """Per-(fault, metric) mean deltas between two runs.

    Raises if the two runs measured different metric sets; rows present in
    only one run are listed separately rather than dropped silently.
    """
    metrics_a = set(a["baseline"])
    metrics_b = set(b["baseline"])
    if metrics_a != metrics_b:
        raise ReportError(
            f"metric sets differ: {sorted(metrics_a)} vs {sorted(metrics_b)}"
        )
    rows_a = {row["fault"]: row for row in a["faults"]}
    rows_b = {row["fault"]: row for row in b["faults"]}
    shared = [f for f in rows_a if f in rows_b]
    comparison_rows = []
    for fault in shared:
        for metric in sorted(metrics_a):
            sa = rows_a[fault].get("summary", {}).get(metric)
            sb = rows_b[fault].get("summary", {}).get(metric)
            if sa is None or sb is None:
                continue
            comparison_rows.append(
                {
                    "fault": fault,
                    "layer": rows_a[fault]["layer"],
                    "metric": metric,
                    "mean_a": sa["mean"],
                    "mean_b": sb["mean"],
                    "delta": sb["mean"] - sa["mean"],
                    "significant_a": sa["significant"],
                    "significant_b": sb["significant"],
                    "significance_changed": sa["significant"] != sb["significant"],
                }
            )
    return {
        "rows": comparison_rows,
        "only_in_a": sorted(f for f in rows_a if f not in rows_b),
        "only_in_b": sorted(f for f in rows_b if f not in rows_a),
    }


def comparison_markdown(cmp: dict) -> str:
    """Markdown rendering of a ``compare`` result."""
    out = ["# Run comparison", ""]
    out.append("| fault | layer | metric | mean A | mean B | delta | significance |")
    out.append("|---|---|---|---|---|---|---|")
    for row in cmp["rows"]:
        if row["significance_changed"]:
            flag = (
                f"changed ({'yes' if row['significant_a'] else 'no'} -> "
                f"{'yes' if row['significant_b'] else 'no'})"
            )
        else:
            flag = "yes" if row["significant_a"] else "no"
        out.append(
            f"| `{row['fault']}` | {row['layer']} | {row['metric']} "
            f"| {_fmt(row['mean_a'])} | {_fmt(row['mean_b'])} "
            f"| {_fmt(row['delta'])} | {flag} |"
        )
    out.append("")
    if cmp["only_in_a"]:
        out.append("Only in A: " + ", ".join(f"`{f}`" for f in cmp["only_in_a"]))
    if cmp["only_in_b"]:
        out.append("Only in B: " + ", ".join(f"`{f}`" for f in cmp["only_in_b"]))
    if cmp["only_in_a"] or cmp["only_in_b"]:
        out.append("")
    return "\n".join(out)
