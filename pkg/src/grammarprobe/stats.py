"""Correlation analysis, bootstrap uncertainty, and report export.

Correlations run across models: one row per model, one column per task
accuracy or translation metric. Degenerate (constant) columns produce
explicit missing cells instead of NaNs so downstream tables stay honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ColumnMismatch, DegenerateInput, IdMismatch
from .hashio import atomic_write_text

CORRELATION_METHODS = ("pearson", "spearman")


@dataclass(frozen=True)
class ModelRow:
    model_id: str
    columns: dict[str, float]          # ordered metric-name -> value


@dataclass
class CorrelationMatrix:
    method: str
    labels: list[str]
    values: list[list[float | None]]   # None marks a degenerate cell

    def cell(self, a: str, b: str) -> float | None:
        return self.values[self.labels.index(a)][self.labels.index(b)]


def pearson(x: list[float], y: list[float]) -> float:
    """Sample Pearson r; constant input is an explicit error, never 0."""
    if len(x) != len(y) or len(x) < 2:
        raise DegenerateInput("pearson needs two equal-length vectors of size >= 2")
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    if vx == 0.0 or vy == 0.0:
        raise DegenerateInput("pearson undefined for a constant vector")
    r = cov / math.sqrt(vx * vy)
    return max(-1.0, min(1.0, r))


def rankdata(x: list[float]) -> list[float]:
    """Ranks 1..n with ties sharing their average rank."""
    order = sorted(range(len(x)), key=lambda i: x[i])
    ranks = [0.0] * len(x)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and x[order[j + 1]] == x[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(x: list[float], y: list[float]) -> float:
    """Pearson r of average-tied ranks."""
    if len(x) != len(y) or len(x) < 2:
        raise DegenerateInput("spearman needs two equal-length vectors of size >= 2")
    return pearson(rankdata(x), rankdata(y))


def correlation_matrix(rows: list[ModelRow], method: str) -> CorrelationMatrix:
    """Pairwise column correlations over the model population.

    Requires >= 3 rows (correlating across models). Cells touching a
    constant column are None; the diagonal is exactly 1.
    """
    if method not in CORRELATION_METHODS:
        raise ValueError(f"method must be one of {CORRELATION_METHODS}")
    if len(rows) < 3:
        raise DegenerateInput("correlation_matrix needs at least 3 model rows")
    labels = list(rows[0].columns)
    for row in rows[1:]:
        if list(row.columns) != labels:
            raise ColumnMismatch(f"model {row.model_id} columns differ from "
                                 f"{rows[0].model_id}")
    series = {lab: [row.columns[lab] for row in rows] for lab in labels}
    corr = pearson if method == "pearson" else spearman
    values: list[list[float | None]] = []
    for a in labels:
        line: list[float | None] = []
        for b in labels:
            if a == b:
                line.append(1.0)
                continue
            try:
                line.append(corr(series[a], series[b]))
            except DegenerateInput:
                line.append(None)
        values.append(line)
    return CorrelationMatrix(method=method, labels=labels, values=values)


def bootstrap_std(outcomes: list, resamples: int = 1000, seed: int = 0) -> float:
    """Standard deviation of resampled accuracy means; seeded, deterministic."""
    if not outcomes:
        raise DegenerateInput("bootstrap_std needs a non-empty outcome list")
    data = np.asarray(outcomes, dtype=np.float64)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(data), size=(resamples, len(data)))
    means = data[idx].mean(axis=1)
    return float(means.std())


def binomial_std(accuracy: float, n: int) -> float:
    """Closed-form sigma of a Bernoulli mean, emitted alongside the bootstrap."""
    return math.sqrt(max(0.0, accuracy * (1.0 - accuracy)) / n) if n else 0.0


# --- report bundle ---

def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def _write_tsv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(c if isinstance(c, str) else _fmt(c) for c in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def export_report(task_reports: dict[str, dict], corpus_summaries: dict[str, dict],
                  sweeps: dict[str, list[dict]], out_dir: str | Path) -> list[Path]:
    """Materialize the per-model grid, correlation matrices, and sweep curves.

    ``task_reports``: model_id -> {kind -> report dict with accuracy/std}.
    ``corpus_summaries``: model_id -> {metric -> {mean, std, n}}.
    ``sweeps``: kind -> list of {n, accuracy, std} rows.
    Raises :class:`IdMismatch` when the two model-id sets disagree.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if corpus_summaries and task_reports:
        if set(corpus_summaries) != set(task_reports):
            diff = sorted(set(corpus_summaries) ^ set(task_reports))
            raise IdMismatch(f"task and score model ids differ: {diff}")

    models = sorted(task_reports or corpus_summaries)
    kinds = sorted({k for reports in task_reports.values() for k in reports})
    metrics = sorted({m for summ in corpus_summaries.values() for m in summ})
    written: list[Path] = []

    header = (["model"] + [f"{k}_acc" for k in kinds] + [f"{k}_std" for k in kinds]
              + [f"{m}_mean" for m in metrics] + [f"{m}_std" for m in metrics])
    grid_rows = []
    for model in models:
        reports = task_reports.get(model, {})
        summ = corpus_summaries.get(model, {})
        row: list = [model]
        row += [reports[k]["accuracy"] if k in reports else None for k in kinds]
        row += [reports[k]["std"] if k in reports else None for k in kinds]
        row += [summ[m]["mean"] if m in summ else None for m in metrics]
        row += [summ[m]["std"] if m in summ else None for m in metrics]
        grid_rows.append(row)
    grid_path = out_dir / "grid.tsv"
    _write_tsv(grid_path, header, grid_rows)
    written.append(grid_path)

    corr_note = ""
    numeric_labels = ([f"{k}_acc" for k in kinds] + [f"{m}_mean" for m in metrics])
    model_rows = []
    for model in models:
        reports = task_reports.get(model, {})
        summ = corpus_summaries.get(model, {})
        cols: dict[str, float] = {}
        complete = True
        for k in kinds:
            if k in reports:
                cols[f"{k}_acc"] = reports[k]["accuracy"]
            else:
                complete = False
        for m in metrics:
            if m in summ:
                cols[f"{m}_mean"] = summ[m]["mean"]
            else:
                complete = False
        if complete and cols:
            model_rows.append(ModelRow(model_id=model, columns=cols))
    for method in CORRELATION_METHODS:
        path = out_dir / f"corr_{method}.tsv"
        if len(model_rows) >= 3 and numeric_labels:
            matrix = correlation_matrix(model_rows, method)
            _write_tsv(path, ["label"] + matrix.labels,
                       [[lab] + list(vals) for lab, vals in
                        zip(matrix.labels, matrix.values)])
            written.append(path)
        else:
            corr_note = (f"correlations skipped: {len(model_rows)} complete model "
                         "rows (need >= 3)")

    for kind, rows in sorted(sweeps.items()):
        if not rows:
            continue
        path = out_dir / f"sweep_{kind}.tsv"
        _write_tsv(path, ["n", "accuracy", "std"],
                   [[str(r["n"]), r["accuracy"], r["std"]] for r in rows])
        written.append(path)

    summary = ["# Evaluation report", ""]
    summary.append(f"Models: {', '.join(models) if models else '(none)'}")
    summary.append(f"Task kinds: {', '.join(kinds) if kinds else '(none)'}")
    summary.append(f"Translation metrics: {', '.join(metrics) if metrics else '(none)'}")
    summary.append("")
    summary.append("## Accuracy and metric grid")
    summary.append("")
    summary.append("See grid.tsv (one row per model, accuracy +- std per task,")
    summary.append("corpus mean +- std per translation metric).")
    if corr_note:
        summary.append("")
        summary.append(f"Note: {corr_note}")
    else:
        summary.append("")
        summary.append("Correlation matrices: corr_pearson.tsv, corr_spearman.tsv.")
    if any(sweeps.values()):
        summary.append("")
        summary.append("## Option-count sweeps")
        summary.append("")
        for kind in sorted(sweeps):
            if sweeps[kind]:
                summary.append(f"- sweep_{kind}.tsv")
    summary_path = out_dir / "summary.md"
    atomic_write_text(summary_path, "\n".join(summary) + "\n")
    written.append(summary_path)
    return written
