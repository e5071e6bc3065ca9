"""Cell-level comparison against ground truth and the derived table metrics.

Cells are aligned by (row, col). Outcomes per cell:

    truth     pred       outcome
    -------   --------   ---------
    text      same       correct
    text      other      incorrect
    text      blank      missing
    blank     text       extra
    blank     blank      empty

Cells present in only one table are compared against a blank.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

from gridscan.errors import FormatError, UndefinedMetric

Table = Sequence[Sequence[str]]


@dataclass(frozen=True)
class EvalCounts:
    correct: int = 0
    incorrect: int = 0
    missing: int = 0
    extra: int = 0
    empty: int = 0

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))


def _cell(table: Table, r: int, c: int) -> str:
    if r < len(table) and c < len(table[r]):
        return table[r][c].strip()
    return ""


def classify_cell(pred: str, truth: str) -> str:
    pred, truth = pred.strip(), truth.strip()
    if truth:
        if not pred:
            return "missing"
        return "correct" if pred == truth else "incorrect"
    return "extra" if pred else "empty"


def compare_tables(pred: Table, truth: Table) -> EvalCounts:
    n_rows = max(len(pred), len(truth))
    tally = dict.fromkeys(("correct", "incorrect", "missing", "extra", "empty"), 0)
    for r in range(n_rows):
        n_cols = max(len(pred[r]) if r < len(pred) else 0, len(truth[r]) if r < len(truth) else 0)
        for c in range(n_cols):
            tally[classify_cell(_cell(pred, r, c), _cell(truth, r, c))] += 1
    return EvalCounts(**tally)


def _ratio(num: float, den: float, name: str) -> float:
    if den == 0:
        raise UndefinedMetric(f"{name} is undefined: zero denominator")
    return num / den


def precision(c: EvalCounts) -> float:
    return _ratio(c.correct, c.correct + c.incorrect, "precision")


def recall(c: EvalCounts) -> float:
    return _ratio(c.correct, c.correct + c.missing, "recall")


def f1_from(p: float, r: float) -> float:
    """Harmonic mean; 0 when both inputs are 0."""
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def f1(c: EvalCounts) -> float:
    return f1_from(precision(c), recall(c))


def accuracy(c: EvalCounts) -> float:
    """Correct cells over all non-blank truth cells: C / (C + I + M)."""
    return _ratio(c.correct, c.correct + c.incorrect + c.missing, "accuracy")


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance between two sequences (strings or token lists)."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(pred: str, truth: str) -> float:
    if not truth:
        raise UndefinedMetric("CER needs a non-empty reference")
    return levenshtein(pred, truth) / len(truth)


def wer(pred: str, truth: str) -> float:
    ref = truth.split()
    if not ref:
        raise UndefinedMetric("WER needs a non-empty reference")
    return levenshtein(pred.split(), ref) / len(ref)


def mean_error_rates(pred: Table, truth: Table) -> tuple[float | None, float | None]:
    """Average CER and WER over non-blank truth cells (None if there are none)."""
    cers, wers = [], []
    for r, row in enumerate(truth):
        for c, t in enumerate(row):
            t = t.strip()
            if not t:
                continue
            p = _cell(pred, r, c)
            cers.append(cer(p, t))
            wers.append(wer(p, t))
    if not cers:
        return None, None
    return sum(cers) / len(cers), sum(wers) / len(wers)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class MetricReport:
    counts: EvalCounts
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None
    avg_cer: float | None = None
    avg_wer: float | None = None


ROW_NAMES = {
    "correct": "Total Correct Cells",
    "incorrect": "Total Incorrect Cells",
    "missing": "Total Missing Cells",
    "extra": "Total Extra Cells",
    "empty": "Total Empty Cells",
    "precision": "Precision (%)",
    "recall": "Recall (%)",
    "f1": "F1 Score (%)",
    "accuracy": "Accuracy (%)",
    "avg_cer": "CER (%)",
    "avg_wer": "WER (%)",
}
_RATES = ("precision", "recall", "f1", "accuracy", "avg_cer", "avg_wer")


def _maybe(fn, counts):
    try:
        return fn(counts)
    except UndefinedMetric:
        return None


def report(counts: EvalCounts, pred: Table | None = None, truth: Table | None = None) -> MetricReport:
    p, r = _maybe(precision, counts), _maybe(recall, counts)
    f = f1_from(p, r) if p is not None and r is not None else None
    avg_cer = avg_wer = None
    if pred is not None and truth is not None:
        avg_cer, avg_wer = mean_error_rates(pred, truth)
    return MetricReport(counts, p, r, f, _maybe(accuracy, counts), avg_cer, avg_wer)


def evaluate_tables(pred: Table, truth: Table) -> MetricReport:
    return report(compare_tables(pred, truth), pred, truth)


def report_rows(rep: MetricReport) -> list[tuple[str, str, str]]:
    """``(row name, display value, exact value)`` triples."""
    rows = []
    for f in fields(EvalCounts):
        v = getattr(rep.counts, f.name)
        rows.append((ROW_NAMES[f.name], str(v), str(v)))
    for key in _RATES:
        v = getattr(rep, key)
        rows.append((ROW_NAMES[key], "n/a" if v is None else f"{100 * v:.2f}", "" if v is None else repr(v)))
    return rows


def format_report(rep: MetricReport) -> str:
    rows = report_rows(rep)
    width = max(len(name) for name, _, _ in rows)
    return "\n".join(f"{name:<{width}}  {shown:>8}" for name, shown, _ in rows) + "\n"


def report_csv(rep: MetricReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value", "exact"])
    w.writerows(report_rows(rep))
    return buf.getvalue()


def write_report(rep: MetricReport, path: str | os.PathLike) -> None:
    """Write ``<path>`` as CSV and a ``.txt`` sibling with the aligned text table."""
    path = Path(path)
    path.write_text(report_csv(rep))
    path.with_suffix(".txt").write_text(format_report(rep))


def parse_report_csv(text: str) -> MetricReport:
    by_name = {v: k for k, v in ROW_NAMES.items()}
    values: dict[str, str] = {}
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["metric", "value", "exact"]:
        raise FormatError("report CSV must start with 'metric,value,exact'")
    for row in rows[1:]:
        if len(row) != 3 or row[0] not in by_name:
            raise FormatError(f"unexpected report row {row!r}")
        values[by_name[row[0]]] = row[2]
    try:
        counts = EvalCounts(*(int(values[f.name]) for f in fields(EvalCounts)))
        rates = {k: (float(values[k]) if values[k] else None) for k in _RATES}
    except (KeyError, ValueError) as exc:
        raise FormatError(f"incomplete report: {exc}") from exc
    return MetricReport(counts, **rates)


def read_table_csv(path: str | os.PathLike) -> list[list[str]]:
    """RFC-4180 table; empty fields are blank cells.

    A leading ``col_0,col_1,...`` header row (as written by ``--header``) is skipped.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh, strict=True))
    except csv.Error as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if rows and rows[0] == [f"col_{i}" for i in range(len(rows[0]))]:
        rows = rows[1:]
    if rows and len({len(r) for r in rows}) > 1:
        raise FormatError(f"{path}: rows have different lengths")
    return rows


def write_table_csv(table: Table, path: str | os.PathLike, header: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        if header and table:
            w.writerow([f"col_{i}" for i in range(len(table[0]))])
        w.writerows(table)
