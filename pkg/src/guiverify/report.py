"""Report assembly: label files in, CSV plus text table out.

Label files are CSV rows ``requirement_id,ac_id,label`` where an empty
ac_id marks a requirement-level row. Requirement ids may carry an
``<app>/`` prefix; rows group by that prefix so the report gets one row
per app plus an unweighted averages row.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import AgreementStats, MeanSD, PRF1, confusion, prf1

REQ_CLASSES = ("met", "unmet", "partially_met")
AC_CLASSES = ("met", "unmet")

# (section, class) pairs in report column order
_REPORT_BLOCKS = (
    ("req", "met"),
    ("req", "unmet"),
    ("req", "partially_met"),
    ("ac", "met"),
    ("ac", "unmet"),
)

_BLOCK_TITLES = {
    ("req", "met"): "Met (Req)",
    ("req", "unmet"): "Unmet (Req)",
    ("req", "partially_met"): "Partial (Req)",
    ("ac", "met"): "Met (AC)",
    ("ac", "unmet"): "Unmet (AC)",
}

_AGG_TITLES = (
    ("steps", "#Steps"),
    ("time", "Time (s)"),
    ("input_tokens", "#In-Tok"),
    ("output_tokens", "#Out-Tok"),
    ("cost", "Cost ($)"),
)


@dataclass
class LabelSet:
    requirements: dict[str, str] = field(default_factory=dict)
    criteria: dict[str, str] = field(default_factory=dict)  # "<req>#<ac>" -> label


def load_labels(path: str | Path) -> LabelSet:
    labels = LabelSet()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip() == "requirement_id":
                continue
            req_id = row[0].strip()
            ac_id = row[1].strip() if len(row) > 1 else ""
            label = row[2].strip() if len(row) > 2 else ""
            if not req_id or not label:
                raise ValueError(f"{path}: bad label row {row!r}")
            if ac_id:
                labels.criteria[f"{req_id}#{ac_id}"] = label
            else:
                labels.requirements[req_id] = label
    return labels


def write_labels(path: str | Path, labels: LabelSet) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["requirement_id", "ac_id", "label"])
        for req_id, label in sorted(labels.requirements.items()):
            writer.writerow([req_id, "", label])
        for key, label in sorted(labels.criteria.items()):
            req_id, ac_id = key.split("#", 1)
            writer.writerow([req_id, ac_id, label])


def app_of(item_id: str) -> str:
    return item_id.split("/", 1)[0] if "/" in item_id else "all"


@dataclass
class AppRow:
    app: str
    req: dict[str, PRF1]
    ac: dict[str, PRF1]
    aggregates: dict[str, MeanSD] | None = None


@dataclass
class MetricsReport:
    apps: list[AppRow]
    average: AppRow


def _prf1_by_class(gold: dict[str, str], pred: dict[str, str], classes: tuple[str, ...]):
    counts = confusion(gold, pred) if gold else {}
    from .metrics import ClassCounts

    return {cls: prf1(counts.get(cls, ClassCounts())) for cls in classes}


def build_metrics_report(
    gold: LabelSet,
    pred: LabelSet,
    aggregates_by_app: dict[str, dict[str, MeanSD]] | None = None,
) -> MetricsReport:
    apps = sorted(
        {app_of(i) for i in gold.requirements} | {app_of(k.split("#", 1)[0]) for k in gold.criteria}
    )
    rows = []
    for app in apps:
        req_gold = {i: v for i, v in gold.requirements.items() if app_of(i) == app}
        req_pred = {i: v for i, v in pred.requirements.items() if app_of(i) == app}
        ac_gold = {k: v for k, v in gold.criteria.items() if app_of(k.split("#", 1)[0]) == app}
        ac_pred = {k: v for k, v in pred.criteria.items() if app_of(k.split("#", 1)[0]) == app}
        rows.append(
            AppRow(
                app=app,
                req=_prf1_by_class(req_gold, req_pred, REQ_CLASSES),
                ac=_prf1_by_class(ac_gold, ac_pred, AC_CLASSES),
                aggregates=(aggregates_by_app or {}).get(app),
            )
        )
    return MetricsReport(apps=rows, average=_average_row(rows))


def _average_row(rows: list[AppRow]) -> AppRow:
    """Unweighted mean of the per-app rows, column by column."""

    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    def avg_prf1(selector) -> PRF1:
        return PRF1(
            precision=mean([selector(r).precision for r in rows]),
            recall=mean([selector(r).recall for r in rows]),
            f1=mean([selector(r).f1 for r in rows]),
        )

    aggregates = None
    if rows and all(r.aggregates for r in rows):
        aggregates = {
            name: MeanSD(
                mean=mean([r.aggregates[name].mean for r in rows]),
                sd=mean([r.aggregates[name].sd for r in rows]),
            )
            for name in rows[0].aggregates
        }
    return AppRow(
        app="avg",
        req={cls: avg_prf1(lambda r, c=cls: r.req[c]) for cls in REQ_CLASSES},
        ac={cls: avg_prf1(lambda r, c=cls: r.ac[c]) for cls in AC_CLASSES},
        aggregates=aggregates,
    )


def _row_cells(row: AppRow) -> list[str]:
    cells = [row.app]
    for section, cls in _REPORT_BLOCKS:
        scores = row.req[cls] if section == "req" else row.ac[cls]
        cells.extend([repr(scores.precision), repr(scores.recall), repr(scores.f1)])
    for name, _title in _AGG_TITLES:
        if row.aggregates and name in row.aggregates:
            cells.extend([repr(row.aggregates[name].mean), repr(row.aggregates[name].sd)])
        else:
            cells.extend(["", ""])
    return cells


def render_report_csv(report: MetricsReport) -> str:
    header = ["app"]
    for section, cls in _REPORT_BLOCKS:
        stub = f"{cls}_{section}"
        header.extend([f"{stub}_p", f"{stub}_r", f"{stub}_f1"])
    for name, _title in _AGG_TITLES:
        header.extend([f"{name}_avg", f"{name}_sd"])
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(header)
    for row in report.apps:
        writer.writerow(_row_cells(row))
    writer.writerow(_row_cells(report.average))
    return out.getvalue()


def render_report_table(report: MetricsReport, agreement: AgreementStats | None = None) -> str:
    """Fixed-width text table, one app per row plus the averages row."""
    headers = ["app"]
    for block in _REPORT_BLOCKS:
        title = _BLOCK_TITLES[block]
        headers.extend([f"{title} P", f"{title} R", f"{title} F1"])
    for _name, title in _AGG_TITLES:
        headers.extend([f"{title} Av", f"{title} SD"])

    def fmt(cell: str) -> str:
        if cell == "":
            return "-"
        try:
            return f"{float(cell):.3f}"
        except ValueError:
            return cell

    body = [[fmt(c) for c in _row_cells(row)] for row in report.apps]
    body.append([fmt(c) for c in _row_cells(report.average)])
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.rjust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)) for row in body)
    if agreement is not None:
        lines.append("")
        lines.append(
            f"alpha={agreement.alpha:.3f} (95% CI [{agreement.ci_low:.3f}, {agreement.ci_high:.3f}])"
            f"  kappa={agreement.kappa:.3f}  observed_agreement={agreement.observed_agreement:.4f}"
        )
    return "\n".join(lines) + "\n"


def render_report(
    report: MetricsReport, agreement: AgreementStats | None = None
) -> tuple[str, str]:
    return render_report_csv(report), render_report_table(report, agreement)
