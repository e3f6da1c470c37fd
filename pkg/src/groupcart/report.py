"""Plain-text tables and comma-separated exports.

Metric values print as percentages; d2h prints on its own [0, sqrt(n)]
scale. A ``[k]`` suffix marks the Scott-Knott rank band (1 is best).
"""

from __future__ import annotations

import csv
import io
import re
from pathlib import Path

from .experiment import REPORT_METRICS, TrialReport
from .metrics import MetricReport
from .moo import normalize_pool, to_minimization

METRIC_LABELS = {
    "accuracy": "Acc",
    "precision": "Prec",
    "recall": "Recall",
    "f1": "F1",
    "aod": "AOD",
    "eod": "EOD",
    "spd": "SPD",
    "di": "DI_dev",
    "fr": "FR",
    "d2h": "d2h",
}


def fmt(metric: str, value: float, precision: int = 1) -> str:
    if metric == "d2h":
        return f"{value:.3f}"
    return f"{100 * value:.{precision}f}"


def _table(header, rows) -> str:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    def line(r):
        return "  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    out = [line(header), "  ".join("-" * w for w in widths)]
    out.extend(line(r) for r in rows)
    return "\n".join(out) + "\n"


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "data"


# --------------------------------------------------------------------- single model


def metric_rows(report: MetricReport, d2h_value: float, precision: int = 1):
    """One row per protected attribute: all nine metrics plus d2h, formatted."""
    rows = []
    for pa in report.fairness:
        rows.append([pa] + [fmt(m, report.get(m, pa) if m != "d2h" else d2h_value, precision) for m in REPORT_METRICS])
    return rows


def render_metric_report(report: MetricReport, d2h_value: float, precision: int = 1) -> str:
    header = ["protected"] + [METRIC_LABELS[m] for m in REPORT_METRICS]
    return _table(header, metric_rows(report, d2h_value, precision))


def metric_report_csv(report: MetricReport, d2h_value: float) -> str:
    rows = [["protected"] + list(REPORT_METRICS)]
    for pa in report.fairness:
        rows.append([pa] + [repr(report.get(m, pa) if m != "d2h" else d2h_value) for m in REPORT_METRICS])
    return _csv(rows)


# --------------------------------------------------------------------- frontier


def frontier_rows(model):
    """id, lambda, alpha, on_frontier, raw objectives, pool-normalized minimization values, d2h."""
    specs = model.specs
    raw = [m.objectives for m in model.members]
    normalized = normalize_pool([to_minimization(v, specs) for v in raw])
    header = (
        ["id", "lambda", "alpha", "frontier"]
        + [s.name for s in specs]
        + [f"norm_{s.name}" for s in specs]
        + ["d2h"]
    )
    rows = [header]
    frontier = set(model.frontier_ids)
    for i, m in enumerate(model.members):
        rows.append(
            [i, repr(m.lam), "" if m.alpha is None else repr(m.alpha), int(i in frontier)]
            + [repr(float(v)) for v in raw[i]]
            + [repr(float(v)) for v in normalized[i]]
            + [repr(model.member_d2h(i))]
        )
    return rows


def frontier_csv(model) -> str:
    return _csv(frontier_rows(model))


# --------------------------------------------------------------------- trials


def render_trial_table(report: TrialReport, pa: str, precision: int = 1, title: str = "") -> str:
    ranks = {m: report.ranks(m, pa) for m in REPORT_METRICS}
    header = ["method"] + [METRIC_LABELS[m] for m in REPORT_METRICS]
    rows = []
    for method in report.methods:
        rows.append(
            [method]
            + [f"{fmt(m, report.median(method, m, pa), precision)} [{ranks[m][method]}]" for m in REPORT_METRICS]
        )
    head = f"{title}\n" if title else ""
    head += f"medians over {report.repeats} repeats; percentages except d2h; [k] = Scott-Knott rank\n\n"
    return head + _table(header, rows)


def medians_csv(report: TrialReport, pa: str) -> str:
    rows = [["method", "metric", "median", "rank"]]
    for m in REPORT_METRICS:
        ranks = report.ranks(m, pa)
        for method in report.methods:
            rows.append([method, m, repr(report.median(method, m, pa)), ranks[method]])
    return _csv(rows)


def cells_csv(report: TrialReport) -> str:
    rows = [["repeat", "method", "protected", "metric", "value"]]
    for r in range(report.repeats):
        for method in report.methods:
            for pa in report.protected:
                for m in REPORT_METRICS:
                    rows.append([r, method, pa, m, repr(report.cells[(r, method)].value(m, pa))])
    return _csv(rows)


def write_trial_report(report: TrialReport, out_dir, dataset: str, precision: int = 1) -> list[Path]:
    """One text table and one medians CSV per protected attribute, plus the raw cells."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for pa in report.protected:
        stem = f"{_slug(dataset)}_{_slug(pa)}"
        p = out / f"report_{stem}.txt"
        p.write_text(render_trial_table(report, pa, precision, f"{dataset}: {pa}"), encoding="utf-8")
        written.append(p)
        p = out / f"medians_{stem}.csv"
        p.write_text(medians_csv(report, pa), encoding="utf-8")
        written.append(p)
    p = out / f"cells_{_slug(dataset)}.csv"
    p.write_text(cells_csv(report), encoding="utf-8")
    written.append(p)
    return written


# --------------------------------------------------------------------- sweep


def sweep_rows(rows, pa_names):
    header = ["size", "frontier"] + [f"FR:{pa}" for pa in pa_names] + ["d2h", "stop"]
    body = []
    for r in rows:
        body.append(
            [str(r.size), f"{r.frontier_size:g}"]
            + [fmt("fr", r.flip_rate[pa]) for pa in pa_names]
            + [fmt("d2h", r.d2h), "*" if r.stop else ""]
        )
    return header, body


def render_sweep(rows, pa_names) -> str:
    header, body = sweep_rows(rows, pa_names)
    return _table(header, body)


def sweep_csv(rows, pa_names) -> str:
    out = [["size", "frontier_size"] + [f"fr:{pa}" for pa in pa_names] + ["d2h", "stop"]]
    for r in rows:
        out.append([r.size, repr(r.frontier_size)] + [repr(r.flip_rate[pa]) for pa in pa_names] + [repr(r.d2h), int(r.stop)])
    return _csv(out)
