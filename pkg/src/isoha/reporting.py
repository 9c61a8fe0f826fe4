"""Daily traffic aggregation and SLA arithmetic.

All percentages are computed with decimal arithmetic and rounded
half-up at fixed places: TPS and SLA to two decimals, the error rate to
three decimals while it is below one percent (so small rates like 0.037
keep their precision) and two above.  Period deltas are taken on the
unrounded aggregates and only then rounded, which is the order that
reproduces published before/after figures exactly.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext

DAY_SECONDS = 86400
CSV_HEADER = "date,total,standard,nonstandard,avg_tps,error_rate_pct,sla_pct"
SERIES_METRICS = ("tps", "error", "sla")


class ReportingError(ValueError):
    """Input that cannot be aggregated or emitted."""


@dataclass(frozen=True, slots=True)
class DailyTrafficRecord:
    date: str
    total: int
    standard: int
    nonstandard: int

    def __post_init__(self):
        if min(self.total, self.standard, self.nonstandard) < 0:
            raise ReportingError(f"counts must be nonnegative: {self}")
        if self.standard + self.nonstandard != self.total:
            raise ReportingError(
                f"standard + nonstandard must equal total: {self}"
            )


@dataclass(frozen=True, slots=True)
class SlaReport:
    avg_tps: Decimal
    error_rate_pct: Decimal
    sla_pct: Decimal


@dataclass(frozen=True, slots=True)
class PeriodComparison:
    before: SlaReport
    after: SlaReport
    sla_delta_pp: Decimal
    error_delta_pp: Decimal


def _round(value: Decimal, places: str) -> Decimal:
    return value.quantize(Decimal(places), rounding=ROUND_HALF_UP)


def _unrounded(total: int, standard: int, nonstandard: int) -> tuple[Decimal, Decimal]:
    """(error_pct, sla_pct) before any rounding."""
    return (
        Decimal(100 * nonstandard) / Decimal(total),
        Decimal(100 * standard) / Decimal(total),
    )


def _format_error_rate(unrounded: Decimal) -> Decimal:
    # three decimals below one percent, two above
    return _round(unrounded, "0.001" if unrounded < 1 else "0.01")


def compute_report(total: int, standard: int, nonstandard: int, days: int = 1) -> SlaReport:
    if total < 1:
        raise ReportingError("a report needs at least one transaction")
    if days < 1:
        raise ReportingError("a period spans at least one day")
    if standard + nonstandard != total:
        raise ReportingError(
            f"standard + nonstandard must equal total: {standard}+{nonstandard} != {total}"
        )
    with localcontext() as ctx:
        ctx.prec = 50
        error_u, sla_u = _unrounded(total, standard, nonstandard)
        return SlaReport(
            avg_tps=_round(Decimal(total) / Decimal(DAY_SECONDS * days), "0.01"),
            error_rate_pct=_format_error_rate(error_u),
            sla_pct=_round(sla_u, "0.01"),
        )


def compute_daily_report(record: DailyTrafficRecord) -> SlaReport:
    return compute_report(record.total, record.standard, record.nonstandard)


def aggregate_period(records, label: str | None = None) -> DailyTrafficRecord:
    records = list(records)
    if not records:
        raise ReportingError("a period needs at least one record")
    if label is None:
        dates = sorted(r.date for r in records)
        label = dates[0] if len(dates) == 1 else f"{dates[0]}..{dates[-1]}"
    return DailyTrafficRecord(
        date=label,
        total=sum(r.total for r in records),
        standard=sum(r.standard for r in records),
        nonstandard=sum(r.nonstandard for r in records),
    )


def compare_periods(before_records, after_records) -> PeriodComparison:
    before_records, after_records = list(before_records), list(after_records)
    before_agg = aggregate_period(before_records)
    after_agg = aggregate_period(after_records)
    with localcontext() as ctx:
        ctx.prec = 50
        before_error_u, before_sla_u = _unrounded(
            before_agg.total, before_agg.standard, before_agg.nonstandard
        )
        after_error_u, after_sla_u = _unrounded(
            after_agg.total, after_agg.standard, after_agg.nonstandard
        )
        return PeriodComparison(
            before=compute_report(
                before_agg.total, before_agg.standard, before_agg.nonstandard,
                days=len(before_records),
            ),
            after=compute_report(
                after_agg.total, after_agg.standard, after_agg.nonstandard,
                days=len(after_records),
            ),
            sla_delta_pp=_round(after_sla_u - before_sla_u, "0.01"),
            error_delta_pp=_round(before_error_u - after_error_u, "0.01"),
        )


# ------------------------------------------------------------ ingestion


def parse_records(text: str) -> list[DailyTrafficRecord]:
    """One record per line: ``date,total,standard,nonstandard``."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line == "date,total,standard,nonstandard":
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ReportingError(
                f"line {lineno}: expected date,total,standard,nonstandard, got {raw!r}"
            )
        try:
            counts = [int(p) for p in parts[1:]]
        except ValueError:
            raise ReportingError(f"line {lineno}: counts must be integers: {raw!r}") from None
        try:
            records.append(DailyTrafficRecord(parts[0], *counts))
        except ReportingError as exc:
            raise ReportingError(f"line {lineno}: {exc}") from None
    return records


def load_records(path: str) -> list[DailyTrafficRecord]:
    with open(path, encoding="utf-8") as handle:
        return parse_records(handle.read())


def render_records(records) -> str:
    lines = ["date,total,standard,nonstandard"]
    lines += [f"{r.date},{r.total},{r.standard},{r.nonstandard}" for r in records]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------ emission


def render_report_csv(records) -> str:
    records = list(records)
    if not records:
        raise ReportingError("nothing to report")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for record in records:
        report = compute_daily_report(record)
        writer.writerow(
            [
                record.date,
                record.total,
                record.standard,
                record.nonstandard,
                str(report.avg_tps),
                str(report.error_rate_pct),
                str(report.sla_pct),
            ]
        )
    return out.getvalue()


def emit_report(records, out_dir: str) -> list[str]:
    """Write sla.csv plus one whitespace-separated series file per
    metric (tps.dat, error.dat, sla.dat); returns the paths written."""
    records = list(records)
    if not records:
        raise ReportingError("nothing to report")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    csv_path = os.path.join(out_dir, "sla.csv")
    with open(csv_path, "w", encoding="ascii") as handle:
        handle.write(render_report_csv(records))
    paths.append(csv_path)
    reports = [(r, compute_daily_report(r)) for r in records]
    series = {
        "tps": [(r.date, report.avg_tps) for r, report in reports],
        "error": [(r.date, report.error_rate_pct) for r, report in reports],
        "sla": [(r.date, report.sla_pct) for r, report in reports],
    }
    for metric in SERIES_METRICS:
        path = os.path.join(out_dir, f"{metric}.dat")
        with open(path, "w", encoding="ascii") as handle:
            for date, value in series[metric]:
                handle.write(f"{date} {value}\n")
        paths.append(path)
    return paths


# ------------------------------------------------------------ presentation


def format_daily_line(record: DailyTrafficRecord, report: SlaReport) -> str:
    return (
        f"date={record.date} total={record.total} standard={record.standard}"
        f" nonstandard={record.nonstandard} avg_tps={report.avg_tps}"
        f" error_rate_pct={report.error_rate_pct} sla_pct={report.sla_pct}"
    )


def format_comparison(comparison: PeriodComparison) -> str:
    return "\n".join(
        [
            f"before: avg_tps={comparison.before.avg_tps}"
            f" error_rate_pct={comparison.before.error_rate_pct}"
            f" sla_pct={comparison.before.sla_pct}",
            f"after: avg_tps={comparison.after.avg_tps}"
            f" error_rate_pct={comparison.after.error_rate_pct}"
            f" sla_pct={comparison.after.sla_pct}",
            f"delta: sla={comparison.sla_delta_pp:+} pp error={comparison.error_delta_pp:+} pp",
        ]
    )
