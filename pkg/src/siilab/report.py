"""Structured outcome records for the statistical verifications.

A report carries the statistic table, thresholds, verdict and seeds, and
renders to a deterministic text block (timestamps never enter a report so two
identical runs serialize to identical bytes).
"""

from __future__ import annotations

from dataclasses import dataclass, field


def fmt(value):
    """Deterministic number formatting for report bodies."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


@dataclass(frozen=True)
class ReportRow:
    name: str
    statistic: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class TestReport:
    test: str
    scenario: str
    passed: bool
    alpha: float | None = None
    max_stat: float | None = None
    threshold: float | None = None
    rows: tuple = ()
    seeds: tuple = ()
    notes: tuple = ()
    metrics: tuple = field(default_factory=tuple)  # ordered (name, value) pairs

    def render(self):
        lines = [
            f"test={self.test} scenario={self.scenario} "
            f"verdict={'PASS' if self.passed else 'FAIL'}"
        ]
        if self.alpha is not None:
            lines.append(f"alpha={fmt(self.alpha)}")
        if self.max_stat is not None:
            lines.append(f"max_stat={fmt(self.max_stat)} threshold={fmt(self.threshold)}")
        if self.seeds:
            lines.append("seeds=" + ",".join(str(s) for s in self.seeds))
        for name, value in self.metrics:
            lines.append(f"{name}={fmt(value)}")
        for note in self.notes:
            lines.append(f"note: {note}")
        if self.rows:
            lines.append("name\tstatistic\tthreshold\tpassed\tdetail")
            for row in self.rows:
                lines.append(
                    f"{row.name}\t{fmt(row.statistic)}\t{fmt(row.threshold)}\t"
                    f"{fmt(row.passed)}\t{row.detail}"
                )
        return "\n".join(lines) + "\n"


def write_report(report, stream):
    stream.write(report.render())


def combine_verdicts(reports):
    return all(r.passed for r in reports)
