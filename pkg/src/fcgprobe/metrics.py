"""Attack-level aggregates: success rate, perturbation rate, surviving genes.

All sums go through :func:`math.fsum`, which is correctly rounded and
therefore independent of summation order. Recomputing an aggregate from
the stored per-sample rows gives the identical float.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ParseError, ValidationError


@dataclass
class SampleRow:
    seed: str
    outcome: str
    delta: float  # added nodes+edges over original nodes+edges
    generations: int
    genes: list[int] = field(default_factory=list)  # surviving genes per generation
    wall_time: float = 0.0

    @property
    def success(self) -> bool:
        return self.outcome == "Success"


def attack_success_rate(rows) -> float:
    return sum(1 for r in rows if r.success) / len(rows) if rows else 0.0


def perturbation_rate(rows) -> float | None:
    """Mean ``delta`` over successful samples; ``None`` when nothing succeeded."""
    deltas = [r.delta for r in rows if r.success]
    return math.fsum(deltas) / len(deltas) if deltas else None


def sample_asgg(genes) -> float:
    return math.fsum(genes) / len(genes) if len(genes) else 0.0


def average_surviving_genes(rows) -> float:
    """Per-sample mean gene count over generations, averaged over samples."""
    return math.fsum(sample_asgg(r.genes) for r in rows) / len(rows) if rows else 0.0


@dataclass
class MetricsReport:
    method: str
    asr: float
    pr: float | None
    asgg: float
    rows: list[SampleRow]
    n_errors: int = 0

    @classmethod
    def from_rows(cls, method: str, rows: list[SampleRow], n_errors: int = 0) -> "MetricsReport":
        return cls(method, attack_success_rate(rows), perturbation_rate(rows),
                   average_surviving_genes(rows), list(rows), n_errors)

    @property
    def n_success(self) -> int:
        return sum(1 for r in self.rows if r.success)

    def to_json(self, include_time: bool = False) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            if not include_time:
                del d["wall_time"]
            rows.append(d)
        return {
            "method": self.method,
            "asr": self.asr,
            "pr": self.pr,
            "asgg": self.asgg,
            "n_malware": len(self.rows),
            "n_success": self.n_success,
            "n_errors": self.n_errors,
            "samples": rows,
        }

    def dumps(self, include_time: bool = False) -> str:
        return json.dumps(self.to_json(include_time), sort_keys=True, indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "MetricsReport":
        try:
            doc = json.loads(text)
            rows = [SampleRow(**r) for r in doc["samples"]]
            return cls(doc["method"], doc["asr"], doc["pr"], doc["asgg"], rows, doc.get("n_errors", 0))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"bad metrics document: {exc}") from None


def check_report(report: MetricsReport) -> None:
    """Raise :class:`ValidationError` unless the aggregates match the rows exactly."""
    again = MetricsReport.from_rows(report.method, report.rows)
    for name in ("asr", "pr", "asgg"):
        if getattr(again, name) != getattr(report, name):
            raise ValidationError(f"{name} {getattr(report, name)!r} != recomputed {getattr(again, name)!r}")
    if not 0.0 <= report.asr <= 1.0 or (report.pr is not None and report.pr < 0):
        raise ValidationError("aggregate out of range")


def row_from_result(name: str, result) -> SampleRow:
    return SampleRow(name, result.outcome, result.delta, result.generations,
                     list(result.gene_counts), result.wall_time)
