"""Campaign reporting: the running record log, summary JSON, and CSV series.

The record log is a sectioned plain-text file that captures everything needed
to regenerate the other outputs: the configuration echo, the frozen symbolizer
boundaries, one record per accepted test case, the per-condition hit counts,
the adversarial-vs-radius series, and the final statistics.  parse_log reads
such a file back, and export(parse_log(p), p) reproduces it byte for byte.

CSV output is RFC-4180 style with a header row, '.' decimals, and LF line
endings.  The summary is UTF-8 JSON with sorted keys.  No timestamps are
written anywhere, so identical campaigns yield identical bytes.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coverage import Symbolizer

__all__ = [
    "Snapshot",
    "ReportRecord",
    "CampaignReport",
    "append_record",
    "export",
    "parse_log",
]

LOG_NAME = "record.txt"
SUMMARY_NAME = "summary.json"
COVERAGE_CSV = "coverage_vs_testcases.csv"
CURVE_CSV = "adversarial_vs_radius.csv"
TIMES_CSV = "coverage_times.csv"


def _fmt(value: float) -> str:
    # repr gives the shortest digits that round-trip, so parse + re-export is stable
    return repr(float(value))


def _fmt_opt(value: Optional[float]) -> str:
    return "-" if value is None else _fmt(value)


@dataclass(frozen=True)
class Snapshot:
    """State of the campaign right after a test case was accepted."""

    test_cases_so_far: int
    cell_rate: float
    gate_rate: float
    seq_pos_rate: float
    seq_neg_rate: float
    adversarial_distances: tuple[float, ...] = ()


@dataclass(frozen=True)
class ReportRecord:
    """One row of the campaign log."""

    test_cases_so_far: int
    cell_rate: float
    gate_rate: float
    seq_pos_rate: float
    seq_neg_rate: float
    adversarial_count: int
    mean_adversarial_perturbation: Optional[float]


class CampaignReport:
    """Time-ordered campaign records plus final tables and statistics.

    records grow monotonically in test_cases_so_far; the remaining fields are
    filled in when the campaign finishes (or by parse_log).
    """

    def __init__(self, config_echo: Optional[dict] = None,
                 symbolizer: Optional[Symbolizer] = None):
        self.config: dict[str, str] = {k: str(v) for k, v in (config_echo or {}).items()}
        self.symbolizer = symbolizer
        self.records: list[ReportRecord] = []
        self.coverage_tables: Optional[dict[str, dict[str, int]]] = None
        self.curve_radii: Optional[list[float]] = None
        self.curve_counts: Optional[list[int]] = None
        self.curve_auc: Optional[float] = None
        self.attempts: int = 0
        self.valid_count: int = 0
        self.status: Optional[str] = None
        self.suite_size: Optional[int] = None

    @property
    def generated_cases(self) -> int:
        return self.records[-1].test_cases_so_far if self.records else 0

    @property
    def validity_yield(self) -> Optional[float]:
        if self.attempts == 0:
            return None
        return self.valid_count / self.attempts

    @property
    def adversarial_count(self) -> int:
        return self.records[-1].adversarial_count if self.records else 0

    @property
    def mean_adversarial_perturbation(self) -> Optional[float]:
        return self.records[-1].mean_adversarial_perturbation if self.records else None

    def final_rates(self) -> tuple[float, float, float, float]:
        if not self.records:
            return (0.0, 0.0, 0.0, 0.0)
        last = self.records[-1]
        return (last.cell_rate, last.gate_rate, last.seq_pos_rate, last.seq_neg_rate)


def append_record(report: CampaignReport, snapshot: Snapshot) -> CampaignReport:
    """Append one record; the counter must exceed the previous record's.

    The mean perturbation is recomputed from the adversarial distances alone
    and reported as absent (None) when there are none.
    """
    if report.records and snapshot.test_cases_so_far <= report.records[-1].test_cases_so_far:
        raise ValueError(
            f"record counter {snapshot.test_cases_so_far} does not exceed "
            f"previous {report.records[-1].test_cases_so_far}"
        )
    dists = snapshot.adversarial_distances
    mean = float(np.mean(dists)) if dists else None
    report.records.append(ReportRecord(
        test_cases_so_far=snapshot.test_cases_so_far,
        cell_rate=snapshot.cell_rate,
        gate_rate=snapshot.gate_rate,
        seq_pos_rate=snapshot.seq_pos_rate,
        seq_neg_rate=snapshot.seq_neg_rate,
        adversarial_count=len(dists),
        mean_adversarial_perturbation=mean,
    ))
    return report


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _times_rows(tables: dict[str, dict[str, int]]):
    """Flatten the coverage-times tables into (metric, condition, count) rows.

    Cell and gate rows keep timestep order; pattern rows are sorted so output
    order never depends on observation order."""
    for cond, count in tables.get("cell", {}).items():
        yield "cell", cond, count
    for cond, count in tables.get("gate", {}).items():
        yield "gate", cond, count
    for key, metric in (("seq_pos", "seq_pos"), ("seq_neg", "seq_neg")):
        for cond in sorted(tables.get(key, {})):
            yield metric, cond, tables[key][cond]


def _write_log(report: CampaignReport, path: str) -> None:
    lines = []
    lines.append("[config]")
    for key, value in report.config.items():
        lines.append(f"{key} = {value}")
    lines.append("")
    lines.append("[symbolizer]")
    sym = report.symbolizer
    if sym is None:
        lines.append("none")
    else:
        lines.append(f"symbol_count {sym.symbol_count}")
        for sign, table in (("pos", sym.boundaries_pos), ("neg", sym.boundaries_neg)):
            for t in sorted(table):
                vals = " ".join(_fmt(v) for v in np.asarray(table[t]))
                lines.append(f"{sign} {t} {vals}")
    lines.append("")
    lines.append("[records]")
    lines.append("# test_cases cell_rate gate_rate seq_pos_rate seq_neg_rate "
                 "adversarial_count mean_perturbation")
    for r in report.records:
        lines.append(
            f"{r.test_cases_so_far} {_fmt(r.cell_rate)} {_fmt(r.gate_rate)} "
            f"{_fmt(r.seq_pos_rate)} {_fmt(r.seq_neg_rate)} {r.adversarial_count} "
            f"{_fmt_opt(r.mean_adversarial_perturbation)}"
        )
    lines.append("")
    lines.append("[coverage_times]")
    if report.coverage_tables is not None:
        for metric, cond, count in _times_rows(report.coverage_tables):
            lines.append(f"{metric} {cond} {count}")
    lines.append("")
    lines.append("[adversarial_curve]")
    if report.curve_radii is not None:
        for r, c in zip(report.curve_radii, report.curve_counts):
            lines.append(f"{_fmt(r)} {c}")
        lines.append(f"auc = {_fmt(report.curve_auc)}")
    lines.append("")
    lines.append("[final]")
    lines.append(f"attempts = {report.attempts}")
    lines.append(f"valid_count = {report.valid_count}")
    lines.append(f"validity_yield = {_fmt_opt(report.validity_yield)}")
    lines.append(f"status = {report.status if report.status is not None else '-'}")
    lines.append(f"suite_size = {report.suite_size if report.suite_size is not None else '-'}")
    lines.append(f"generated_cases = {report.generated_cases}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_summary(report: CampaignReport, path: str) -> None:
    cell, gate, seq_pos, seq_neg = report.final_rates()
    doc = {
        "adversarial_auc": report.curve_auc,
        "adversarial_count": report.adversarial_count,
        "attempts": report.attempts,
        "cell_rate": cell,
        "gate_rate": gate,
        "generated_cases": report.generated_cases,
        "mean_adversarial_perturbation": report.mean_adversarial_perturbation,
        "seq_neg_rate": seq_neg,
        "seq_pos_rate": seq_pos,
        "status": report.status,
        "suite_size": report.suite_size,
        "valid_count": report.valid_count,
        "validity_yield": report.validity_yield,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _write_coverage_csv(report: CampaignReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["test_cases", "cell_rate", "gate_rate", "seq_pos_rate",
                    "seq_neg_rate", "adversarial_count", "mean_adversarial_perturbation"])
        for r in report.records:
            if r.test_cases_so_far < 1:
                continue
            w.writerow([
                r.test_cases_so_far, _fmt(r.cell_rate), _fmt(r.gate_rate),
                _fmt(r.seq_pos_rate), _fmt(r.seq_neg_rate), r.adversarial_count,
                "" if r.mean_adversarial_perturbation is None
                else _fmt(r.mean_adversarial_perturbation),
            ])


def _write_curve_csv(report: CampaignReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["radius", "adversarial_count"])
        if report.curve_radii is not None:
            for r, c in zip(report.curve_radii, report.curve_counts):
                w.writerow([_fmt(r), c])


def _write_times_csv(report: CampaignReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["metric", "condition", "count"])
        if report.coverage_tables is not None:
            for metric, cond, count in _times_rows(report.coverage_tables):
                w.writerow([metric, cond, count])


def export(report: CampaignReport, log_path, suite=None) -> list[str]:
    """Write the record log, summary JSON, and CSV series next to log_path.

    When a test suite is given, it is serialized alongside as suite.json.
    Returns the written paths.  Exporting the same report twice produces
    byte-identical files.
    """
    log_path = os.fspath(log_path)
    out_dir = os.path.dirname(log_path) or "."
    os.makedirs(out_dir, exist_ok=True)
    _write_log(report, log_path)
    paths = [log_path]
    for name, writer in ((SUMMARY_NAME, _write_summary),
                         (COVERAGE_CSV, _write_coverage_csv),
                         (CURVE_CSV, _write_curve_csv),
                         (TIMES_CSV, _write_times_csv)):
        p = os.path.join(out_dir, name)
        writer(report, p)
        paths.append(p)
    if suite is not None:
        from .harness import save_suite

        p = os.path.join(out_dir, "suite.json")
        save_suite(suite, p)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# Log parsing (report mode)
# ---------------------------------------------------------------------------

def _parse_opt_float(token: str) -> Optional[float]:
    return None if token == "-" else float(token)


def parse_log(path) -> CampaignReport:
    """Read a record log back into a CampaignReport.

    Inverse of the log writer: export(parse_log(p), p) is byte-identical.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    section = None
    report = CampaignReport()
    sym_count = None
    sym_pos: dict[int, np.ndarray] = {}
    sym_neg: dict[int, np.ndarray] = {}
    tables: dict[str, dict[str, int]] = {"cell": {}, "gate": {}, "seq_pos": {}, "seq_neg": {}}
    saw_times = False
    radii: list[float] = []
    counts: list[int] = []
    saw_curve = False
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        try:
            if section == "config":
                key, _, value = line.partition(" = ")
                report.config[key] = value
            elif section == "symbolizer":
                if line == "none":
                    continue
                if line.startswith("symbol_count "):
                    sym_count = int(line.split()[1])
                    continue
                parts = line.split()
                sign, t, vals = parts[0], int(parts[1]), parts[2:]
                arr = np.asarray([float(v) for v in vals])
                (sym_pos if sign == "pos" else sym_neg)[t] = arr
            elif section == "records":
                parts = line.split()
                report.records.append(ReportRecord(
                    test_cases_so_far=int(parts[0]),
                    cell_rate=float(parts[1]),
                    gate_rate=float(parts[2]),
                    seq_pos_rate=float(parts[3]),
                    seq_neg_rate=float(parts[4]),
                    adversarial_count=int(parts[5]),
                    mean_adversarial_perturbation=_parse_opt_float(parts[6]),
                ))
            elif section == "coverage_times":
                metric, cond, count = line.split()
                tables[metric][cond] = int(count)
                saw_times = True
            elif section == "adversarial_curve":
                if line.startswith("auc = "):
                    report.curve_auc = float(line[len("auc = "):])
                else:
                    r, c = line.split()
                    radii.append(float(r))
                    counts.append(int(c))
                saw_curve = True
            elif section == "final":
                key, _, value = line.partition(" = ")
                if key == "attempts":
                    report.attempts = int(value)
                elif key == "valid_count":
                    report.valid_count = int(value)
                elif key == "status":
                    report.status = None if value == "-" else value
                elif key == "suite_size":
                    report.suite_size = None if value == "-" else int(value)
                # validity_yield and generated_cases are derived; ignore
            else:
                raise ValueError(f"line outside any known section: {line!r}")
        except (ValueError, IndexError) as e:
            raise ValueError(f"{path}:{lineno}: cannot parse record log: {e}") from None
    if sym_count is not None:
        report.symbolizer = Symbolizer(
            symbol_count=sym_count, boundaries_pos=sym_pos, boundaries_neg=sym_neg
        )
    if saw_times:
        report.coverage_tables = tables
    if saw_curve:
        report.curve_radii = radii
        report.curve_counts = counts
    return report
