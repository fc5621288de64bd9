"""Ownership frequency tables, score statistics and their renderings."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .dea import EfficiencyResult, Rts
from .ownership import BRACKET_LABELS, BRACKETS, ShareRegister, bracket_index, cr
from .panel import SECTOR_NAMES, PanelDataset, fmt_real, sector_order

FORMATS = ("text", "csv", "json")
MODE_LABELS = {Rts.CRS: "CRS", Rts.VRS: "VRS"}


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyTable:
    k: int
    rows: dict[str, tuple[int, ...]]
    skipped: tuple[str, ...] = ()

    @property
    def sectors(self) -> list[str]:
        return sorted(self.rows, key=sector_order)

    @property
    def row_totals(self) -> dict[str, int]:
        return {s: sum(c) for s, c in self.rows.items()}

    @property
    def column_totals(self) -> tuple[int, ...]:
        if not self.rows:
            return (0,) * len(BRACKETS)
        return tuple(int(v) for v in np.sum(list(self.rows.values()), axis=0))

    @property
    def grand_total(self) -> int:
        return sum(self.row_totals.values())


@dataclass(frozen=True)
class DescriptiveStats:
    group: str
    mode: str
    mean: float
    std_dev: float
    min: float
    max: float


def latest_registers(dataset: PanelDataset, year: int | None = None
                     ) -> tuple[list[tuple[str, ShareRegister]], list[str]]:
    """One register per firm: its latest year with stakes, or ``year`` if given.

    Returns ``(entries, skipped_firm_ids)``.
    """
    best: dict[str, tuple[int, str, ShareRegister]] = {}
    for rec in dataset.records:
        if not rec.stakes or (year is not None and rec.year != year):
            continue
        if rec.firm_id not in best or rec.year > best[rec.firm_id][0]:
            best[rec.firm_id] = (rec.year, rec.sector, rec.register())
    entries = [(best[f][1], best[f][2]) for f in dataset.firms if f in best]
    skipped = [f for f in dataset.firms if f not in best]
    return entries, skipped


def frequency_table(entries: Iterable[tuple[str, ShareRegister]], k: int,
                    skipped: Sequence[str] = ()) -> FrequencyTable:
    """Count firms per (sector, CR_k bracket).

    Registers with no stakes are left out and listed in ``skipped``.
    """
    counts: dict[str, list[int]] = defaultdict(lambda: [0] * len(BRACKETS))
    skipped = list(skipped)
    for sector, register in entries:
        if not register.stakes:
            skipped.append(str(register.firm_id))
            continue
        counts[sector][bracket_index(cr(register, k).value)] += 1
    rows = {s: tuple(counts[s]) for s in sorted(counts, key=sector_order)}
    return FrequencyTable(k, rows, tuple(skipped))


def describe(results: Sequence[EfficiencyResult]) -> list[DescriptiveStats]:
    """Mean, sample std (n-1), min and max of theta* per sector and RTS mode.

    Ordered like a stacked table: CRS block first, sectors within a block.
    """
    if not results:
        raise ReportError("no efficiency results to describe")
    groups: dict[tuple[Rts, str], list[float]] = defaultdict(list)
    for r in results:
        groups[(r.rts, r.sector or "all")].append(r.theta_star)
    out = []
    order = sorted(groups, key=lambda g: (list(Rts).index(g[0]), sector_order(g[1])))
    for rts, sector in order:
        scores = np.array(groups[(rts, sector)])
        std = float(scores.std(ddof=1)) if scores.size > 1 else 0.0
        out.append(DescriptiveStats(sector, MODE_LABELS[rts], float(scores.mean()), std,
                                    float(scores.min()), float(scores.max())))
    return out


# -- rendering ---------------------------------------------------------------

def _title(k: int) -> str:
    who = "the single largest shareholder" if k == 1 else f"the top {k} largest shareholders"
    return f"Frequency distribution of ownership structure (share controlled by {who})"


def _csv(rows: Iterable[Sequence]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerows(rows)
    return out.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _render_frequency(table: FrequencyTable, fmt: str) -> str:
    if fmt == "csv":
        rows = [["k", "sector", *BRACKET_LABELS, "total"]]
        for s in table.sectors:
            rows.append([table.k, s, *table.rows[s], sum(table.rows[s])])
        rows.append([table.k, "Total", *table.column_totals, table.grand_total])
        return _csv(rows)
    if fmt == "json":
        return _json({
            "k": table.k,
            "brackets": list(BRACKET_LABELS),
            "rows": {s: list(c) for s, c in table.rows.items()},
            "column_totals": list(table.column_totals),
            "grand_total": table.grand_total,
            "skipped": list(table.skipped),
        })
    name_w = max([len("Sector of Firms"), len("Total")]
                 + [len(SECTOR_NAMES.get(s, s)) for s in table.sectors])
    col_w = max(len(label) for label in BRACKET_LABELS) + 2
    lines = [f"CR{table.k}: {_title(table.k)}"]
    header = "Sector of Firms".ljust(name_w) + "".join(label.rjust(col_w) for label in BRACKET_LABELS)
    lines.append(header + "Total".rjust(col_w))
    lines.append("-" * len(lines[-1]))
    for s in table.sectors:
        cells = "".join(str(c).rjust(col_w) for c in table.rows[s])
        lines.append(SECTOR_NAMES.get(s, s).ljust(name_w) + cells + str(sum(table.rows[s])).rjust(col_w))
    lines.append("-" * len(header + "Total".rjust(col_w)))
    cells = "".join(str(c).rjust(col_w) for c in table.column_totals)
    lines.append("Total".ljust(name_w) + cells + str(table.grand_total).rjust(col_w))
    lines.append(f"Skipped firms (no disclosed stakes): {len(table.skipped)}")
    return "\n".join(lines) + "\n"


STATS_HEADER = ["group", "mode", "mean", "std_dev", "min", "max"]


def _render_stats(stats: Sequence[DescriptiveStats], fmt: str) -> str:
    if fmt == "csv":
        rows = [STATS_HEADER]
        for s in stats:
            rows.append([s.group, s.mode] + [fmt_real(v) for v in (s.mean, s.std_dev, s.min, s.max)])
        return _csv(rows)
    if fmt == "json":
        return _json([asdict(s) for s in stats])
    name_w = max([len("Sector of Firm")] + [len(SECTOR_NAMES.get(s.group, s.group)) for s in stats])
    lines = ["Descriptive statistics of estimated efficiency scores",
             "Variable    " + "Sector of Firm".ljust(name_w) + "".join(
                 h.rjust(10) for h in ("Mean", "Std. Dev", "Min", "Max"))]
    lines.append("-" * len(lines[-1]))
    previous = None
    for s in stats:
        variable = f"EFF_{s.mode}" if s.mode != previous else ""
        previous = s.mode
        lines.append(variable.ljust(12) + SECTOR_NAMES.get(s.group, s.group).ljust(name_w)
                     + "".join(f"{v:10.3f}" for v in (s.mean, s.std_dev, s.min, s.max)))
    return "\n".join(lines) + "\n"


SCORE_HEADER = ["dmu_id", "sector", "year", "group", "rts", "theta", "efficient", "peers"]


def _render_scores(results: Sequence[EfficiencyResult], fmt: str) -> str:
    def peers(r):
        return ";".join(f"{k}={fmt_real(w)}" for k, w in r.lambdas.items())

    if fmt == "csv":
        rows = [SCORE_HEADER]
        for r in results:
            rows.append([r.dmu_id, r.sector or "", "" if r.year is None else r.year,
                         "|".join(str(g) for g in r.group_key) or "pooled",
                         MODE_LABELS[r.rts], fmt_real(r.theta_star), int(r.efficient), peers(r)])
        return _csv(rows)
    if fmt == "json":
        return _json([{
            "dmu_id": str(r.dmu_id), "sector": r.sector, "year": r.year,
            "group": [str(g) for g in r.group_key], "rts": MODE_LABELS[r.rts],
            "theta": float(r.theta_star), "efficient": r.efficient,
            "peers": {str(k): float(w) for k, w in r.lambdas.items()},
        } for r in results])
    id_w = max([len("DMU")] + [len(str(r.dmu_id)) for r in results])
    lines = ["DMU".ljust(id_w) + "  RTS    theta  eff  peers"]
    for r in results:
        lines.append(f"{str(r.dmu_id).ljust(id_w)}  {MODE_LABELS[r.rts]}  {r.theta_star:7.4f}  "
                     f"{'yes' if r.efficient else 'no ':3}  "
                     + ", ".join(f"{k} ({w:.3f})" for k, w in r.lambdas.items()))
    return "\n".join(lines) + "\n"


def render(obj, fmt: str = "text") -> str:
    """Render a FrequencyTable, DescriptiveStats list or EfficiencyResult list."""
    if fmt not in FORMATS:
        raise ReportError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
    if isinstance(obj, FrequencyTable):
        return _render_frequency(obj, fmt)
    items = list(obj)
    if items and all(isinstance(i, DescriptiveStats) for i in items):
        return _render_stats(items, fmt)
    if items and all(isinstance(i, EfficiencyResult) for i in items):
        return _render_scores(items, fmt)
    raise ReportError(f"cannot render {type(obj).__name__}")


# -- parsing back ------------------------------------------------------------

def parse_stats_csv(text: str) -> list[DescriptiveStats]:
    reader = csv.reader(io.StringIO(text))
    if next(reader, None) != STATS_HEADER:
        raise ReportError(f"expected header {','.join(STATS_HEADER)}")
    return [DescriptiveStats(g, m, *(float(v) for v in rest)) for g, m, *rest in reader]


def parse_stats_json(text: str) -> list[DescriptiveStats]:
    return [DescriptiveStats(**item) for item in json.loads(text)]


def parse_frequency_csv(text: str) -> FrequencyTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["k", "sector", *BRACKET_LABELS, "total"]:
        raise ReportError("not a frequency-table CSV")
    rows, k = {}, None
    for line in reader:
        k = int(line[0])
        if line[1] == "Total":
            continue
        counts = tuple(int(c) for c in line[2:-1])
        if sum(counts) != int(line[-1]):
            raise ReportError(f"row total mismatch for {line[1]}")
        rows[line[1]] = counts
    if k is None:
        raise ReportError("empty frequency table")
    return FrequencyTable(k, rows)
