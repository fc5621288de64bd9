"""Firm-year panel data: CSV ingestion, stratified sampling, synthetic panels.

CSV layout (UTF-8, comma separated, header row required)::

    firm_id,sector,year,labour_expense,capital_expense,interest_expense,revenue,stake_1,...,stake_N

Any non-empty subset of the three expense columns may be present. Stake
columns are optional and ragged: trailing cells may be left empty.
"""

from __future__ import annotations

import csv
import io
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dea import Dmu, Panel
from .ownership import BRACKETS, OwnershipError, ShareRegister, bracket_index, cr

INPUT_COLUMNS = ("labour_expense", "capital_expense", "interest_expense")
OUTPUT_COLUMN = "revenue"
KEY_COLUMNS = ("firm_id", "sector", "year")

SECTORS = ("ConsumerProducts", "IndustrialProducts", "Construction", "TradingServices")
SECTOR_NAMES = {
    "ConsumerProducts": "Consumer Products",
    "IndustrialProducts": "Industrial Products",
    "Construction": "Construction",
    "TradingServices": "Trading/Services",
}

_STAKE_RE = re.compile(r"stake_([1-9][0-9]*)$")


def sector_order(sector: str) -> tuple:
    """Sort key: canonical sectors first, open codes alphabetically after."""
    if sector in SECTORS:
        return (0, SECTORS.index(sector), "")
    return (1, 0, sector)


def fmt_real(value: float) -> str:
    """Shortest text that reads back as the same double."""
    return repr(float(value))


class PanelValidationError(ValueError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class FirmRecord:
    firm_id: str
    sector: str
    year: int
    inputs: dict[str, float]
    revenue: float
    stakes: tuple[float, ...] = ()

    @property
    def key(self) -> tuple[str, int]:
        return (self.firm_id, self.year)

    def register(self) -> ShareRegister:
        return ShareRegister(self.firm_id, self.year, self.stakes)


@dataclass(frozen=True)
class PanelDataset:
    records: tuple[FirmRecord, ...]
    input_columns: tuple[str, ...] = INPUT_COLUMNS

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for i, rec in enumerate(self.records):
            if rec.key in seen:
                raise PanelValidationError(f"duplicate (firm_id, year) {rec.key}", row=i + 2)
            seen.add(rec.key)
            if set(rec.inputs) != set(self.input_columns):
                raise PanelValidationError(
                    f"record {rec.key} has inputs {sorted(rec.inputs)}", row=i + 2)

    def __len__(self):
        return len(self.records)

    @property
    def firms(self) -> list[str]:
        return list(dict.fromkeys(r.firm_id for r in self.records))

    @property
    def years(self) -> list[int]:
        return sorted({r.year for r in self.records})

    @property
    def unbalanced(self) -> bool:
        years = set(self.years)
        present = defaultdict(set)
        for r in self.records:
            present[r.firm_id].add(r.year)
        return any(ys != years for ys in present.values())

    def sectors(self) -> list[str]:
        return sorted({r.sector for r in self.records}, key=sector_order)

    def firm_sectors(self) -> dict[str, str]:
        """firm_id -> sector; a firm may not switch sector between years."""
        out: dict[str, str] = {}
        for i, r in enumerate(self.records):
            if out.setdefault(r.firm_id, r.sector) != r.sector:
                raise PanelValidationError(
                    f"firm {r.firm_id!r} appears in sectors {out[r.firm_id]!r} and {r.sector!r}",
                    row=i + 2, column="sector")
        return out

    def to_panel(self, inputs: Sequence[str] | None = None) -> Panel:
        """DEA panel of firm-years, DMU ids ``firm_id:year``."""
        inputs = tuple(inputs or self.input_columns)
        for name in inputs:
            if name not in self.input_columns:
                raise PanelValidationError(f"unknown input column {name!r}")
        return Panel([
            Dmu(f"{r.firm_id}:{r.year}", [r.inputs[c] for c in inputs], [r.revenue],
                sector=r.sector, year=r.year)
            for r in self.records
        ])


def _parse_positive(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise PanelValidationError(f"unparseable number {text!r}", row, column) from None
    if not math.isfinite(value):
        raise PanelValidationError(f"non-finite value {text!r}", row, column)
    if value <= 0:
        raise PanelValidationError(f"value must be positive, got {text!r}", row, column)
    return value


def parse_panel(text: str, years: tuple[int, int] | None = None) -> PanelDataset:
    """Parse and validate panel CSV text.

    Errors name the file row (header is row 1) and the offending column.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or not any(h.strip() for h in header):
        raise PanelValidationError("header row missing")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise PanelValidationError("duplicate column in header", row=1)
    for col in KEY_COLUMNS + (OUTPUT_COLUMN,):
        if col not in header:
            raise PanelValidationError("missing column", row=1, column=col)
    input_cols = tuple(c for c in INPUT_COLUMNS if c in header)
    if not input_cols:
        raise PanelValidationError(
            f"no input column; expected at least one of {', '.join(INPUT_COLUMNS)}", row=1)
    stake_cols = []
    for col in header:
        if col in KEY_COLUMNS + INPUT_COLUMNS + (OUTPUT_COLUMN,):
            continue
        m = _STAKE_RE.match(col)
        if not m:
            raise PanelValidationError("unknown column", row=1, column=col)
        stake_cols.append((int(m.group(1)), col))
    stake_cols.sort()
    if [n for n, _ in stake_cols] != list(range(1, len(stake_cols) + 1)):
        raise PanelValidationError("stake columns must be stake_1..stake_N without gaps", row=1)
    pos = {c: i for i, c in enumerate(header)}

    records = []
    seen: dict[tuple, int] = {}
    for cells in reader:
        row = reader.line_num
        if not any(c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise PanelValidationError(
                f"expected {len(header)} fields, found {len(cells)}", row)
        get = lambda col: cells[pos[col]].strip()
        firm_id, sector = get("firm_id"), get("sector")
        if not firm_id:
            raise PanelValidationError("empty firm_id", row, "firm_id")
        if not sector:
            raise PanelValidationError("empty sector", row, "sector")
        try:
            year = int(get("year"))
        except ValueError:
            raise PanelValidationError(f"unparseable year {get('year')!r}", row, "year") from None
        if years is not None and not years[0] <= year <= years[1]:
            raise PanelValidationError(f"year {year} outside {years[0]}-{years[1]}", row, "year")
        if (firm_id, year) in seen:
            raise PanelValidationError(
                f"duplicate (firm_id, year) ({firm_id}, {year}); first seen on row "
                f"{seen[(firm_id, year)]}", row, "firm_id")
        seen[(firm_id, year)] = row
        inputs = {}
        for col in input_cols:
            if not get(col):
                raise PanelValidationError("missing value", row, col)
            inputs[col] = _parse_positive(get(col), row, col)
        if not get(OUTPUT_COLUMN):
            raise PanelValidationError("missing value", row, OUTPUT_COLUMN)
        revenue = _parse_positive(get(OUTPUT_COLUMN), row, OUTPUT_COLUMN)
        stakes = []
        gap = None
        for _, col in stake_cols:
            cell = get(col)
            if not cell:
                gap = gap or col
                continue
            if gap:
                raise PanelValidationError(f"stake after empty {gap}", row, col)
            value = _parse_positive(cell, row, col)
            if value > 100:
                raise PanelValidationError(f"stake {cell} exceeds 100%", row, col)
            stakes.append(value)
        if math.fsum(stakes) > 100 + 1e-6:
            raise PanelValidationError("stakes sum to more than 100%", row, stake_cols[0][1])
        records.append(FirmRecord(firm_id, sector, year, inputs, revenue, tuple(stakes)))
    return PanelDataset(records, input_cols)


def render_panel(dataset: PanelDataset) -> str:
    n_stakes = max((len(r.stakes) for r in dataset.records), default=0)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(KEY_COLUMNS) + list(dataset.input_columns) + [OUTPUT_COLUMN]
                    + [f"stake_{i}" for i in range(1, n_stakes + 1)])
    for r in dataset.records:
        stakes = [fmt_real(s) for s in r.stakes] + [""] * (n_stakes - len(r.stakes))
        writer.writerow([r.firm_id, r.sector, r.year]
                        + [fmt_real(r.inputs[c]) for c in dataset.input_columns]
                        + [fmt_real(r.revenue)] + stakes)
    return out.getvalue()


def read_panel(path: str | Path, years: tuple[int, int] | None = None) -> PanelDataset:
    return parse_panel(Path(path).read_text(encoding="utf-8"), years)


def write_panel(dataset: PanelDataset, path: str | Path) -> None:
    Path(path).write_text(render_panel(dataset), encoding="utf-8")


# -- stratified sampling ---------------------------------------------------

@dataclass(frozen=True)
class StrataAllocation:
    labels: tuple[str, ...]
    weights: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_dict(self) -> dict[str, int]:
        return dict(zip(self.labels, self.counts))


def allocate_strata(total: int, weights: Sequence[float],
                    labels: Sequence[str] | None = None) -> StrataAllocation:
    """Largest-remainder rounding of ``total * weight`` per stratum.

    Leftover units go to the largest fractional parts; equal remainders are
    resolved in stratum order.
    """
    if isinstance(total, bool) or int(total) != total or total < 1:
        raise ValueError(f"total must be a positive integer, got {total!r}")
    total = int(total)
    weights = tuple(float(w) for w in weights)
    if not weights:
        raise ValueError("no strata")
    if any(w < 0 or not math.isfinite(w) for w in weights):
        raise ValueError("weights must be nonnegative")
    if abs(math.fsum(weights) - 1.0) > 1e-6:
        raise ValueError(f"weights sum to {math.fsum(weights):.9g}, expected 1")
    labels = tuple(labels) if labels is not None else tuple(f"stratum_{i + 1}" for i in range(len(weights)))
    if len(labels) != len(weights):
        raise ValueError("labels and weights differ in length")
    quotas = [total * w for w in weights]
    counts = [math.floor(q) for q in quotas]
    remainders = [round(q - c, 9) for q, c in zip(quotas, counts)]
    order = sorted(range(len(weights)), key=lambda i: (-remainders[i], i))
    for i in order[:total - sum(counts)]:
        counts[i] += 1
    return StrataAllocation(labels, weights, tuple(counts))


def sample_strata(population: PanelDataset, allocation: StrataAllocation,
                  seed: int = 0) -> PanelDataset:
    """Draw firms uniformly without replacement inside each sector stratum.

    Every record of a drawn firm is kept, in population order.
    """
    sectors = population.firm_sectors()
    by_sector: dict[str, list[str]] = defaultdict(list)
    for firm, sector in sectors.items():
        by_sector[sector].append(firm)
    rng = np.random.default_rng(seed)
    chosen = set()
    for label, count in zip(allocation.labels, allocation.counts):
        firms = by_sector.get(label, [])
        if count > len(firms):
            raise ValueError(
                f"stratum {label!r} has {len(firms)} firms, cannot draw {count}")
        picks = rng.choice(len(firms), size=count, replace=False) if count else []
        chosen.update(firms[i] for i in picks)
    return PanelDataset([r for r in population.records if r.firm_id in chosen],
                        population.input_columns)


# -- synthetic panels -------------------------------------------------------

DEFAULT_SECTOR_SIZES = {
    "ConsumerProducts": 29,
    "IndustrialProducts": 57,
    "Construction": 12,
    "TradingServices": 58,
}

# Firm counts per ownership bracket (≤10, 11–30, 31–50, 51–70, 71–90, >90).
DEFAULT_CR1_TARGETS = {
    "ConsumerProducts": (1, 9, 15, 4, 0, 0),
    "IndustrialProducts": (2, 28, 20, 7, 0, 0),
    "Construction": (1, 8, 3, 0, 0, 0),
    "TradingServices": (6, 24, 18, 9, 1, 0),
}
DEFAULT_CR2_TARGETS = {
    "ConsumerProducts": (0, 3, 10, 13, 3, 0),
    "IndustrialProducts": (1, 16, 23, 14, 3, 0),
    "Construction": (0, 4, 6, 2, 0, 0),
    "TradingServices": (0, 17, 18, 18, 5, 0),
}
DEFAULT_CR4_TARGETS = {
    "ConsumerProducts": (0, 1, 9, 15, 4, 0),
    "IndustrialProducts": (0, 2, 28, 20, 7, 0),
    "Construction": (0, 1, 8, 3, 0, 0),
    "TradingServices": (0, 6, 24, 18, 9, 1),
}


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for :func:`generate_synthetic`.

    Frontier firms sit on the isoquant prod(x_i / (c * y)) = 1, so every one
    of them is CRS- and VRS-efficient whatever the grouping. Other firms copy
    the input mix of a frontier firm of their sector, inflated by a factor
    drawn from ``inefficiency``, which fixes their CRS score at 1/factor.
    """

    sector_sizes: Mapping[str, int] = field(default_factory=lambda: dict(DEFAULT_SECTOR_SIZES))
    years: tuple[int, int] = (2000, 2010)
    frontier_per_sector: int = 3
    inefficiency: tuple[float, float] = (1.25, 8.0)
    missing_rate: float = 0.1
    stake_targets: Mapping[int, Mapping[str, Sequence[int]]] | None = None
    input_columns: tuple[str, ...] = INPUT_COLUMNS

    def targets(self) -> dict[int, dict[str, Sequence[int]]]:
        """Bracket targets per k; by default the built-in tables for any sector
        whose size matches them. Firms without a target get random stakes."""
        if self.stake_targets is not None:
            return {k: dict(v) for k, v in self.stake_targets.items()}
        defaults = {1: DEFAULT_CR1_TARGETS, 2: DEFAULT_CR2_TARGETS, 4: DEFAULT_CR4_TARGETS}
        return {k: {s: counts for s, counts in table.items()
                    if self.sector_sizes.get(s) == DEFAULT_SECTOR_SIZES[s]}
                for k, table in defaults.items()}

    def validate(self) -> None:
        if not self.sector_sizes:
            raise ValueError("synthetic spec has no sectors; dataset would be empty")
        if self.years[0] > self.years[1]:
            raise ValueError("year range is empty")
        lo, hi = self.inefficiency
        if not 1.0 < lo <= hi:
            raise ValueError("inefficiency factors must exceed 1")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")
        if not self.input_columns or not set(self.input_columns) <= set(INPUT_COLUMNS):
            raise ValueError(f"input columns must be a non-empty subset of {INPUT_COLUMNS}")
        for sector, size in self.sector_sizes.items():
            if size < 1:
                raise ValueError(f"sector {sector!r} must have at least one firm")
            if not 1 <= self.frontier_per_sector <= size:
                raise ValueError(f"sector {sector!r}: frontier_per_sector must be in 1..{size}")
        targets = self.targets()
        for k, per_sector in targets.items():
            if k not in (1, 2, 4):
                raise ValueError(f"stake targets only supported for k in 1, 2, 4 (got {k})")
            for sector, counts in per_sector.items():
                if sector not in self.sector_sizes:
                    raise ValueError(f"stake targets for unknown sector {sector!r}")
                if len(counts) != len(BRACKETS) or any(c < 0 for c in counts):
                    raise ValueError(f"k={k}, {sector}: need {len(BRACKETS)} nonnegative counts")
                if sum(counts) > self.sector_sizes[sector]:
                    raise ValueError(
                        f"k={k}, {sector}: bracket counts {sum(counts)} exceed sector size "
                        f"{self.sector_sizes[sector]}")
        for sector in self.sector_sizes:
            totals = {sum(t[sector]) for t in targets.values() if sector in t}
            if len(totals) > 1:
                raise ValueError(f"{sector}: stake targets disagree on the number of firms")


def _round12(value: float) -> float:
    return float(format(value, ".12g"))


_FRACTIONS = (0.15, 0.3, 0.5, 0.7, 0.85)


def _candidates(lo: float, hi: float, bracket: int | None, rng) -> list[float]:
    if bracket is not None:
        lo, hi = max(lo, BRACKETS[bracket].lower), min(hi, BRACKETS[bracket].upper)
    if hi <= lo:
        return []
    values = [round(lo + (hi - lo) * f, 2) for f in _FRACTIONS]
    rng.shuffle(values)
    return values


def plant_stakes(targets: Mapping[int, int], rng) -> tuple[float, ...]:
    """Stakes whose CR_k lands in bracket ``targets[k]`` for each given k.

    Searches CR1 <= CR2 <= CR4 values with s2 <= s1 and s3 = s4 <= s2.
    """
    # CR_k / k <= CR1 <= CR_k bounds the search for CR1
    lo1, hi1 = 0.0, 100.0
    for k, b in targets.items():
        lo1, hi1 = max(lo1, BRACKETS[b].lower / k), min(hi1, BRACKETS[b].upper)
    for c1 in _candidates(lo1, hi1, targets.get(1), rng):
        for c2 in _candidates(c1 + 0.01, min(2 * c1, 100.0), targets.get(2), rng):
            for c4 in _candidates(c2 + 0.01, min(c2 + 2 * (c2 - c1), 100.0), targets.get(4), rng):
                s3 = round((c4 - c2) / 2, 4)
                stakes = tuple(s for s in (c1, round(c2 - c1, 2), s3, s3) if s > 0)
                reg = ShareRegister("probe", None, stakes)
                try:
                    if all(bracket_index(cr(reg, k).value) == b for k, b in targets.items()):
                        return stakes
                except OwnershipError:
                    continue
    raise ValueError(f"no stake register satisfies bracket targets {dict(targets)}")


def generate_synthetic(spec: SynthSpec | None = None, seed: int = 0) -> PanelDataset:
    spec = spec or SynthSpec()
    spec.validate()
    all_targets = spec.targets()
    rng = np.random.default_rng(seed)
    m = len(spec.input_columns)
    y0, y1 = spec.years
    years = range(y0, y1 + 1)
    records = []
    for sector, size in spec.sector_sizes.items():
        mixes = []
        for _ in range(spec.frontier_per_sector):
            u = rng.normal(0.0, 0.5, m)
            mixes.append(np.exp(u - u.mean()))
        firms = []
        for i in range(size):
            frontier = i < spec.frontier_per_sector
            firm_id = f"{sector}-{'E' if frontier else 'F'}{i + 1:03d}"
            mix = mixes[i] if frontier else mixes[rng.integers(spec.frontier_per_sector)]
            firms.append((firm_id, frontier, mix))

        stake_map = {}
        targets = {k: t[sector] for k, t in all_targets.items() if sector in t}
        if not targets:
            for firm_id, _, _ in firms:
                stake_map[firm_id] = plant_stakes({}, rng)
        else:
            n_reg = sum(next(iter(targets.values())))
            sorted_brackets = {k: sorted(b for b, c in enumerate(counts) for _ in range(c))
                               for k, counts in targets.items()}
            holders = rng.permutation(size)[:n_reg]
            for t, idx in enumerate(sorted(holders)):
                stake_map[firms[idx][0]] = plant_stakes(
                    {k: sorted_brackets[k][t] for k in targets}, rng)

        for firm_id, frontier, mix in firms:
            present = [yr for yr in years
                       if frontier or rng.random() >= spec.missing_rate]
            if not present:
                present = [int(rng.choice(list(years)))]
            for yr in present:
                revenue = _round12(float(np.exp(rng.normal(np.log(5e5), 1.0))))
                factor = 1.0 if frontier else rng.uniform(*spec.inefficiency)
                x = factor * 0.3 * revenue * mix
                records.append(FirmRecord(
                    firm_id, sector, yr,
                    {c: _round12(float(v)) for c, v in zip(spec.input_columns, x)},
                    revenue, stake_map.get(firm_id, ())))
    return PanelDataset(records, tuple(spec.input_columns))


def is_planted_frontier(firm_id: str) -> bool:
    return re.search(r"-E\d+$", firm_id) is not None
