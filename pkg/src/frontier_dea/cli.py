"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or arguments, 2 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from pathlib import Path

from .dea import CLASSIFICATION_TOLERANCE, DeaConsistencyError, GroupingRule, Rts, score_all
from .lp_core import LpNumericalError
from .panel import (
    DEFAULT_SECTOR_SIZES, INPUT_COLUMNS, PanelDataset, SynthSpec, allocate_strata,
    generate_synthetic, read_panel, render_panel, sample_strata, sector_order,
)
from .report import FORMATS, describe, frequency_table, latest_registers, render

TOLERANCE_ENV = "FRONTIER_DEA_TOLERANCE"
DEFAULT_SEED = 0
EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; that code is reserved here
    def error(self, message):
        raise UsageError(message)


def _year_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("-")
    try:
        lo, hi = int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YEAR or FIRST-LAST, got {text!r}")
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty year range {text!r}")
    return lo, hi


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _sector_sizes(text: str) -> dict[str, int]:
    sizes = {}
    for item in _csv_list(text):
        name, _, count = item.partition("=")
        try:
            sizes[name.strip()] = int(count)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected SECTOR=COUNT, got {item!r}")
    return sizes


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frontier-dea", description="DEA efficiency and ownership concentration on firm panels.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, with_input=True):
        if with_input:
            p.add_argument("input", help="panel CSV file")
            p.add_argument("--years", type=_year_range, help="accepted year range, e.g. 2000-2010")
        p.add_argument("--format", choices=FORMATS, default="text")
        p.add_argument("--out", help="write here instead of stdout")
        p.add_argument("--seed", type=_seed, default=DEFAULT_SEED)
        return p

    def scoring(p):
        p.add_argument("--group-by", choices=[g.value for g in GroupingRule], default="sector")
        p.add_argument("--inputs", type=_csv_list, help="input columns to use (default: all present)")
        p.add_argument("--tolerance", type=float,
                       help=f"efficiency tolerance (default {CLASSIFICATION_TOLERANCE:g}, or ${TOLERANCE_ENV})")

    p = common(sub.add_parser("score", help="efficiency score per firm-year"))
    p.add_argument("--rts", choices=[r.value for r in Rts], default="crs")
    p.add_argument("--summary", action="store_true", help="append per-sector statistics (text format)")
    scoring(p)

    p = common(sub.add_parser("describe", help="score statistics per sector under CRS and VRS"))
    scoring(p)

    p = common(sub.add_parser("ownership", help="CR_k bracket frequency tables"))
    p.add_argument("--k", type=int, choices=(1, 2, 4), help="one table only (default: 1, 2 and 4)")
    p.add_argument("--year", type=int, help="use this year's registers instead of each firm's latest")

    p = common(sub.add_parser("sample", help="stratified random sample of firms"))
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--weights", type=_floats, required=True)
    p.add_argument("--strata", type=_csv_list,
                   help="sector for each weight (default: sectors by descending firm count)")

    p = common(sub.add_parser("synth", help="write a synthetic panel with a known frontier"), with_input=False)
    p.add_argument("--sectors", type=_sector_sizes, help="SECTOR=COUNT,... (default: 156 firms in 4 sectors)")
    p.add_argument("--years", type=_year_range, default=(2000, 2010))
    p.add_argument("--frontier", type=int, default=3, help="frontier firms per sector")
    p.add_argument("--inputs", type=_csv_list, default=list(INPUT_COLUMNS))

    common(sub.add_parser("validate", help="check a panel file and summarise it"))
    return parser


def _tolerance(args) -> float:
    tol = args.tolerance
    if tol is None:
        env = os.environ.get(TOLERANCE_ENV)
        try:
            tol = float(env) if env else CLASSIFICATION_TOLERANCE
        except ValueError:
            raise UsageError(f"{TOLERANCE_ENV}={env!r} is not a number")
    if not tol > 0:
        raise UsageError(f"tolerance must be positive, got {tol!r}")
    return tol


def _load(args) -> PanelDataset:
    return read_panel(args.input, args.years)


def _score(args, dataset: PanelDataset, rts: Rts):
    panel = dataset.to_panel(args.inputs)
    return score_all(panel, rts, GroupingRule(args.group_by), _tolerance(args))


def cmd_score(args) -> str:
    dataset = _load(args)
    results = _score(args, dataset, Rts(args.rts))
    text = render(results, args.format)
    if args.summary:
        if args.format != "text":
            raise UsageError("--summary is only available with --format text")
        text += "\n" + render(describe(results), "text")
    return text


def cmd_describe(args) -> str:
    dataset = _load(args)
    results = _score(args, dataset, Rts.CRS) + _score(args, dataset, Rts.VRS)
    return render(describe(results), args.format)


def cmd_ownership(args) -> str:
    entries, skipped = latest_registers(_load(args), args.year)
    if not entries:
        raise UsageError("no firm has disclosed stakes" + (f" in {args.year}" if args.year else ""))
    orders = [args.k] if args.k else [1, 2, 4]
    tables = [frequency_table(entries, k, skipped) for k in orders]
    if args.format == "json" and len(tables) > 1:
        return "[\n" + ",\n".join(render(t, "json").rstrip("\n") for t in tables) + "\n]\n"
    sep = "" if args.format == "csv" else "\n"
    parts = [render(t, args.format) for t in tables]
    if args.format == "csv":
        # one header for the stacked tables
        parts = parts[:1] + [p.split("\n", 1)[1] for p in parts[1:]]
    return sep.join(parts)


def cmd_sample(args) -> str:
    population = _load(args)
    sizes = Counter(population.firm_sectors().values())
    labels = args.strata or sorted(sizes, key=lambda s: (-sizes[s], sector_order(s)))
    if len(labels) != len(args.weights):
        raise UsageError(f"{len(args.weights)} weights for {len(labels)} strata {labels}")
    allocation = allocate_strata(args.total, args.weights, labels)
    return render_panel(sample_strata(population, allocation, args.seed))


def cmd_synth(args) -> str:
    spec = SynthSpec(sector_sizes=args.sectors or dict(DEFAULT_SECTOR_SIZES), years=args.years,
                     frontier_per_sector=args.frontier, input_columns=tuple(args.inputs))
    return render_panel(generate_synthetic(spec, args.seed))


def cmd_validate(args) -> str:
    ds = _load(args)
    sizes = Counter(ds.firm_sectors().values())
    with_stakes = len({r.firm_id for r in ds.records if r.stakes})
    years = ds.years
    lines = [
        f"records: {len(ds)}",
        f"firms: {len(ds.firms)} ({with_stakes} with disclosed stakes)",
        f"years: {years[0]}-{years[-1]}" + (" (unbalanced)" if ds.unbalanced else ""),
        "inputs: " + ", ".join(ds.input_columns),
    ]
    lines += [f"  {s}: {sizes[s]} firms" for s in sorted(sizes, key=sector_order)]
    return "\n".join(lines) + "\n"


COMMANDS = {
    "score": cmd_score, "describe": cmd_describe, "ownership": cmd_ownership,
    "sample": cmd_sample, "synth": cmd_synth, "validate": cmd_validate,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        output = COMMANDS[args.command](args)
        if args.out:
            Path(args.out).write_text(output, encoding="utf-8")
        else:
            sys.stdout.write(output)
        return EXIT_OK
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
    except (DeaConsistencyError, LpNumericalError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
