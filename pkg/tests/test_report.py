import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frontier_dea.dea import EfficiencyResult, Rts
from frontier_dea.ownership import ShareRegister
from frontier_dea.panel import (
    DEFAULT_CR1_TARGETS, DEFAULT_CR2_TARGETS, SynthSpec, generate_synthetic, parse_panel,
)
from frontier_dea.report import (
    FrequencyTable, ReportError, describe, frequency_table,
    latest_registers, parse_frequency_csv, parse_stats_csv, parse_stats_json, render,
)
from oracles import naive_stats


def result(theta, sector="Construction", rts=Rts.CRS, dmu="D"):
    return EfficiencyResult(dmu, theta, {dmu: 1.0}, theta >= 1 - 1e-6, rts, (sector,), sector, 2000)


def test_single_firm_table():
    table = frequency_table([("Construction", ShareRegister("F1", 2000, [40.0]))], k=1)
    assert table.rows == {"Construction": (0, 0, 1, 0, 0, 0)}
    assert table.grand_total == 1


def test_no_stakes_goes_to_skipped():
    table = frequency_table([("Construction", ShareRegister("F1", 2000, []))], k=1, skipped=["F0"])
    assert table.skipped == ("F0", "F1")
    assert table.grand_total == 0


def test_latest_year_rule():
    text = ("firm_id,sector,year,labour_expense,revenue,stake_1\n"
            "F1,Construction,2000,1,1,60\n"
            "F1,Construction,2003,1,1,20\n"
            "F1,Construction,2004,1,1,\n"
            "F2,Construction,2004,1,1,\n")
    ds = parse_panel(text)
    entries, skipped = latest_registers(ds)
    assert [(s, r.year, r.stakes) for s, r in entries] == [("Construction", 2003, (20.0,))]
    assert skipped == ["F2"]
    entries, skipped = latest_registers(ds, year=2000)
    assert entries[0][1].stakes == (60.0,)


def default_fixture(k_targets):
    spec = SynthSpec(years=(2010, 2010), stake_targets=k_targets)
    return latest_registers(generate_synthetic(spec, seed=4))


def test_cr1_fixture_row_and_totals():
    entries, skipped = default_fixture({1: DEFAULT_CR1_TARGETS})
    table = frequency_table(entries, 1, skipped)
    assert table.rows["ConsumerProducts"][:5] == (1, 9, 15, 4, 0)
    assert table.row_totals["ConsumerProducts"] == 29
    assert table.column_totals[:5] == (10, 69, 56, 20, 1)
    assert table.grand_total == 156


def test_cr2_fixture_totals():
    entries, skipped = default_fixture({2: DEFAULT_CR2_TARGETS})
    table = frequency_table(entries, 2, skipped)
    assert table.column_totals[:5] == (1, 40, 57, 47, 11)


def test_describe_two_scores():
    (stats,) = describe([result(0.5), result(1.0)])
    assert stats.mean == pytest.approx(0.75)
    assert stats.std_dev == pytest.approx(0.3535533906, abs=1e-10)
    assert (stats.min, stats.max) == (0.5, 1.0)
    assert stats.mode == "CRS" and stats.group == "Construction"


def test_describe_singleton_and_efficient_group():
    (one,) = describe([result(0.3)])
    assert (one.mean, one.std_dev, one.min, one.max) == (0.3, 0.0, 0.3, 0.3)
    (eff,) = describe([result(1.0), result(1.0), result(1.0)])
    assert (eff.mean, eff.std_dev) == (1.0, 0.0)
    with pytest.raises(ReportError):
        describe([])


def test_describe_grouping_order():
    stats = describe([result(0.5, "TradingServices", Rts.VRS), result(0.4, "ConsumerProducts"),
                      result(0.9, "TradingServices")])
    assert [(s.mode, s.group) for s in stats] == [
        ("CRS", "ConsumerProducts"), ("CRS", "TradingServices"), ("VRS", "TradingServices")]


@settings(max_examples=100)
@given(st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=60))
def test_describe_matches_two_pass(scores):
    (s,) = describe([result(v) for v in scores])
    mean, std, lo, hi = naive_stats(scores)
    assert abs(s.mean - mean) <= 1e-12
    assert abs(s.std_dev - std) <= 1e-12
    assert (s.min, s.max) == (lo, hi)
    assert s.min <= s.mean + 1e-15 and s.mean <= s.max + 1e-15


def sample_table():
    return FrequencyTable(1, {"ConsumerProducts": (1, 9, 15, 4, 0, 0),
                              "Construction": (1, 8, 3, 0, 0, 0)}, ("X",))


def test_frequency_text_total_row():
    text = render(sample_table(), "text")
    lines = text.splitlines()
    total = next(line for line in lines if line.startswith("Total"))
    assert total.split()[1:] == ["2", "17", "18", "4", "0", "0", "41"]
    assert "Consumer Products" in text and "Skipped firms (no disclosed stakes): 1" in text


def test_frequency_csv_round_trip():
    text = render(sample_table(), "csv")
    assert text.splitlines()[0] == "k,sector,≤10,11–30,31–50,51–70,71–90,>90,total"
    assert render(parse_frequency_csv(text), "csv") == text
    data = json.loads(render(sample_table(), "json"))
    assert data["column_totals"] == [2, 17, 18, 4, 0, 0] and data["grand_total"] == 41


def test_stats_renderings():
    stats = describe([result(0.5), result(1.0), result(0.25, rts=Rts.VRS)])
    text = render(stats, "csv")
    assert text.splitlines()[0] == "group,mode,mean,std_dev,min,max"
    assert render(parse_stats_csv(text), "csv") == text
    js = render(stats, "json")
    assert render(parse_stats_json(js), "json") == js
    assert parse_stats_json(js) == stats
    assert parse_stats_csv(text) == stats
    table = render(stats, "text")
    assert "0.750" in table and "0.354" in table


def test_score_listing():
    results = [result(1.0, dmu="A"), result(0.5, dmu="B")]
    rows = list(csv.DictReader(io.StringIO(render(results, "csv"))))
    assert rows[1]["theta"] == "0.5" and rows[1]["efficient"] == "0"
    assert json.loads(render(results, "json"))[0]["peers"] == {"A": 1.0}
    assert "B" in render(results, "text")


def test_render_errors():
    with pytest.raises(ReportError):
        render(sample_table(), "xml")
    with pytest.raises(ReportError):
        render([], "csv")
    with pytest.raises(ReportError):
        render([1, 2], "csv")


def test_render_stable():
    rng = np.random.default_rng(0)
    stats = describe([result(v) for v in rng.uniform(0.1, 1, 20)])
    assert render(stats, "json") == render(list(stats), "json")
