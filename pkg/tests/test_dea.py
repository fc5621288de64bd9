import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from frontier_dea.dea import (
    DeaError, Dmu, GroupingRule, Panel, Rts, build_envelopment_lp, efficiency,
    panel_from_arrays, score_all,
)
from frontier_dea.lp_core import Relation, check_feasible, solve
from oracles import closed_form_crs, dea_oracle, vertex_enumeration


def two_unit_panel():
    return panel_from_arrays([[2.0], [4.0]], [[2.0], [2.0]], ids=["A", "B"])


@pytest.mark.parametrize("rts, rows", [(Rts.CRS, 2), (Rts.VRS, 3)])
def test_lp_shape_small(rts, rows):
    p = two_unit_panel()
    lp = build_envelopment_lp(p.dmus[0], p, rts)
    assert lp.variable_count == 3
    assert len(lp.constraints) == rows
    assert lp.relations[:2] == (Relation.LE, Relation.GE)
    if rts is Rts.VRS:
        assert lp.relations[2] is Relation.EQ
        assert list(lp.a[2]) == [0.0, 1.0, 1.0]


def test_lp_shape_full_sized():
    rng = np.random.default_rng(1)
    p = panel_from_arrays(rng.uniform(1, 10, (156, 3)), rng.uniform(1, 10, (156, 1)))
    lp = build_envelopment_lp(p.dmus[5], p, Rts.CRS)
    assert lp.variable_count == 157
    assert len(lp.constraints) == 4
    # input rows carry -x_i0 on theta, output rows carry y_r0 on the right
    assert lp.a[0, 0] == -p.dmus[5].inputs[0]
    assert lp.rhs[3] == p.dmus[5].outputs[0]


def test_target_must_be_member():
    p = two_unit_panel()
    with pytest.raises(DeaError):
        build_envelopment_lp(Dmu("Z", [1.0], [1.0]), p, Rts.CRS)
    with pytest.raises(DeaError):
        Panel([Dmu("A", [1.0], [1.0]), Dmu("B", [1.0, 2.0], [1.0])])
    with pytest.raises(DeaError):
        Panel([Dmu("A", [1.0], [1.0]), Dmu("A", [2.0], [1.0])])
    with pytest.raises(DeaError):
        Dmu("A", [0.0], [1.0])


@pytest.mark.parametrize("rts", list(Rts))
def test_single_unit(rts):
    d = Dmu("solo", [3.0, 4.0], [5.0])
    res = efficiency(d, Panel([d]), rts)
    assert res.theta_star == pytest.approx(1.0)
    assert res.lambdas == pytest.approx({"solo": 1.0})
    assert res.efficient


def test_two_unit_crs():
    p = two_unit_panel()
    res = efficiency(p.dmus[1], p, Rts.CRS)
    expected = closed_form_crs([2, 4], [2, 2], 1)
    assert expected == 0.5
    assert res.theta_star == pytest.approx(expected, abs=1e-12)
    assert dea_oracle([[2], [4]], [[2], [2]], 1, vrs=False) == pytest.approx(0.5)
    assert not res.efficient
    scores = {r.dmu_id: r.theta_star for r in score_all(p, Rts.CRS)}
    assert scores == pytest.approx({"A": 1.0, "B": 0.5})


def test_two_input_composite_peer():
    x = [[1, 2], [2, 1], [2, 2]]
    y = [[1], [1], [1]]
    assert dea_oracle(x, y, 2, vrs=False) == pytest.approx(0.75)
    p = panel_from_arrays(x, y, ids="ABC")
    res = efficiency(p.dmus[2], p, Rts.CRS)
    assert res.theta_star == pytest.approx(0.75, abs=1e-12)
    assert res.lambdas == pytest.approx({"A": 0.5, "B": 0.5})


def test_feasibility_checker_on_oracle_solution():
    p = two_unit_panel()
    lp = build_envelopment_lp(p.dmus[1], p, Rts.VRS)
    value, point = vertex_enumeration(lp)
    assert check_feasible(lp, point, 1e-9)
    assert value == pytest.approx(solve(lp).objective_value)


def test_grouping_matches_separate_runs():
    rng = np.random.default_rng(7)
    dmus = []
    for sector in ("S1", "S2"):
        for k in range(6):
            dmus.append(Dmu(f"{sector}-{k}", rng.uniform(1, 9, 2), rng.uniform(1, 9, 1),
                            sector=sector, year=2000 + k % 3))
    panel = Panel(dmus)
    grouped = score_all(panel, Rts.VRS, GroupingRule.SECTOR)
    separate = []
    for sector in ("S1", "S2"):
        separate += score_all(Panel([d for d in dmus if d.sector == sector]), Rts.VRS)
    assert [r.dmu_id for r in grouped] == [d.id for d in dmus]
    assert [r.theta_star for r in grouped] == [r.theta_star for r in separate]
    assert grouped[0].group_key == ("S1",)
    # order independence
    shuffled = Panel(dmus[::-1])
    again = {r.dmu_id: r.theta_star for r in score_all(shuffled, Rts.VRS, GroupingRule.SECTOR)}
    assert again == pytest.approx({r.dmu_id: r.theta_star for r in grouped}, abs=1e-9)
    by_year = score_all(panel, Rts.CRS, GroupingRule.SECTOR_YEAR)
    assert {r.group_key for r in by_year} == {(s, y) for s in ("S1", "S2") for y in (2000, 2001, 2002)}


positive = st.floats(0.1, 100.0, allow_nan=False)


@st.composite
def small_panels(draw, max_n=6, max_m=2, max_s=2):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    s = draw(st.integers(1, max_s))
    x = draw(arrays(float, (n, m), elements=positive))
    y = draw(arrays(float, (n, s), elements=positive))
    return x, y


@settings(max_examples=150, deadline=None)
@given(small_panels())
def test_properties_against_oracle(data):
    x, y = data
    panel = panel_from_arrays(x, y)
    crs = score_all(panel, Rts.CRS)
    vrs = score_all(panel, Rts.VRS)
    for j, (c, v) in enumerate(zip(crs, vrs)):
        assert 0 < c.theta_star <= 1 + 1e-9
        assert v.theta_star >= c.theta_star - 1e-7
        assert c.theta_star == pytest.approx(dea_oracle(x, y, j, False), abs=1e-7)
        assert v.theta_star == pytest.approx(dea_oracle(x, y, j, True), abs=1e-7)
        assert sum(v.lambdas.values()) == pytest.approx(1.0, abs=1e-6)
        assert all(w > 0 for w in c.lambdas.values())
    assert max(r.theta_star for r in crs) >= 1 - 1e-6
    assert max(r.theta_star for r in vrs) >= 1 - 1e-6


@settings(max_examples=100, deadline=None)
@given(small_panels(max_n=10), st.floats(1e-3, 1e3), st.booleans(), st.data())
def test_units_invariance(data, factor, scale_output, draw):
    x, y = data
    target = y if scale_output else x
    col = draw.draw(st.integers(0, target.shape[1] - 1))
    before = score_all(panel_from_arrays(x, y), Rts.VRS)
    target[:, col] *= factor
    after = score_all(panel_from_arrays(x, y), Rts.VRS)
    for a, b in zip(before, after):
        assert a.theta_star == pytest.approx(b.theta_star, abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(small_panels(max_n=8), arrays(float, 4, elements=positive))
def test_appending_unit_never_raises_scores(data, extra):
    x, y = data
    m, s = x.shape[1], y.shape[1]
    base = score_all(panel_from_arrays(x, y), Rts.CRS)
    x2 = np.vstack([x, extra[:m]])
    y2 = np.vstack([y, extra[2:2 + s]])
    grown = score_all(panel_from_arrays(x2, y2), Rts.CRS)
    for a, b in zip(base, grown):
        assert b.theta_star <= a.theta_star + 1e-7


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(1, 12), elements=positive), st.data())
def test_single_ratio_closed_form(xs, draw):
    ys = draw.draw(arrays(float, xs.size, elements=positive))
    results = score_all(panel_from_arrays(xs[:, None], ys[:, None]), Rts.CRS)
    for j, r in enumerate(results):
        assert r.theta_star == pytest.approx(closed_form_crs(xs, ys, j), abs=1e-9)


def test_small_step_ratio_ties():
    # near-equal small ratios once made the ratio test pick the wrong row
    x = np.array([[34.0, 33.0], [0.125, 0.125]])
    y = np.array([[0.25], [8.0]])
    panel = panel_from_arrays(x, y)
    got = score_all(panel, Rts.CRS)[0].theta_star
    assert got == pytest.approx(dea_oracle(x, y, 0, False), abs=1e-12)
    assert got == pytest.approx((0.25 / 8) * 0.125 / 33, rel=1e-12)
