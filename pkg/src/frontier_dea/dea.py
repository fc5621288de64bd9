"""Input-oriented radial efficiency (envelopment form) under CRS or VRS.

For a target unit with inputs x0 and outputs y0, against reference units j:

    min  theta
    s.t. sum_j lambda_j x_ij - theta x_i0 <= 0      (each input i)
         sum_j lambda_j y_rj             >= y_r0    (each output r)
         sum_j lambda_j                   = 1       (VRS only)
         theta, lambda >= 0
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Sequence

import numpy as np

from .lp_core import (
    DEFAULT_TOLERANCE, LinearProgram, LpNumericalError, Relation, Sense, Status, solve,
)

CLASSIFICATION_TOLERANCE = 1e-6
LAMBDA_THRESHOLD = 1e-7


class Rts(enum.Enum):
    CRS = "crs"
    VRS = "vrs"


class GroupingRule(enum.Enum):
    SECTOR = "sector"
    YEAR = "year"
    SECTOR_YEAR = "sector-year"
    POOLED = "pooled"

    def key(self, dmu: "Dmu") -> tuple:
        if self is GroupingRule.SECTOR:
            return (dmu.sector,)
        if self is GroupingRule.YEAR:
            return (dmu.year,)
        if self is GroupingRule.SECTOR_YEAR:
            return (dmu.sector, dmu.year)
        return ()


class DeaError(ValueError):
    pass


class DeaConsistencyError(RuntimeError):
    """The envelopment LP was infeasible or unbounded (corrupted data)."""


@dataclass(frozen=True)
class Dmu:
    id: Hashable
    inputs: tuple[float, ...]
    outputs: tuple[float, ...]
    sector: str | None = None
    year: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(float(v) for v in self.inputs))
        object.__setattr__(self, "outputs", tuple(float(v) for v in self.outputs))
        if not self.inputs or not self.outputs:
            raise DeaError(f"DMU {self.id!r}: needs at least one input and one output")
        if any(not v > 0 for v in self.inputs + self.outputs):
            raise DeaError(f"DMU {self.id!r}: inputs and outputs must be strictly positive")


@dataclass(frozen=True)
class Panel:
    dmus: tuple[Dmu, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dmus = tuple(self.dmus)
        object.__setattr__(self, "dmus", dmus)
        if not dmus:
            raise DeaError("panel is empty")
        m, s = len(dmus[0].inputs), len(dmus[0].outputs)
        index = {}
        for d in dmus:
            if (len(d.inputs), len(d.outputs)) != (m, s):
                raise DeaError(f"DMU {d.id!r} has different input/output dimensions")
            if d.id in index:
                raise DeaError(f"duplicate DMU id {d.id!r}")
            index[d.id] = d
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.dmus)

    def __contains__(self, dmu):
        return self._index.get(getattr(dmu, "id", None)) == dmu

    @cached_property
    def input_matrix(self) -> np.ndarray:
        """Inputs as an (m, n) array, one column per DMU."""
        return np.array([d.inputs for d in self.dmus]).T

    @cached_property
    def output_matrix(self) -> np.ndarray:
        return np.array([d.outputs for d in self.dmus]).T

    @property
    def n_inputs(self) -> int:
        return len(self.dmus[0].inputs)

    @property
    def n_outputs(self) -> int:
        return len(self.dmus[0].outputs)


@dataclass(frozen=True)
class EfficiencyResult:
    dmu_id: Hashable
    theta_star: float
    lambdas: dict
    efficient: bool
    rts: Rts
    group_key: tuple = ()
    sector: str | None = None
    year: int | None = None


def build_envelopment_lp(target: Dmu, panel: Panel, rts: Rts) -> LinearProgram:
    """Variables are (theta, lambda_1..lambda_n) in panel order."""
    if target not in panel:
        raise DeaError(f"target {target.id!r} is not a member of the panel")
    m, s, n = panel.n_inputs, panel.n_outputs, len(panel)
    vrs = rts is Rts.VRS
    a = np.zeros((m + s + vrs, n + 1))
    a[:m, 0] = [-v for v in target.inputs]
    a[:m, 1:] = panel.input_matrix
    a[m:m + s, 1:] = panel.output_matrix
    rhs = [0.0] * m + list(target.outputs)
    relations = [Relation.LE] * m + [Relation.GE] * s
    if vrs:
        a[-1, 1:] = 1.0
        rhs.append(1.0)
        relations.append(Relation.EQ)
    objective = np.zeros(n + 1)
    objective[0] = 1.0
    return LinearProgram(Sense.MINIMIZE, objective, a, tuple(relations), rhs)


def efficiency(target: Dmu, panel: Panel, rts: Rts, group_key: tuple = (),
               tolerance: float = CLASSIFICATION_TOLERANCE) -> EfficiencyResult:
    """Score ``target`` against ``panel``.

    ``tolerance`` governs classification only: the unit is efficient when
    theta* >= 1 - tolerance. The LP itself is always solved at the solver's
    own tolerance.
    """
    if not tolerance > 0:
        raise DeaError(f"tolerance must be positive, got {tolerance!r}")
    lp = build_envelopment_lp(target, panel, rts)
    try:
        sol = solve(lp, DEFAULT_TOLERANCE)
    except LpNumericalError as exc:
        raise DeaConsistencyError(f"{target.id!r}: {exc}") from exc
    if sol.status is not Status.OPTIMAL:
        raise DeaConsistencyError(
            f"envelopment LP for {target.id!r} is {sol.status.value}")
    theta = sol.objective_value
    if not 0.0 < theta <= 1.0 + CLASSIFICATION_TOLERANCE:
        raise DeaConsistencyError(f"theta* = {theta!r} for {target.id!r} out of range")
    theta = min(theta, 1.0)
    lambdas = {d.id: w for d, w in zip(panel.dmus, sol.variable_values[1:])
               if w > LAMBDA_THRESHOLD}
    return EfficiencyResult(
        dmu_id=target.id,
        theta_star=theta,
        lambdas=lambdas,
        efficient=theta >= 1.0 - tolerance,
        rts=rts,
        group_key=group_key,
        sector=target.sector,
        year=target.year,
    )


def partition(panel: Panel, grouping: GroupingRule) -> dict[tuple, Panel]:
    groups: dict[tuple, list[Dmu]] = defaultdict(list)
    for d in panel.dmus:
        groups[grouping.key(d)].append(d)
    return {key: Panel(members) for key, members in groups.items()}


def score_all(panel: Panel, rts: Rts, grouping: GroupingRule = GroupingRule.POOLED,
              tolerance: float = CLASSIFICATION_TOLERANCE) -> list[EfficiencyResult]:
    """Score every DMU against the members of its own group.

    Results come back in panel order whatever the grouping.
    """
    by_id = {}
    for key, group in partition(panel, grouping).items():
        for d in group.dmus:
            by_id[d.id] = efficiency(d, group, rts, key, tolerance)
    return [by_id[d.id] for d in panel.dmus]


def panel_from_arrays(inputs: Sequence[Sequence[float]], outputs: Sequence[Sequence[float]],
                      ids: Iterable[Hashable] | None = None) -> Panel:
    """Panel from row-per-DMU arrays; ids default to 0..n-1."""
    ids = list(range(len(inputs))) if ids is None else list(ids)
    if not len(ids) == len(inputs) == len(outputs):
        raise DeaError("inputs, outputs and ids differ in length")
    return Panel([Dmu(i, x, y) for i, x, y in zip(ids, inputs, outputs)])
