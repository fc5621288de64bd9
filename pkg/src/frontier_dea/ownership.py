"""Top-k ownership concentration ratios and percentage brackets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

STAKE_SUM_TOLERANCE = 1e-6


class OwnershipError(ValueError):
    pass


@dataclass(frozen=True)
class ShareRegister:
    """Disclosed stakes (percent of paid-up capital) for one firm-year."""

    firm_id: Hashable
    year: int | None
    stakes: tuple[float, ...]

    def __post_init__(self):
        stakes = tuple(float(s) for s in self.stakes)
        object.__setattr__(self, "stakes", stakes)
        for s in stakes:
            if not 0.0 < s <= 100.0:
                raise OwnershipError(f"{self.firm_id}: stake {s!r} outside (0, 100]")
        if math.fsum(stakes) > 100.0 + STAKE_SUM_TOLERANCE:
            raise OwnershipError(f"{self.firm_id}: stakes sum to {math.fsum(stakes):.6g} > 100")

    @property
    def disclosed_count(self) -> int:
        return len(self.stakes)


@dataclass(frozen=True)
class ConcentrationRatio:
    k: int
    value: float
    truncated: bool


@dataclass(frozen=True)
class Bracket:
    label: str
    lower: float  # exclusive
    upper: float  # inclusive

    def __contains__(self, value: float) -> bool:
        return self.lower < value <= self.upper


BRACKETS: tuple[Bracket, ...] = (
    Bracket("≤10", 0.0, 10.0),
    Bracket("11–30", 10.0, 30.0),
    Bracket("31–50", 30.0, 50.0),
    Bracket("51–70", 50.0, 70.0),
    Bracket("71–90", 70.0, 90.0),
    Bracket(">90", 90.0, 100.0),
)
BRACKET_LABELS = tuple(b.label for b in BRACKETS)


def cr(register: ShareRegister, k: int) -> ConcentrationRatio:
    """Sum of the ``k`` largest stakes.

    With fewer than ``k`` disclosed stakes all of them are summed and the
    result is flagged ``truncated``.
    """
    if k < 1:
        raise OwnershipError(f"k must be a positive integer, got {k!r}")
    if not register.stakes:
        raise OwnershipError(f"{register.firm_id}: no disclosed shareholders")
    top = sorted(register.stakes, reverse=True)[:k]
    value = min(math.fsum(top), 100.0)
    return ConcentrationRatio(k, value, register.disclosed_count < k)


def bracket_index(value: float) -> int:
    if not 0.0 < value <= 100.0:
        raise OwnershipError(f"percentage {value!r} outside (0, 100]")
    for i, b in enumerate(BRACKETS):
        if value in b:
            return i
    raise AssertionError("brackets do not cover (0, 100]")


def bracket_of(value: float) -> Bracket:
    return BRACKETS[bracket_index(value)]


def concentration_profile(register: ShareRegister, orders: Sequence[int] = (1, 2, 4)) -> dict[int, float]:
    return {k: cr(register, k).value for k in orders}
