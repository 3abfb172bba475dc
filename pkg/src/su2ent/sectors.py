"""SU(2) sector bookkeeping for chains of spin-1/2 sites.

All spins are stored doubled (``twoJ = 2*J``) so that half-integers stay exact
integers.  Nothing in this module touches floating point.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from .errors import DomainError, InvariantViolation

Pair = Tuple[int, int]


@dataclass(frozen=True)
class SectorSpec:
    """Total spin sector (J, J_z) of ``V`` sites, doubled units."""

    V: int
    twoJ: int
    twoJz: int = 0

    def __post_init__(self):
        if self.V < 1:
            raise DomainError(f"V must be >= 1, got {self.V}")
        if not 0 <= self.twoJ <= self.V:
            raise DomainError(f"need 0 <= 2J <= V, got 2J={self.twoJ}, V={self.V}")
        if (self.twoJ - self.V) % 2:
            raise DomainError(f"2J={self.twoJ} has the wrong parity for V={self.V}")
        if self.twoJz != 0:
            raise DomainError("only the J_z = 0 sector is supported")
        if self.twoJ % 2:
            raise DomainError("J_z = 0 requires integer J (even 2J)")

    @property
    def j(self) -> float:
        """Spin density 2J/V."""
        return self.twoJ / self.V


@dataclass(frozen=True)
class Bipartition:
    VA: int
    VB: int

    def __post_init__(self):
        if self.VA < 1 or self.VB < 1:
            raise DomainError(f"both subsystems need at least one site, got {self.VA}|{self.VB}")

    @classmethod
    def of(cls, V: int, VA: int) -> "Bipartition":
        return cls(VA, V - VA)

    @property
    def V(self) -> int:
        return self.VA + self.VB

    @property
    def f(self) -> float:
        return self.VA / self.V


def _check_split(sector: SectorSpec, split: Bipartition) -> None:
    if sector.V != split.V:
        raise DomainError(f"sector has V={sector.V} but split covers {split.V} sites")


class MultiplicityTable:
    """Memo of exact multiplicities keyed by ``(V, twoJ)``.

    Reads are lock-free dict lookups; misses are computed under a lock so each
    entry is written once.
    """

    def __init__(self):
        self._table: Dict[Tuple[int, int], int] = {}
        self._lock = threading.Lock()

    def get(self, V: int, twoJ: int) -> int:
        key = (V, twoJ)
        try:
            return self._table[key]
        except KeyError:
            pass
        with self._lock:
            if key not in self._table:
                self._table[key] = _multiplicity_uncached(V, twoJ)
            return self._table[key]

    def items(self):
        return list(self._table.items())

    def update(self, entries) -> None:
        with self._lock:
            for key, value in entries:
                self._table[tuple(key)] = int(value)

    def clear(self) -> None:
        with self._lock:
            self._table.clear()

    def __len__(self):
        return len(self._table)


def _multiplicity_uncached(V: int, twoJ: int) -> int:
    if V < 0 or twoJ < 0 or twoJ > V or (V - twoJ) % 2:
        raise DomainError(f"no spin 2J={twoJ} on V={V} sites")
    value = Fraction(2 * (1 + twoJ), 2 + V + twoJ) * math.comb(V, (V + twoJ) // 2)
    if value.denominator != 1:
        raise InvariantViolation(f"multiplicity({V}, {twoJ}) = {value} is not an integer")
    return value.numerator


MULTIPLICITIES = MultiplicityTable()


def multiplicity(V: int, twoJ: int) -> int:
    """Number of spin-J multiplets in ``V`` spin-1/2 sites.

    >>> [multiplicity(4, t) for t in (0, 2, 4)]
    [2, 3, 1]
    """
    return MULTIPLICITIES.get(V, twoJ)


def spins(V: int) -> range:
    """All doubled spins that occur on ``V`` sites."""
    return range(V % 2, V + 1, 2)


def completeness_check(V: int) -> bool:
    if V < 1:
        raise DomainError("V must be >= 1")
    return sum((t + 1) * multiplicity(V, t) for t in spins(V)) == 2**V


def _admissible(twoJA: int, twoJB: int, twoJ: int) -> bool:
    return abs(twoJA - twoJB) <= twoJ <= twoJA + twoJB and (twoJA + twoJB - twoJ) % 2 == 0


def pair_set(sector: SectorSpec, split: Bipartition) -> List[Pair]:
    """Eligible ``(twoJA, twoJB)`` pairs coupling to the total spin, sorted."""
    _check_split(sector, split)
    return [
        (a, b)
        for a in spins(split.VA)
        for b in spins(split.VB)
        if _admissible(a, b, sector.twoJ)
    ]


def ja_range(sector: SectorSpec, split: Bipartition) -> range:
    """Doubled J_A values for which the conditioned J_B set is nonempty."""
    lo = max(split.VA % 2, sector.twoJ - split.VB)
    hi = min(split.VA, sector.twoJ + split.VB)
    lo += (lo - split.VA) % 2
    return range(lo, hi + 1, 2)


def jb_range(sector: SectorSpec, split: Bipartition) -> range:
    lo = max(split.VB % 2, sector.twoJ - split.VA)
    hi = min(split.VB, sector.twoJ + split.VA)
    lo += (lo - split.VB) % 2
    return range(lo, hi + 1, 2)


def jb_given_ja(sector: SectorSpec, split: Bipartition, twoJA: int) -> List[int]:
    _check_split(sector, split)
    if twoJA not in ja_range(sector, split):
        raise DomainError(f"2J_A={twoJA} is outside the admissible range for this sector")
    lo = abs(sector.twoJ - twoJA)
    hi = min(split.VB, sector.twoJ + twoJA)
    return list(range(lo, hi + 1, 2))


def ja_given_jb(sector: SectorSpec, split: Bipartition, twoJB: int) -> List[int]:
    _check_split(sector, split)
    if twoJB not in jb_range(sector, split):
        raise DomainError(f"2J_B={twoJB} is outside the admissible range for this sector")
    lo = abs(sector.twoJ - twoJB)
    hi = min(split.VA, sector.twoJ + twoJB)
    return list(range(lo, hi + 1, 2))


def m_forbidden_at_zero(twoJA: int, twoJB: int, twoJ: int) -> bool:
    """True when J - J_A - J_B is odd, so the m = 0 coupling vanishes."""
    return ((twoJ - twoJA - twoJB) // 2) % 2 == 1


def m_set(twoJA: int, twoJB: int, twoJ: int) -> List[int]:
    """Doubled subsystem magnetizations m carried by the pair ``(J_A, J_B)``.

    Only the parity selection rule at m = 0 is applied; isolated accidental
    zeros of the coupling (e.g. 2J_A=7, 2J_B=5, 2J=6, 2m=3) are kept.
    """
    top = min(twoJA, twoJB)
    skip_zero = m_forbidden_at_zero(twoJA, twoJB, twoJ)
    return [m for m in range(-top, top + 1, 2) if not (m == 0 and skip_zero)]


def pair_set_m(sector: SectorSpec, split: Bipartition, twoM: int) -> List[Pair]:
    """Pairs that populate the magnetization block ``m``."""
    return [
        (a, b)
        for a, b in pair_set(sector, split)
        if min(a, b) >= abs(twoM)
        and (a - twoM) % 2 == 0
        and not (twoM == 0 and m_forbidden_at_zero(a, b, sector.twoJ))
    ]


def magnetizations(split: Bipartition) -> range:
    return range(-split.VA, split.VA + 1, 2)


def dimension_sum(V: int, twoJ: int, VA: int) -> int:
    """sum of n_A * n_B over admissible pairs, for any spin J (no J_z restriction)."""
    if not 1 <= VA < V:
        raise DomainError(f"need 1 <= V_A < V, got V_A={VA}, V={V}")
    if not 0 <= twoJ <= V or (V - twoJ) % 2:
        raise DomainError(f"no spin 2J={twoJ} on V={V} sites")
    VB = V - VA
    return sum(
        multiplicity(VA, a) * multiplicity(VB, b)
        for a in spins(VA)
        for b in spins(VB)
        if _admissible(a, b, twoJ)
    )


def sector_dimension(sector: SectorSpec, split: Bipartition) -> int:
    """d = sum over eligible pairs of n_A * n_B; always equals multiplicity(V, 2J)."""
    _check_split(sector, split)
    return dimension_sum(sector.V, sector.twoJ, split.VA)
