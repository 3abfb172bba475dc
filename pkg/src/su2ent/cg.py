"""Clebsch-Gordan couplings <J_A, m; J_B, -m | J, 0> and their oscillator limit.

Squared coefficients are exact :class:`fractions.Fraction` values obtained from
the Racah finite sum.  The sign is tracked separately so callers that need the
signed amplitude (e.g. building reduced density matrices) can recover it.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .errors import DomainError
from .sectors import Bipartition, SectorSpec, m_forbidden_at_zero

_f = math.factorial


@dataclass(frozen=True)
class CGSquared:
    value: Fraction
    sign: int

    def __post_init__(self):
        if (self.value == 0) != (self.sign == 0):
            raise ValueError("sign must be 0 exactly when the value is 0")

    @property
    def amplitude(self) -> float:
        """Signed coefficient as a float."""
        return self.sign * math.sqrt(self.value)


@dataclass(frozen=True)
class OscillatorProfile:
    """Gaussian |psi_0(omega, mu)|^2 with variance ``sigma_mu_sq = 1/(2 omega)``."""

    omega: float
    sigma_mu_sq: float

    def density(self, mu):
        mu = np.asarray(mu, dtype=float)
        return np.exp(-mu**2 / (2 * self.sigma_mu_sq)) / np.sqrt(2 * np.pi * self.sigma_mu_sq)


_ZERO = CGSquared(Fraction(0), 0)


def _racah(twoJA: int, twoM: int, twoJB: int, twoJ: int) -> CGSquared:
    # <j1 m1; j2 m2 | J M> with m1 = m, m2 = -m, M = 0; all in doubled units.
    j1_plus_j2_minus_J = (twoJA + twoJB - twoJ) // 2
    J_plus_j1_minus_j2 = (twoJ + twoJA - twoJB) // 2
    J_minus_j1_plus_j2 = (twoJ - twoJA + twoJB) // 2
    j1_plus_j2_plus_J = (twoJA + twoJB + twoJ) // 2
    j1_minus_m1 = (twoJA - twoM) // 2
    j1_plus_m1 = (twoJA + twoM) // 2
    j2_minus_m2 = (twoJB + twoM) // 2
    j2_plus_m2 = (twoJB - twoM) // 2
    J = twoJ // 2

    # k runs over values where all six factorial arguments are nonnegative.
    d_off = (twoJ - twoJB + twoM) // 2  # J - j2 + m1
    e_off = (twoJ - twoJA + twoM) // 2  # J - j1 - m2
    kmin = max(0, -d_off, -e_off)
    kmax = min(j1_plus_j2_minus_J, j1_minus_m1, j2_plus_m2)
    if kmin > kmax:
        return _ZERO

    common = (
        _f(kmax)
        * _f(j1_plus_j2_minus_J - kmin)
        * _f(j1_minus_m1 - kmin)
        * _f(j2_plus_m2 - kmin)
        * _f(d_off + kmax)
        * _f(e_off + kmax)
    )
    total = 0
    for k in range(kmin, kmax + 1):
        den = (
            _f(k)
            * _f(j1_plus_j2_minus_J - k)
            * _f(j1_minus_m1 - k)
            * _f(j2_plus_m2 - k)
            * _f(d_off + k)
            * _f(e_off + k)
        )
        term = common // den
        total += -term if k % 2 else term
    if total == 0:
        return _ZERO

    pre_num = (
        (twoJ + 1)
        * _f(J_plus_j1_minus_j2)
        * _f(J_minus_j1_plus_j2)
        * _f(j1_plus_j2_minus_J)
        * _f(J) ** 2
        * _f(j1_minus_m1)
        * _f(j1_plus_m1)
        * _f(j2_minus_m2)
        * _f(j2_plus_m2)
    )
    pre_den = _f(j1_plus_j2_plus_J + 1)
    value = Fraction(pre_num * total * total, pre_den * common * common)
    return CGSquared(value, 1 if total > 0 else -1)


_cache: Dict[Tuple[int, int, int, int], CGSquared] = {}
_cache_lock = threading.Lock()


def _check_pair(twoJA: int, twoJB: int, twoJ: int) -> None:
    if min(twoJA, twoJB, twoJ) < 0:
        raise DomainError("spins must be nonnegative")
    if not abs(twoJA - twoJB) <= twoJ <= twoJA + twoJB or (twoJA + twoJB - twoJ) % 2:
        raise DomainError(f"triangle rule fails for 2J_A={twoJA}, 2J_B={twoJB}, 2J={twoJ}")
    if twoJ % 2:
        raise DomainError("the J_z = 0 coupling needs integer J")


def _validate(twoJA: int, twoM: int, twoJB: int, twoJ: int) -> None:
    _check_pair(twoJA, twoJB, twoJ)
    if abs(twoM) > min(twoJA, twoJB) or (twoM - twoJA) % 2:
        raise DomainError(f"2m={twoM} is not a magnetization of both 2J_A={twoJA} and 2J_B={twoJB}")


def cg_squared(twoJA: int, twoM: int, twoJB: int, twoJ: int) -> CGSquared:
    """|<J_A, m; J_B, -m | J, 0>|^2 exactly, with the Condon-Shortley sign.

    >>> cg_squared(2, 0, 2, 4).value
    Fraction(2, 3)
    """
    key = (twoJA, twoM, twoJB, twoJ)
    hit = _cache.get(key)
    if hit is not None:
        return hit
    _validate(*key)
    if twoM == 0 and m_forbidden_at_zero(twoJA, twoJB, twoJ):
        result = _ZERO
    else:
        result = _racah(*key)
    with _cache_lock:
        _cache.setdefault(key, result)
    return result


def lam(twoJA: int, twoM: int, twoJB: int, twoJ: int) -> Fraction:
    """lambda_m = |c_m|^2, zero outside the magnetization range of the pair."""
    if abs(twoM) > min(twoJA, twoJB) or (twoM - twoJA) % 2:
        return Fraction(0)
    return cg_squared(twoJA, twoM, twoJB, twoJ).value


def cache_items():
    return list(_cache.items())


def cache_update(entries: Iterable[Tuple[Tuple[int, int, int, int], CGSquared]]) -> None:
    with _cache_lock:
        for key, value in entries:
            _cache[tuple(key)] = value


def cache_clear() -> None:
    with _cache_lock:
        _cache.clear()


def lambda_capital_exact(pairs: Sequence[Tuple[int, int]], twoJ: int) -> Fraction:
    """Sum over the shared m range of the product of lambda_m over all pairs."""
    if not pairs:
        raise DomainError("need at least one pair")
    for a, b in pairs:
        _check_pair(a, b, twoJ)
    top = min(min(a, b) for a, b in pairs)
    parity = pairs[0][0] % 2
    if any(a % 2 != parity for a, _ in pairs):
        return Fraction(0)
    total = Fraction(0)
    for m in range(-top, top + 1, 2):
        prod = Fraction(1)
        for a, b in pairs:
            prod *= lam(a, m, b, twoJ)
            if not prod:
                break
        total += prod
    return total


def lambda_capital(pairs: Sequence[Tuple[int, int]], twoJ: int) -> float:
    return float(lambda_capital_exact(pairs, twoJ))


# -- harmonic-oscillator limit -------------------------------------------------


def hermite_functions(kmax: int, omega: float, mu) -> np.ndarray:
    """Rows k = 0..kmax of the normalized oscillator eigenfunctions psi_k(omega, mu).

    Uses the three-term recurrence of the normalized functions, which stays
    finite for large k where raw Hermite polynomials overflow.
    """
    if kmax < 0:
        raise DomainError("kmax must be >= 0")
    if omega <= 0:
        raise DomainError("omega must be positive")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    x = math.sqrt(omega) * mu
    out = np.empty((kmax + 1, mu.size))
    out[0] = (omega / math.pi) ** 0.25 * np.exp(-0.5 * x * x)
    if kmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, kmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def oscillator_lambda(k: int, omega: float, mu):
    """|psi_k(omega, mu)|^2; scalar in, scalar out."""
    if k < 0:
        raise DomainError("excitation index must be >= 0")
    vals = hermite_functions(k, omega, mu)[k] ** 2
    return float(vals[0]) if np.ndim(mu) == 0 else vals


def mehler_ground(gamma: float, omega: float) -> OscillatorProfile:
    """Closed form of (1-gamma) * sum_k gamma^k |psi_k(omega, .)|^2."""
    if not abs(gamma) < 1:
        raise DomainError(f"Mehler resummation needs |gamma| < 1, got {gamma}")
    if omega <= 0:
        raise DomainError("omega must be positive")
    w = omega * (1 - gamma) / (1 + gamma)
    return OscillatorProfile(omega=w, sigma_mu_sq=1.0 / (2.0 * w))


def mehler_series(gamma: float, omega: float, mu, terms: int = 200) -> np.ndarray:
    """Truncated left-hand side of the Mehler identity, for checking."""
    psi = hermite_functions(terms, omega, mu)
    weights = (1 - gamma) * gamma ** np.arange(terms + 1)
    return weights @ (psi**2)


def oscillator_frequency(j: float, jA: float) -> float:
    """Frequency 2(|j - j_A| + j_A) / (j_A |j - j_A|) of the CG Gaussian in mu = m/sqrt(V).

    Matches the stretched coupling J_B = J - J_A, where
    lambda_m ~ sqrt(J/(pi J_A J_B)) exp(-m^2 (1/J_A + 1/J_B)).
    """
    gap = abs(j - jA)
    if jA <= 0 or gap <= 0:
        raise DomainError("need 0 < j_A and j_A != j")
    return 2.0 * (gap + jA) / (jA * gap)


def compressed_frequency(f: float, jA: float) -> float:
    """The alternative 2/(j_A f (1-f)); kept only to compare against exact data."""
    return 2.0 / (jA * f * (1 - f))


def profile_from_sector(f: float, j: float, jA: float) -> OscillatorProfile:
    """Resummed CG profile for subsystem fraction ``f`` at rescaled spins (j, j_A)."""
    from .asymptotics import gamma as gamma_fn

    gap = abs(j - jA)
    return mehler_ground(gamma_fn(gap / (1 - f)), oscillator_frequency(j, jA))


def cg_scaling_probe(
    sector: SectorSpec,
    split: Bipartition,
    twoJA: int,
    twoM: int,
    k: int = 0,
    convention: str = "display",
) -> Tuple[float, float]:
    """Exact sqrt(V) * lambda_m^(J_A, |J-J_A|+k) next to its oscillator limit.

    ``convention`` selects the frequency: ``"display"`` uses
    :func:`oscillator_frequency`, ``"compressed"`` uses :func:`compressed_frequency`.
    """
    if k < 0:
        raise DomainError("k must be >= 0")
    V = sector.V
    twoJB = abs(sector.twoJ - twoJA) + 2 * k
    if twoJA > split.VA or twoJB > split.VB:
        raise DomainError("requested spins exceed the subsystem sizes")
    exact = math.sqrt(V) * float(lam(twoJA, twoM, twoJB, sector.twoJ))
    j, jA = sector.twoJ / V, twoJA / V
    if convention == "display":
        omega = oscillator_frequency(j, jA)
    elif convention == "compressed":
        omega = compressed_frequency(split.f, jA)
    else:
        raise DomainError(f"unknown frequency convention {convention!r}")
    mu = (twoM / 2) / math.sqrt(V)
    return exact, oscillator_lambda(k, omega, mu)
