"""Closed-form large-V evaluators.

Everything here is a pure float function of the density parameters
``f = V_A/V`` and ``j = 2J/V`` (natural logarithms throughout).  The main
entropy formula holds for ``0 < f < 1/2`` and ``0 < j < 1``; ``f > 1/2`` is
reflected to ``1 - f`` and ``f = 1/2`` is rejected.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericalError

EULER_GAMMA = 0.5772156649015329


def _xlogx(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def beta(jt: float) -> float:
    """Entropy density of the multiplicity; beta(0) = log 2, beta(1) = 0."""
    if not -1 <= jt <= 1:
        raise DomainError(f"beta needs |jt| <= 1, got {jt}")
    return -_xlogx((1 + jt) / 2) - _xlogx((1 - jt) / 2)


def beta_prime(jt: float) -> float:
    return 0.5 * math.log((1 - jt) / (1 + jt))


def alpha(jt: float) -> float:
    if not 0 < jt < 1:
        raise DomainError(f"alpha needs 0 < jt < 1, got {jt}")
    return math.sqrt(2 / math.pi) * 2 * jt / ((1 + jt) * math.sqrt(1 - jt * jt))


def gamma(jt: float) -> float:
    """(1 - jt)/(1 + jt), the ratio of consecutive multiplicities at fixed V."""
    if not 0 <= jt <= 1:
        raise DomainError(f"gamma needs 0 <= jt <= 1, got {jt}")
    return (1 - jt) / (1 + jt)


def log_multiplicity(V: float, jt: float) -> float:
    """log of alpha(jt)/sqrt(V) * exp(V beta(jt)); the stretched state jt = 1 gives 0."""
    if jt == 1:
        return 0.0
    if not 0 < jt < 1:
        raise DomainError("the asymptotic multiplicity needs 0 < j < 1 (j = 1 is exact)")
    return math.log(alpha(jt)) - 0.5 * math.log(V) + V * beta(jt)


def log_dim(V: int, twoJ: int) -> float:
    """Asymptotic log of the sector dimension d = n_J^V."""
    return log_multiplicity(V, twoJ / V)


def log_dim_exact(V: int, twoJ: int) -> float:
    from .sectors import multiplicity

    return math.log(multiplicity(V, twoJ))


# -- dimensional selection ---------------------------------------------------


def b_kappa(jt: float, kappa: float, ft: float, j: float) -> float:
    return 2 * kappa * beta(jt / ft) * ft + 2 * (1 - kappa) * beta((j - jt) / (1 - ft)) * (1 - ft)


def b_kappa_slope(jt: float, kappa: float, ft: float, j: float) -> float:
    """d B_kappa / d jt in its logarithmic form."""
    return kappa * math.log((ft - jt) / (ft + jt)) - (1 - kappa) * math.log(
        (1 - ft - j + jt) / (1 - ft + j - jt)
    )


def saddle_j(kappa: float, ft: float, j: float, xtol: float = 1e-14) -> float:
    """Location of the unique maximum of B_kappa in jt, by bisection."""
    if not 0 < kappa < 1:
        raise DomainError("kappa must lie in (0, 1)")
    if not 0 < ft < 1:
        raise DomainError("ft must lie in (0, 1)")
    if not 0 < j < 1:
        raise DomainError("j must lie in (0, 1)")
    lo = max(0.0, j - 1 + ft)
    hi = min(ft, j + 1 - ft)
    width = hi - lo
    a, b = lo + 1e-15 * width, hi - 1e-15 * width
    if lo == 0.0:
        a = 0.0
    fa, fb = b_kappa_slope(a, kappa, ft, j), b_kappa_slope(b, kappa, ft, j)
    if not (math.isfinite(fa) and math.isfinite(fb)) or fa <= 0 and fb >= 0:
        raise NumericalError(f"saddle bracket failed: slope {fa} at {a}, {fb} at {b}")
    # the slope diverges only logarithmically at the ends, so a root can sit
    # closer to an end than the 1e-15 offset; the end is then within tolerance
    if fb >= 0:
        return b
    if fa <= 0:
        return a
    return optimize.bisect(b_kappa_slope, a, b, args=(kappa, ft, j), xtol=xtol, maxiter=400)


def b_kappa_max(kappa: float, ft: float, j: float) -> float:
    return b_kappa(saddle_j(kappa, ft, j), kappa, ft, j)


def delta_b(kappa: float, ft: float, j: float) -> float:
    """B at the A-side saddle minus B at the B-side saddle; positive for kappa, ft < 1/2."""
    return b_kappa_max(kappa, ft, j) - b_kappa_max(kappa, 1 - ft, j)


# -- Gaussian peak of the J_A distribution -----------------------------------


def peak_variance(V: float, f: float, j: float) -> float:
    return f * (1 - f) * (1 - j * j) / V


def gaussian_peak(V: float, f: float, j: float, jA):
    """(2/V) N(jA; fj, sigma^2): weight of one J_A step in the Gaussian approximation."""
    s2 = peak_variance(V, f, j)
    jA = np.asarray(jA, dtype=float)
    return 2.0 / V * np.exp(-((jA - f * j) ** 2) / (2 * s2)) / math.sqrt(2 * math.pi * s2)


@dataclass(frozen=True)
class VarrhoExpansion:
    """Coefficients of the J_A weight in the variable dJ_A = sqrt(V)(j_A - fj).

    ``D1`` and ``D3`` are the closed forms as published.  Expanding
    V*Y(fj + dJ_A/sqrt(V)) gives the cubic coefficient Y'''/6, which equals
    ``-D3``; exact dimension ratios agree with the minus sign, so
    :meth:`density` uses ``skew_cubic = -D3``.
    """

    sigma_t_sq: float
    D1: float
    D3: float

    @property
    def skew_cubic(self) -> float:
        return -self.D3

    def density(self, delta, V: float):
        """Gaussian in dJ_A with the first 1/sqrt(V) correction."""
        delta = np.asarray(delta, dtype=float)
        s2 = self.sigma_t_sq
        base = np.exp(-0.5 * delta**2 / s2) / math.sqrt(2 * math.pi * s2)
        return base * (1 + (self.D1 * delta + self.skew_cubic * delta**3) / math.sqrt(V))


def varrho_expansion(f: float, j: float) -> VarrhoExpansion:
    if not 0 < f < 1:
        raise DomainError("f must lie in (0, 1)")
    if not 0 < j < 1:
        raise DomainError("j must lie in (0, 1); D1 is singular at j = 0")
    q = 1 - j * j
    s2 = f * (1 - f) * q
    d1 = (1 - j * (1 - j) - f * (1 - j + 2 * j * j)) / (f * j * (1 - f) * q)
    d3 = (1 - 2 * f) * j / (3 * f**2 * (1 - f) ** 2 * q**2)
    return VarrhoExpansion(s2, d1, d3)


def corrected_peak(V: float, f: float, j: float, jA):
    """Per-step J_A weight including the 1/sqrt(V) skew (steps in dJ_A are 2/sqrt(V))."""
    delta = math.sqrt(V) * (np.asarray(jA, dtype=float) - f * j)
    return 2.0 / math.sqrt(V) * varrho_expansion(f, j).density(delta, V)


def exact_peak(V: int, twoJ: int, VA: int) -> dict:
    """Exact n^A_{J_A} * ntilde^B_{J_A} / d for every admissible doubled J_A."""
    from .sectors import Bipartition, SectorSpec, ja_range, jb_given_ja, multiplicity

    sector, split = SectorSpec(V, twoJ), Bipartition.of(V, VA)
    d = multiplicity(V, twoJ)
    out = {}
    for a in ja_range(sector, split):
        nt = sum(multiplicity(split.VB, b) for b in jb_given_ja(sector, split, a))
        out[a] = multiplicity(VA, a) * nt / d
    return out


# -- entropy formulas --------------------------------------------------------


def _fold_f(f: float) -> float:
    if not 0 < f < 1:
        raise DomainError(f"f must lie in (0, 1), got {f}")
    if f == 0.5:
        raise DomainError(
            "f = 1/2 is unsupported: the two extremal trees tie and the moment method breaks down"
        )
    return f if f < 0.5 else 1 - f


def _check_j(j: float) -> None:
    if not 0 < j < 1:
        raise DomainError(
            f"j = {j} is outside (0, 1); use s_j0 for J = 0 and stretched_entropy for j = 1"
        )


def abelian_term(f: float) -> float:
    return (f + math.log(1 - f)) / 2


def non_abelian_term(f: float, j: float) -> float:
    return (1 - f) * (1 - j) / (2 * j) * math.log((1 - j) / (1 + j)) + math.log(2 * j / (1 + j))


def t_s(f: float, j: float, V: float) -> float:
    """Scale part of the entropy: volume law, (1/2) log V and the j-dependent constants."""
    f = _fold_f(f)
    _check_j(j)
    return V * f * beta(j) + 0.5 * math.log(V) + abelian_term(f) + non_abelian_term(f, j)


def t_cg(f: float) -> float:
    """Entropy of the emergent Gaussian over m at constant order; independent of j."""
    if not 0 < f < 1:
        raise DomainError("f must lie in (0, 1)")
    return 0.5 * math.log(math.pi * math.e * f * (1 - f) / 2)


@dataclass(frozen=True)
class AsymptoticBreakdown:
    volume: float
    log_term: float
    abelian: float
    non_abelian: float
    cg_const: float

    @property
    def total(self) -> float:
        return self.volume + self.log_term + self.abelian + self.non_abelian + self.cg_const

    @property
    def constant(self) -> float:
        return self.abelian + self.non_abelian + self.cg_const

    def as_dict(self) -> dict:
        out = asdict(self)
        out["constant"] = self.constant
        out["total"] = self.total
        return out


def s_avg(f: float, j: float, V: float) -> AsymptoticBreakdown:
    """Average entanglement entropy in the (J = jV/2, J_z = 0) sector up to o(1)."""
    f = _fold_f(f)
    _check_j(j)
    return AsymptoticBreakdown(
        volume=V * f * beta(j),
        log_term=0.5 * math.log(V),
        abelian=abelian_term(f),
        non_abelian=non_abelian_term(f, j),
        cg_const=t_cg(f),
    )


def s_cg(f: float, V: float) -> float:
    """Entropy of a normal distribution with variance f(1-f)V/4."""
    return 0.5 * math.log(math.pi * math.e * f * (1 - f) * V / 2)


def s_j0(f: float, V: float) -> float:
    """Singlet-sector result, transcribed literally.

    The leading term is ``V log 2`` exactly as printed in the source result,
    without a factor ``f``; the Monte Carlo checks in the test-suite show that
    the literal expression overshoots the sampled entropy by roughly
    ``(1 - f) V log 2``.
    """
    if not 0 < f < 1:
        raise DomainError("f must lie in (0, 1)")
    return math.log(2) * V + 1.5 * (f + math.log(1 - f)) - (0.5 if f == 0.5 else 0.0)


def sd2_breakdown(f: float, j: float, V: float) -> AsymptoticBreakdown:
    """Comparison row: the SD_2 approximation, with its own O(1) spin term."""
    f = _fold_f(f)
    _check_j(j)
    sd2 = (1 - 2 * f * (1 - j)) / (2 * j) * math.log((1 - j) / (1 + j)) + math.log(
        2 * j**1.5 / math.sqrt(1 - j * j)
    )
    return AsymptoticBreakdown(V * f * beta(j), 0.5 * math.log(V), abelian_term(f), sd2, t_cg(f))


def glocal_breakdown(f: float, j: float, V: float) -> AsymptoticBreakdown:
    """Comparison row: average G-local entropy (no log V term, no CG constant)."""
    f = _fold_f(f)
    _check_j(j)
    return AsymptoticBreakdown(V * f * beta(j), 0.0, abelian_term(f), non_abelian_term(f, j), 0.0)


def s_sd2(f: float, j: float, V: float) -> float:
    return sd2_breakdown(f, j, V).total


def s_glocal(f: float, j: float, V: float) -> float:
    return glocal_breakdown(f, j, V).total


def s_glocal_j0(f: float, V: float) -> float:
    """G-local entropy at j = 0, transcribed as printed (a missing operator read as +)."""
    return (
        f * V * math.log(2)
        - 0.5 * math.log(V)
        + 1.5 * (f - math.log(1 - f))
        - 0.5 * math.log(math.exp(2 - EULER_GAMMA) * f * (1 - f) / 2)
    )


def s_cg_j0(f: float, V: float) -> float:
    return 0.5 * math.log(math.exp(2 - EULER_GAMMA) * f * (1 - f) * V / 2)


def comparison_rows(f: float, j: float, V: float) -> dict:
    return {"SD2": s_sd2(f, j, V), "Glocal": s_glocal(f, j, V), "S_CG": s_cg(_fold_f(f), V)}


def stretched_entropy(V: int, VA: int) -> float:
    """Exact entropy of the unique J = V/2, J_z = 0 state (j = 1).

    The reduced spectrum is hypergeometric: C(V_A, V_A/2+m) C(V_B, V_B/2-m) / C(V, V/2).
    """
    if V % 2 or not 0 < VA < V:
        raise DomainError("need even V and 0 < V_A < V")
    VB = V - VA
    total = math.comb(V, V // 2)
    probs = []
    for twoM in range(-VA, VA + 1, 2):
        a, b = (VA + twoM) // 2, (VB - twoM) // 2
        if 0 <= b <= VB:
            probs.append(math.comb(VA, a) * math.comb(VB, b) / total)
    return -sum(_xlogx(p) for p in probs)
