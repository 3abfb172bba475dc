"""Random states in a fixed (J, J_z = 0) sector and their subsystem entropy.

A state is stored as one complex coefficient vector of length ``d`` whose
slices are the blocks W^(J_A, J_B).  For every subsystem magnetization m the
matrix W_hat_m (rows (J_A, a), columns (J_B, b), entries c_m W_ab) is gathered
from that vector with a precomputed index/weight pair, so that
rho_A^(m) = W_hat_m W_hat_m^dagger.

The independent oracle works in the computational basis: it diagonalizes J^2
on the J_z = 0 subspace, samples inside the J(J+1) eigenspace and traces out B
directly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from . import cg as cgmod
from .errors import DomainError, InvariantViolation, NumericalError, SizeLimitError
from .sectors import (
    Bipartition,
    SectorSpec,
    multiplicity,
    pair_set,
    pair_set_m,
    magnetizations,
)

DEFAULT_MAX_DIM = 20_000
DEFAULT_ORACLE_MAX_V = 14
NEGATIVE_TOL = 1e-8
ORACLE_STREAM = 0xA5
GAUSS_STREAM = 0x5A

Pair = Tuple[int, int]


def sample_rng(seed: int, i: int, stream: Optional[int] = None) -> np.random.Generator:
    """Generator for sample ``i``; independent of how samples are split across workers."""
    key = (i,) if stream is None else (stream, i)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    # E|z|^2 = 1
    z = rng.standard_normal(size=(2,) + tuple(np.atleast_1d(size)))
    return (z[0] + 1j * z[1]) / math.sqrt(2.0)


# -- layout --------------------------------------------------------------------


@dataclass(frozen=True)
class MBlock:
    twoM: int
    row_ja: Tuple[int, ...]
    row_offsets: Tuple[int, ...]
    col_jb: Tuple[int, ...]
    n_rows: int
    n_cols: int
    index: np.ndarray = field(repr=False, compare=False)
    weight: np.ndarray = field(repr=False, compare=False)


class Layout:
    """Flat storage order of the blocks plus the gather tables for every m."""

    def __init__(self, sector: SectorSpec, split: Bipartition, cg_provider=None):
        if sector.V != split.V:
            raise DomainError("sector and split disagree on V")
        self.sector, self.split = sector, split
        provider = cg_provider or cgmod.cg_squared
        self.pairs: List[Pair] = pair_set(sector, split)
        self.shapes: Dict[Pair, Tuple[int, int]] = {}
        self.offsets: Dict[Pair, int] = {}
        off = 0
        for a, b in self.pairs:
            shape = (multiplicity(split.VA, a), multiplicity(split.VB, b))
            self.shapes[(a, b)] = shape
            self.offsets[(a, b)] = off
            off += shape[0] * shape[1]
        self.d = off
        if self.d != multiplicity(sector.V, sector.twoJ):
            raise InvariantViolation(f"block sizes sum to {self.d}, expected n_J^V")
        self.mblocks: List[MBlock] = []
        for twoM in magnetizations(split):
            pairs_m = pair_set_m(sector, split, twoM)
            if pairs_m:
                self.mblocks.append(self._gather(twoM, pairs_m, provider))

    def _gather(self, twoM: int, pairs_m: Sequence[Pair], provider) -> MBlock:
        ja = sorted({a for a, _ in pairs_m})
        jb = sorted({b for _, b in pairs_m})
        row_off, r = {}, 0
        for a in ja:
            row_off[a] = r
            r += multiplicity(self.split.VA, a)
        col_off, c = {}, 0
        for b in jb:
            col_off[b] = c
            c += multiplicity(self.split.VB, b)
        index = np.zeros((r, c), dtype=np.int64)
        weight = np.zeros((r, c))
        for a, b in pairs_m:
            na, nb = self.shapes[(a, b)]
            coef = provider(a, twoM, b, self.sector.twoJ).amplitude
            flat = self.offsets[(a, b)] + np.arange(na * nb).reshape(na, nb)
            index[row_off[a] : row_off[a] + na, col_off[b] : col_off[b] + nb] = flat
            weight[row_off[a] : row_off[a] + na, col_off[b] : col_off[b] + nb] = coef
        return MBlock(
            twoM, tuple(ja), tuple(row_off[a] for a in ja), tuple(jb), r, c, index, weight
        )

    @property
    def gather_size(self) -> int:
        return sum(mb.n_rows * mb.n_cols for mb in self.mblocks)


@lru_cache(maxsize=64)
def layout_for(sector: SectorSpec, split: Bipartition) -> Layout:
    return Layout(sector, split)


def _check_size(d: int, max_dim: int) -> None:
    if d > max_dim:
        raise SizeLimitError(f"sector dimension d={d} exceeds the cap {max_dim}")


# -- block state and reduced density ---------------------------------------------


@dataclass
class BlockState:
    """Blocks W^(J_A, J_B) of a fixed-trace random state."""

    blocks: Dict[Pair, np.ndarray]
    seed: Optional[Tuple[int, ...]] = None

    def flat(self, layout: Layout) -> np.ndarray:
        out = np.empty(layout.d, dtype=complex)
        for p in layout.pairs:
            off = layout.offsets[p]
            na, nb = layout.shapes[p]
            out[off : off + na * nb] = self.blocks[p].reshape(-1)
        return out

    @classmethod
    def from_flat(cls, vec: np.ndarray, layout: Layout, seed=None) -> "BlockState":
        blocks = {}
        for p in layout.pairs:
            off = layout.offsets[p]
            na, nb = layout.shapes[p]
            blocks[p] = vec[off : off + na * nb].reshape(na, nb).copy()
        return cls(blocks, seed)

    def norm_sq(self) -> float:
        return math.fsum(float(np.vdot(w, w).real) for w in self.blocks.values())


def sample_block_state(
    sector: SectorSpec, split: Bipartition, rng: np.random.Generator
) -> BlockState:
    """Uniform point on the unit sphere of the d complex coefficients."""
    lay = layout_for(sector, split)
    vec = _complex_normal(rng, lay.d)
    vec /= np.linalg.norm(vec)
    return BlockState.from_flat(vec, lay)


@dataclass
class ReducedDensity:
    mblocks: Dict[int, np.ndarray]

    def trace(self) -> float:
        return math.fsum(float(np.trace(b).real) for b in self.mblocks.values())

    def spectrum(self) -> np.ndarray:
        if not self.mblocks:
            return np.zeros(0)
        return np.concatenate([np.linalg.eigvalsh(b) for b in self.mblocks.values()])


def reduced_density(
    state: BlockState,
    sector: SectorSpec,
    split: Bipartition,
    cg_provider: Optional[Callable] = None,
) -> ReducedDensity:
    lay = layout_for(sector, split) if cg_provider is None else Layout(sector, split, cg_provider)
    if set(state.blocks) != set(lay.pairs):
        raise InvariantViolation("state blocks do not match the sector's pair set")
    for p in lay.pairs:
        if state.blocks[p].shape != lay.shapes[p]:
            raise InvariantViolation(f"block {p} has shape {state.blocks[p].shape}")
    vec = state.flat(lay)
    out = {}
    for mb in lay.mblocks:
        w_hat = vec[mb.index] * mb.weight
        out[mb.twoM] = w_hat @ w_hat.conj().T
    return ReducedDensity(out)


def _clean(eigs: np.ndarray) -> np.ndarray:
    low = eigs.min(initial=0.0)
    if low < -NEGATIVE_TOL:
        raise NumericalError(f"eigenvalue {low:.3e} is below -{NEGATIVE_TOL}")
    return np.clip(eigs, 0.0, None)


def spectrum_entropy(eigs: np.ndarray) -> float:
    p = _clean(np.asarray(eigs, dtype=float))
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def entropy(rho: ReducedDensity) -> float:
    """Von Neumann entropy in nats."""
    tr = rho.trace()
    if abs(tr - 1) > 1e-8:
        raise NumericalError(f"trace {tr} is not 1")
    return spectrum_entropy(rho.spectrum())


def purity(rho: ReducedDensity) -> float:
    return math.fsum(float(np.sum(np.abs(b) ** 2)) for b in rho.mblocks.values())


# -- batched evaluation -----------------------------------------------------------


def _batch_spectra(flat: np.ndarray, lay: Layout):
    """Yield per-m eigenvalue arrays of shape (S, k) for a batch of flat states."""
    for mb in lay.mblocks:
        w_hat = flat[:, mb.index] * mb.weight
        if mb.n_rows <= mb.n_cols:
            gram = w_hat @ np.conj(np.swapaxes(w_hat, 1, 2))
        else:
            gram = np.conj(np.swapaxes(w_hat, 1, 2)) @ w_hat
        yield np.linalg.eigvalsh(gram)


def _batch_observables(flat: np.ndarray, lay: Layout) -> Tuple[np.ndarray, np.ndarray]:
    """Entropy and purity of each normalized state in the batch."""
    n = flat.shape[0]
    s = np.zeros(n)
    pur = np.zeros(n)
    for eigs in _batch_spectra(flat, lay):
        low = eigs.min()
        if low < -NEGATIVE_TOL:
            raise NumericalError(f"eigenvalue {low:.3e} is below -{NEGATIVE_TOL}")
        p = np.clip(eigs, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            s -= np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0), axis=1)
        pur += np.sum(eigs * eigs, axis=1)
    return s, pur


def _batch_xlogx(flat: np.ndarray, lay: Layout) -> np.ndarray:
    """Tr(rho log rho) for unnormalized states (Gaussian weight)."""
    out = np.zeros(flat.shape[0])
    for eigs in _batch_spectra(flat, lay):
        p = np.clip(eigs, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            out += np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0), axis=1)
    return out


def chunk_size(lay: Layout, budget: int = 1 << 22) -> int:
    """Samples per work unit; fixed by the layout so results do not depend on workers."""
    return int(max(1, min(256, budget // max(1, lay.gather_size))))


def _draw(seed: int, start: int, stop: int, d: int, stream: Optional[int]) -> np.ndarray:
    return np.stack([_complex_normal(sample_rng(seed, i, stream), d) for i in range(start, stop)])


def _run_chunk(args) -> Tuple[int, np.ndarray, np.ndarray]:
    V, twoJ, VA, seed, start, stop, mode = args
    lay = layout_for(SectorSpec(V, twoJ), Bipartition.of(V, VA))
    if mode == "gauss":
        flat = _draw(seed, start, stop, lay.d, GAUSS_STREAM)
        return start, _batch_xlogx(flat, lay), np.zeros(0)
    if lay.d == 1:
        # a one-dimensional sector holds a single state up to a global phase
        flat = np.ones((stop - start, 1), dtype=complex)
    else:
        flat = _draw(seed, start, stop, lay.d, None)
        flat /= np.linalg.norm(flat, axis=1, keepdims=True)
    s, p = _batch_observables(flat, lay)
    return start, s, p


# -- statistics ----------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: Optional[int]
    values: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def variance(self) -> float:
        return self.stderr**2 * self.n_samples


def summarize(values: np.ndarray, seed: Optional[int]) -> EntropyEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise DomainError("no samples")
    if np.all(values == values[0]):
        return EntropyEstimate(float(values[0]), 0.0, n, seed, values)
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1) if n > 1 else 0.0
    return EntropyEstimate(mean, math.sqrt(var / n), n, seed, values)


@dataclass(frozen=True)
class MCAverage:
    entropy: EntropyEstimate
    purity: EntropyEstimate
    d: int


def _collect(V, twoJ, VA, n_samples, seed, workers, mode):
    lay = layout_for(SectorSpec(V, twoJ), Bipartition.of(V, VA))
    step = chunk_size(lay)
    tasks = [
        (V, twoJ, VA, seed, lo, min(n_samples, lo + step), mode)
        for lo in range(0, n_samples, step)
    ]
    s = np.empty(n_samples)
    p = np.empty(n_samples) if mode != "gauss" else None
    if workers <= 1 or len(tasks) == 1:
        results = map(_run_chunk, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_chunk, tasks)
    try:
        for start, sv, pv in results:
            s[start : start + sv.size] = sv
            if p is not None:
                p[start : start + pv.size] = pv
    finally:
        if workers > 1 and len(tasks) > 1:
            pool.shutdown()
    return s, p


def mc_average(
    sector: SectorSpec,
    split: Bipartition,
    n_samples: int,
    seed: int,
    workers: int = 1,
    max_dim: int = DEFAULT_MAX_DIM,
) -> MCAverage:
    """Fixed-trace Monte Carlo estimate of <S_A> and <Tr rho_A^2>.

    Sample ``i`` always comes from ``sample_rng(seed, i)`` and the per-sample
    values are reduced in index order, so the result is bit-identical for any
    ``workers``.
    """
    if n_samples < 2:
        raise DomainError("need at least two samples")
    d = multiplicity(sector.V, sector.twoJ)
    _check_size(d, max_dim)
    s, p = _collect(sector.V, sector.twoJ, split.VA, n_samples, seed, workers, "fixed")
    return MCAverage(summarize(s, seed), summarize(p, seed), d)


def digamma_entropy(
    sector: SectorSpec,
    split: Bipartition,
    n_samples: int,
    seed: int,
    workers: int = 1,
    max_dim: int = DEFAULT_MAX_DIM,
) -> EntropyEstimate:
    """<S_A> from Gaussian-weight blocks: Psi(d+1) - <Tr(rho log rho)>/d, E|W|^2 = 1."""
    if n_samples < 2:
        raise DomainError("need at least two samples")
    d = multiplicity(sector.V, sector.twoJ)
    _check_size(d, max_dim)
    x, _ = _collect(sector.V, sector.twoJ, split.VA, n_samples, seed, workers, "gauss")
    return summarize(float(special.digamma(d + 1)) - x / d, seed)


# -- computational-basis oracle ---------------------------------------------------------


def _zero_magnetization_states(V: int) -> np.ndarray:
    """Bit patterns with V/2 up spins; site k sits at bit V-1-k."""
    if V % 2:
        raise DomainError("J_z = 0 needs even V")
    states = [sum(1 << (V - 1 - k) for k in ups) for ups in combinations(range(V), V // 2)]
    return np.array(sorted(states), dtype=np.int64)


def _total_spin_sq(states: np.ndarray, V: int) -> np.ndarray:
    """J^2 = 3V/4 - V(V-1)/4 + sum_{a<b} P_ab on the given magnetization subspace."""
    dim = states.size
    mat = np.zeros((dim, dim))
    mat[np.diag_indices(dim)] = 0.75 * V - V * (V - 1) / 4
    rows = np.arange(dim)
    for a, b in combinations(range(V), 2):
        ba, bb = V - 1 - a, V - 1 - b
        differ = ((states >> ba) ^ (states >> bb)) & 1
        swapped = states ^ (differ * ((1 << ba) | (1 << bb)))
        cols = np.searchsorted(states, swapped)
        np.add.at(mat, (rows, cols), 1.0)
    return mat


def _check_oracle_size(V: int, max_V: int) -> None:
    if V > max_V:
        raise SizeLimitError(f"oracle is capped at V <= {max_V}, got V={V}")


@lru_cache(maxsize=32)
def _oracle_basis_cached(V: int, twoJ: int) -> Tuple[np.ndarray, np.ndarray]:
    states = _zero_magnetization_states(V)
    evals, evecs = np.linalg.eigh(_total_spin_sq(states, V))
    J = twoJ / 2
    sel = np.abs(evals - J * (J + 1)) < 1e-9
    basis = evecs[:, sel]
    expected = multiplicity(V, twoJ)
    if basis.shape[1] != expected:
        raise InvariantViolation(
            f"J^2 eigenspace has {basis.shape[1]} vectors, expected n_J^V = {expected}"
        )
    basis.setflags(write=False)
    return states, basis


def oracle_sector_basis(sector: SectorSpec, max_V: int = DEFAULT_ORACLE_MAX_V):
    """(states, basis): computational states with J_z = 0 and the J(J+1) eigenvectors as columns."""
    _check_oracle_size(sector.V, max_V)
    return _oracle_basis_cached(sector.V, sector.twoJ)


def partial_trace_spectrum(psi: np.ndarray, V: int, VA: int) -> np.ndarray:
    """Eigenvalues of rho_A for full 2^V state vectors (last axis), A = first VA sites."""
    psi = np.asarray(psi)
    m = psi.reshape(psi.shape[:-1] + (1 << VA, 1 << (V - VA)))
    sv = np.linalg.svd(m, compute_uv=False)
    return sv**2


def oracle_entropy_average(
    sector: SectorSpec,
    split: Bipartition,
    n_samples: int,
    seed: int,
    max_V: int = DEFAULT_ORACLE_MAX_V,
) -> EntropyEstimate:
    """Haar average of S_A by brute-force partial trace in the computational basis."""
    if n_samples < 1:
        raise DomainError("need at least one sample")
    if sector.V != split.V:
        raise DomainError("sector and split disagree on V")
    states, basis = oracle_sector_basis(sector, max_V)
    V = sector.V
    values = np.empty(n_samples)
    step = 256
    for lo in range(0, n_samples, step):
        hi = min(n_samples, lo + step)
        if basis.shape[1] == 1:
            coef = np.ones((hi - lo, 1), dtype=complex)
        else:
            coef = _draw(seed, lo, hi, basis.shape[1], ORACLE_STREAM)
            coef /= np.linalg.norm(coef, axis=1, keepdims=True)
        full = np.zeros((hi - lo, 1 << V), dtype=complex)
        full[:, states] = coef @ basis.T
        spectra = partial_trace_spectrum(full, V, split.VA)
        values[lo:hi] = [spectrum_entropy(row) for row in spectra]
    return summarize(values, seed)


# -- explicit embedding (used to cross-check single samples) ---------------------------


def _spin_ops(n: int):
    """Dense S_z and S_- on n sites (site k at bit n-1-k)."""
    dim = 1 << n
    idx = np.arange(dim)
    sz = np.zeros(dim)
    lower = np.zeros((dim, dim))
    for k in range(n):
        bit = n - 1 - k
        up = (idx >> bit) & 1
        sz += np.where(up == 1, 0.5, -0.5)
        src = idx[up == 1]
        lower[src ^ (1 << bit), src] = 1.0
    return sz, lower


@lru_cache(maxsize=32)
def multiplet_basis(n: int, twoJ: int) -> np.ndarray:
    """Array [a, m_index, :] of standard-phase states |J, m, a> on n sites, m = J, J-1, ..., -J."""
    if n > 12:
        raise SizeLimitError("multiplet_basis is meant for small subsystems")
    sz, lower = _spin_ops(n)
    J = twoJ / 2
    top = np.flatnonzero(np.isclose(sz, J))
    raising = lower.T
    # highest-weight vectors: kernel of S_+ inside the S_z = J subspace
    if twoJ == n:
        hw = np.zeros((top.size, 1))
        hw[:, 0] = 1.0
    else:
        block = raising[:, top]
        _, sv, vh = np.linalg.svd(block, full_matrices=True)
        rank = int(np.sum(sv > 1e-10))
        hw = vh[rank:].conj().T
    count = hw.shape[1]
    if count != multiplicity(n, twoJ):
        raise InvariantViolation("highest-weight count disagrees with n_J")
    out = np.zeros((count, twoJ + 1, 1 << n))
    for a in range(count):
        vec = np.zeros(1 << n)
        vec[top] = hw[:, a].real
        out[a, 0] = vec
        for step in range(twoJ):
            m = J - step
            vec = lower @ vec / math.sqrt((J + m) * (J - m + 1))
            out[a, step + 1] = vec
    return out


def embed_block_state(state: BlockState, sector: SectorSpec, split: Bipartition) -> np.ndarray:
    """Full 2^V amplitude vector sum W_ab sum_m c_m |J_A m a> (x) |J_B -m b>."""
    VA, VB = split.VA, split.VB
    psi = np.zeros(1 << sector.V, dtype=complex)
    for (a2, b2), w in state.blocks.items():
        basis_a = multiplet_basis(VA, a2)
        basis_b = multiplet_basis(VB, b2)
        for twoM in range(-min(a2, b2), min(a2, b2) + 1, 2):
            c = cgmod.cg_squared(a2, twoM, b2, sector.twoJ).amplitude
            if c == 0.0:
                continue
            ia = (a2 - twoM) // 2
            ib = (b2 + twoM) // 2
            # sum_ab W_ab |a> (x) |b>  as an outer-product matrix
            left = np.tensordot(w, basis_a[:, ia, :], axes=([0], [0]))
            pair = np.tensordot(left, basis_b[:, ib, :], axes=([0], [0]))
            psi += c * pair.reshape(-1)
    return psi


def total_spin_sq_full(psi: np.ndarray, V: int) -> float:
    """<psi|J^2|psi> for a full 2^V state vector."""
    sz, lower = _spin_ops(V)
    jp = lower.T @ psi
    jz = sz * psi
    return float(np.vdot(psi, lower @ jp + jz * sz + jz).real)
