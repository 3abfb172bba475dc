"""Planar moments <Tr rho^L> of the Gaussian-weight ensemble as sums over rooted trees.

A tree is stored as a nested tuple of children (each child again a nested
tuple) together with the colour of the root; colours alternate A/B along every
edge.  At fixed magnetization m the nested conditioned sum factorizes:

    E(v, J) = n(J) * prod_{children c} sum_{J_c conditioned on J} lambda_m(edge) E(c, J_c)

and the tree value is sum_m sum_{J_root} E(root, J_root).  Everything is
exact (``Fraction``) and converted to logs only at the end.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations, product
from typing import Dict, List, Optional, Tuple

from .cg import cg_squared, lam
from .errors import DomainError, SizeLimitError
from .sectors import (
    Bipartition,
    SectorSpec,
    ja_range,
    jb_given_ja,
    ja_given_jb,
    jb_range,
    magnetizations,
    multiplicity,
)

MAX_L = 8

Shape = Tuple["Shape", ...]


@dataclass(frozen=True)
class RootedTree:
    shape: Shape
    root: str = "A"
    multiplicity: int = 1

    @property
    def n_vertices(self) -> int:
        return _size(self.shape)

    @property
    def n_edges(self) -> int:
        return self.n_vertices - 1

    def vertices(self) -> List[Tuple[str, Optional[int]]]:
        """(colour, parent index) in depth-first order; the root has parent None."""
        out: List[Tuple[str, Optional[int]]] = []

        def walk(node, colour, parent):
            me = len(out)
            out.append((colour, parent))
            for child in node:
                walk(child, _other(colour), me)

        walk(self.shape, self.root, None)
        return out

    def colour_counts(self) -> Counter:
        return Counter(c for c, _ in self.vertices())


def _other(colour: str) -> str:
    return "B" if colour == "A" else "A"


def _size(shape) -> int:
    return 1 + sum(_size(c) for c in shape)


def canonical(shape) -> Shape:
    return tuple(sorted(canonical(c) for c in shape))


def _plane_trees(edges: int):
    """All ordered (plane) trees with the given number of edges."""
    if edges == 0:
        yield ()
        return
    # first child subtree takes k edges, the rest of the root's children take the remainder
    for k in range(edges):
        for first in _plane_trees(k):
            for rest in _plane_trees(edges - 1 - k):
                yield (first,) + rest


def catalan(L: int) -> int:
    return math.comb(2 * L, L) // (L + 1)


def enumerate_trees(L: int, root: str = "A", max_L: int = MAX_L) -> List[RootedTree]:
    """Inequivalent rooted bipartite trees with L edges and their multiplicities.

    Multiplicities count the plane orderings of each tree, so they sum to the
    Catalan number.
    """
    if not 1 <= L <= max_L:
        raise DomainError(f"L must lie in 1..{max_L}, got {L}")
    if root not in ("A", "B"):
        raise DomainError("root colour must be 'A' or 'B'")
    counts = Counter(canonical(t) for t in _plane_trees(L))
    return [RootedTree(s, root, c) for s, c in sorted(counts.items(), key=lambda kv: _key(kv[0]))]


def _key(shape):
    # stars first, then by depth and the nested structure
    return (_depth(shape), -len(shape), repr(shape))


def _depth(shape) -> int:
    return 0 if not shape else 1 + max(_depth(c) for c in shape)


def star(L: int, root: str = "A") -> RootedTree:
    return RootedTree(tuple(() for _ in range(L)), root, 1)


def reroot(tree: RootedTree, vertex: int) -> RootedTree:
    """Same unrooted tree with the root moved to ``vertex`` (depth-first index)."""
    verts = tree.vertices()
    if not 0 <= vertex < len(verts):
        raise DomainError("vertex index out of range")
    adj: Dict[int, List[int]] = {i: [] for i in range(len(verts))}
    for i, (_, p) in enumerate(verts):
        if p is not None:
            adj[i].append(p)
            adj[p].append(i)

    def build(v, parent):
        return canonical(tuple(build(u, v) for u in adj[v] if u != parent))

    return RootedTree(build(vertex, None), verts[vertex][0], tree.multiplicity)


def cut(tree: RootedTree, child_vertex: int) -> Tuple[RootedTree, RootedTree]:
    """Split at the edge above ``child_vertex``; returns (part with the root, detached part)."""
    verts = tree.vertices()
    if not 0 < child_vertex < len(verts):
        raise DomainError("need a non-root vertex")

    def strip(node, colour, idx):
        kept = []
        detached = None
        nxt = idx + 1
        for child in node:
            if nxt == child_vertex:
                detached = (child, _other(colour))
            else:
                sub, det = strip(child, _other(colour), nxt)
                kept.append(sub)
                detached = detached or det
            nxt += _size(child)
        return tuple(kept), detached

    kept, (sub, colour) = strip(tree.shape, tree.root, 0)
    return RootedTree(canonical(kept), tree.root), RootedTree(canonical(sub), colour)


# -- exact evaluation ----------------------------------------------------------


@dataclass(frozen=True)
class MomentValue:
    exact: Fraction

    @property
    def log(self) -> float:
        if self.exact <= 0:
            return -math.inf
        return math.log(self.exact.numerator) - math.log(self.exact.denominator)

    @property
    def value(self) -> float:
        try:
            return float(self.exact)
        except OverflowError:
            return math.inf

    def __add__(self, other: "MomentValue") -> "MomentValue":
        return MomentValue(self.exact + other.exact)

    def __mul__(self, k) -> "MomentValue":
        return MomentValue(self.exact * k)

    __rmul__ = __mul__


class _Evaluator:
    def __init__(self, sector: SectorSpec, split: Bipartition):
        if sector.V != split.V:
            raise DomainError("sector and split disagree on V")
        self.sector, self.split = sector, split
        self.twoJ = sector.twoJ
        self.memo: Dict = {}
        self.roots = {"A": list(ja_range(sector, split)), "B": list(jb_range(sector, split))}
        self.nA = {a: multiplicity(split.VA, a) for a in self.roots["A"]}
        self.nB = {b: multiplicity(split.VB, b) for b in self.roots["B"]}
        self.nbrs = {
            ("A", a): jb_given_ja(sector, split, a) for a in self.roots["A"]
        }
        self.nbrs.update({("B", b): ja_given_jb(sector, split, b) for b in self.roots["B"]})

    def _lam(self, colour: str, J: int, Jc: int, twoM: int) -> Fraction:
        a, b = (J, Jc) if colour == "A" else (Jc, J)
        return lam(a, twoM, b, self.twoJ)

    def weight(self, shape, colour: str, J: int, twoM: int) -> Fraction:
        key = (shape, colour, J, twoM)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        n = self.nA[J] if colour == "A" else self.nB[J]
        total = Fraction(n)
        child_colour = _other(colour)
        for child in shape:
            s = Fraction(0)
            for Jc in self.nbrs[(colour, J)]:
                l = self._lam(colour, J, Jc, twoM)
                if l:
                    s += l * self.weight(child, child_colour, Jc, twoM)
            total *= s
            if not total:
                break
        self.memo[key] = total
        return total

    def tree(self, tree: RootedTree) -> Fraction:
        total = Fraction(0)
        for twoM in magnetizations(self.split):
            for J in self.roots[tree.root]:
                total += self.weight(tree.shape, tree.root, J, twoM)
        return total


_EVALUATORS: Dict[Tuple[SectorSpec, Bipartition], _Evaluator] = {}


def _evaluator(sector: SectorSpec, split: Bipartition) -> _Evaluator:
    key = (sector, split)
    ev = _EVALUATORS.get(key)
    if ev is None:
        if len(_EVALUATORS) > 32:
            _EVALUATORS.clear()
        ev = _EVALUATORS[key] = _Evaluator(sector, split)
    return ev


def tree_value(tree: RootedTree, sector: SectorSpec, split: Bipartition) -> MomentValue:
    """Nested conditioned sum of one tree (without its multiplicity)."""
    if tree.n_edges > MAX_L:
        raise SizeLimitError(f"trees are capped at {MAX_L} edges")
    if tree.n_edges == 0:
        raise DomainError("a tree needs at least one edge")
    return MomentValue(_evaluator(sector, split).tree(tree))


def planar_moment(L: int, sector: SectorSpec, split: Bipartition) -> MomentValue:
    """Sum over enumerated trees of multiplicity times tree value; exact for L <= 2."""
    total = Fraction(0)
    for t in enumerate_trees(L):
        total += t.multiplicity * tree_value(t, sector, split).exact
    return MomentValue(total)


def extremal_terms(L: int, sector: SectorSpec, split: Bipartition) -> Tuple[MomentValue, MomentValue]:
    """The two star sums R_A (A centre, L B leaves) and R_B."""
    if not 1 <= L <= MAX_L:
        raise DomainError(f"L must lie in 1..{MAX_L}")
    return tree_value(star(L, "A"), sector, split), tree_value(star(L, "B"), sector, split)


def normalized_purity(sector: SectorSpec, split: Bipartition) -> Fraction:
    """Fixed-trace <Tr rho_A^2> = <Tr rho^2>_Gauss / (d(d+1))."""
    d = multiplicity(sector.V, sector.twoJ)
    return planar_moment(2, sector, split).exact / (d * (d + 1))


@dataclass(frozen=True)
class DominanceRow:
    V: int
    twoJ: int
    VA: int
    residual: float
    cross: float


def dominance_probe(L: int, j: float, f: float, V_list) -> List[DominanceRow]:
    """(planar - R_A)/R_A and R_B/R_A for each V; both should shrink as V grows when f < 1/2."""
    if not 0 < f < 0.5:
        raise DomainError("dominance_probe needs 0 < f < 1/2")
    rows = []
    for V in V_list:
        twoJ, VA = j * V, f * V
        if twoJ != int(twoJ) or VA != int(VA):
            raise DomainError(f"jV = {twoJ} and fV = {VA} must be integers at V={V}")
        sector = SectorSpec(V, int(twoJ))
        split = Bipartition.of(V, int(VA))
        ra, rb = extremal_terms(L, sector, split)
        total = planar_moment(L, sector, split)
        rows.append(
            DominanceRow(
                V,
                int(twoJ),
                int(VA),
                float((total.exact - ra.exact) / ra.exact),
                float(rb.exact / ra.exact),
            )
        )
    return rows


# -- brute-force Wick oracle -----------------------------------------------------


def wick_moment(L: int, sector: SectorSpec, split: Bipartition, max_coeffs: int = 12) -> Fraction:
    """<Tr rho^L> for i.i.d. unit complex Gaussian blocks, by summing every Wick pairing.

    Works directly on the m-blocks W_hat_m (entries c_m W_ab): for each index
    tuple of Tr (W W^dag)^L and each permutation pairing the W's with the
    W^dag's, a pairing contributes the product of lambda_m over the paired
    entries when every pair lands on the same coefficient.
    """
    from .ensemble import Layout

    d = multiplicity(sector.V, sector.twoJ)
    if d > max_coeffs:
        raise SizeLimitError(f"Wick enumeration is capped at {max_coeffs} coefficients, d={d}")
    lay = Layout(sector, split)
    perms = list(permutations(range(L)))
    total = Fraction(0)
    for mb in lay.mblocks:
        entries = {}
        for r in range(mb.n_rows):
            for c in range(mb.n_cols):
                if mb.weight[r, c] != 0:
                    entries[(r, c)] = int(mb.index[r, c])
        ja_of_row = _labels(mb.row_ja, lay.split.VA)
        jb_of_col = _labels(mb.col_jb, lay.split.VB)
        for rows in product(range(mb.n_rows), repeat=L):
            for cols in product(range(mb.n_cols), repeat=L):
                # W at (rows[l], cols[l]); W^dag at (rows[l+1], cols[l])
                w = [entries.get((rows[l], cols[l])) for l in range(L)]
                if None in w:
                    continue
                wd = [entries.get((rows[(l + 1) % L], cols[l])) for l in range(L)]
                if None in wd:
                    continue
                hits = sum(1 for p in perms if all(w[l] == wd[p[l]] for l in range(L)))
                if not hits:
                    continue
                weight = Fraction(1)
                for l in range(L):
                    weight *= cg_squared(
                        ja_of_row[rows[l]], mb.twoM, jb_of_col[cols[l]], sector.twoJ
                    ).value
                total += hits * weight
    return total


def _labels(spins, size) -> List[int]:
    out = []
    for t in spins:
        out += [t] * multiplicity(size, t)
    return out
