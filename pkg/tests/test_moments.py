import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from su2ent import ensemble as ens
from su2ent import moments as mo
from su2ent.errors import DomainError
from su2ent.sectors import Bipartition, SectorSpec, multiplicity


def sec(V, twoJ, VA):
    return SectorSpec(V, twoJ), Bipartition.of(V, VA)


@pytest.mark.parametrize("L", range(1, 9))
def test_census_sums_to_catalan(L):
    trees = mo.enumerate_trees(L)
    assert sum(t.multiplicity for t in trees) == math.factorial(2 * L) // (math.factorial(L) * math.factorial(L + 1))


def test_census_small_orders():
    assert [t.shape for t in mo.enumerate_trees(1)] == [((),)]
    assert len(mo.enumerate_trees(2)) == 2
    three = mo.enumerate_trees(3)
    assert [t.multiplicity for t in three] == [1, 2, 1, 1]
    assert [t.shape for t in three] == [
        ((), (), ()),
        ((), ((),)),
        (((), ()),),
        ((((),),),),
    ]


@pytest.mark.parametrize("L", [0, 9])
def test_census_range(L):
    with pytest.raises(DomainError):
        mo.enumerate_trees(L)


def test_first_order_is_dimension():
    for V, twoJ, VA in ((8, 2, 3), (10, 4, 4), (12, 0, 5)):
        s, b = sec(V, twoJ, VA)
        d = multiplicity(V, twoJ)
        assert mo.planar_moment(1, s, b).exact == d
        ra, rb = mo.extremal_terms(1, s, b)
        assert ra.exact == rb.exact == d


def test_stretched_second_order():
    s, b = sec(4, 4, 2)
    vals = [mo.tree_value(t, s, b).exact for t in mo.enumerate_trees(2)]
    assert vals == [Fraction(1, 2), Fraction(1, 2)]
    assert mo.planar_moment(2, s, b).exact == 1
    assert mo.normalized_purity(s, b) == Fraction(1, 2)
    for L in range(1, 6):
        for t in mo.enumerate_trees(L):
            assert mo.tree_value(t, s, b).exact <= 1


def test_planar_second_order_matches_gaussian_sampling():
    s, b = sec(8, 2, 3)
    lay = ens.layout_for(s, b)
    vals = []
    for i in range(6000):
        vec = ens._complex_normal(ens.sample_rng(77, i), lay.d)
        rho = ens.reduced_density(ens.BlockState.from_flat(vec, lay), s, b)
        vals.append(ens.purity(rho))
    vals = np.array(vals)
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - mo.planar_moment(2, s, b).value) < 3 * se


@pytest.mark.parametrize(
    "V,twoJ,VA,value",
    [
        (4, 2, 2, Fraction(5)),
        (6, 2, 2, Fraction(702, 25)),
        (6, 2, 3, Fraction(1161, 50)),
        (6, 0, 3, Fraction(17, 2)),
        (6, 4, 2, Fraction(10)),
        (8, 6, 4, Fraction(329, 25)),
    ],
)
def test_second_order_frozen_wick_values(V, twoJ, VA, value):
    s, b = sec(V, twoJ, VA)
    assert mo.wick_moment(2, s, b) == value
    assert mo.planar_moment(2, s, b).exact == value


def test_second_order_is_exact_for_all_small_sectors():
    checked = 0
    for V in range(2, 9, 2):
        for twoJ in range(0, V + 1, 2):
            if multiplicity(V, twoJ) > 12:
                continue
            for VA in range(1, V):
                s, b = sec(V, twoJ, VA)
                assert mo.wick_moment(2, s, b) == mo.planar_moment(2, s, b).exact
                assert mo.wick_moment(1, s, b) == multiplicity(V, twoJ)
                checked += 1
    assert checked > 30


def test_normalized_purity_in_unit_interval():
    for V, twoJ, VA in ((8, 2, 3), (10, 0, 5), (12, 6, 4), (4, 4, 2)):
        s, b = sec(V, twoJ, VA)
        assert 0 < mo.normalized_purity(s, b) <= 1


def test_extremal_ordering_and_bounds():
    for V, twoJ, VA in ((10, 4, 3), (12, 6, 4), (14, 2, 5)):
        s, b = sec(V, twoJ, VA)
        for L in (2, 3, 4):
            ra, rb = mo.extremal_terms(L, s, b)
            total = mo.planar_moment(L, s, b).exact
            assert ra.exact <= total <= mo.catalan(L) * max(ra.exact, rb.exact) * 10


def test_smaller_side_dominates():
    ra, rb = mo.extremal_terms(3, *sec(20, 10, 6))
    assert ra.exact > rb.exact


def test_equal_halves_tie():
    s, b = sec(12, 4, 6)
    for L in (2, 3, 4):
        ra, rb = mo.extremal_terms(L, s, b)
        assert ra.exact == rb.exact


def test_dominance_probe_monotone():
    for L in (2, 3):
        rows = mo.dominance_probe(L, 0.5, 0.25, [12, 16, 20, 24])
        res = [r.residual for r in rows]
        cross = [r.cross for r in rows]
        assert all(b < a for a, b in zip(res, res[1:]))
        assert all(b < a for a, b in zip(cross, cross[1:]))


def test_dominance_probe_domain():
    with pytest.raises(DomainError):
        mo.dominance_probe(2, 0.5, 0.5, [12])
    with pytest.raises(DomainError):
        mo.dominance_probe(2, 0.5, 0.25, [10])


def test_third_order_extremal_mapping():
    # the multiplicity-two tree is A(B, B(A)); the last chain-like tree is R_B re-rooted
    s, b = sec(16, 8, 4)
    three = mo.enumerate_trees(3)
    assert three[0].shape == mo.star(3).shape
    assert three[1].multiplicity == 2
    r_b = mo.tree_value(mo.star(3, "B"), s, b).exact
    assert mo.tree_value(mo.RootedTree((((), ()),), "A"), s, b).exact == r_b


SECTORS = [(8, 2, 3), (10, 4, 4), (12, 6, 3), (12, 0, 5), (14, 4, 6)]


@pytest.mark.parametrize("V,twoJ,VA", SECTORS)
def test_value_independent_of_root(V, twoJ, VA):
    s, b = sec(V, twoJ, VA)
    for L in (2, 3, 4):
        for t in mo.enumerate_trees(L):
            v = mo.tree_value(t, s, b).exact
            assert v > 0
            for i in range(t.n_vertices):
                assert mo.tree_value(mo.reroot(t, i), s, b).exact == v


@pytest.mark.parametrize("V,twoJ,VA", SECTORS)
def test_cutting_an_edge_bounds_the_tree(V, twoJ, VA):
    s, b = sec(V, twoJ, VA)
    extremal = {mo.star(3).shape}
    for t in mo.enumerate_trees(3):
        if t.shape in extremal:
            continue
        v = mo.tree_value(t, s, b).exact
        for i in range(1, t.n_vertices):
            kept, detached = mo.cut(t, i)
            if kept.n_edges and detached.n_edges:
                assert v <= mo.tree_value(kept, s, b).exact * mo.tree_value(detached, s, b).exact


def test_cut_and_reroot_validation():
    t = mo.enumerate_trees(3)[1]
    with pytest.raises(DomainError):
        mo.cut(t, 0)
    with pytest.raises(DomainError):
        mo.reroot(t, 10)


def test_colour_counts():
    t = mo.RootedTree(((), ((),)), "A")
    assert t.colour_counts() == {"A": 2, "B": 2}
    assert t.n_edges == 3


def test_moment_value_logs():
    s, b = sec(60, 20, 20)
    m = mo.planar_moment(2, s, b)
    assert m.log == pytest.approx(math.log(m.value), rel=1e-12)
    assert mo.MomentValue(Fraction(0)).log == -math.inf
    big = mo.MomentValue(Fraction(10) ** 400)
    assert big.value == math.inf and big.log == pytest.approx(400 * math.log(10))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8).flatmap(lambda h: st.tuples(st.just(2 * h), st.integers(0, h), st.integers(1, 2 * h - 1))))
def test_planar_bounds_property(params):
    V, J, VA = params
    s, b = sec(V, 2 * J, VA)
    d = multiplicity(V, 2 * J)
    p2 = mo.planar_moment(2, s, b).exact
    assert mo.normalized_purity(s, b) == p2 / (d * (d + 1))
    assert 0 < p2 <= d * (d + 1)
