import math

import numpy as np
import pytest

from su2ent import ensemble as ens
from su2ent.cg import cg_squared
from su2ent.errors import InvariantViolation, NumericalError, SizeLimitError
from su2ent.moments import normalized_purity
from su2ent.sectors import Bipartition, SectorSpec

STRETCHED = -(2 / 3) * math.log(2 / 3) - 2 * (1 / 6) * math.log(1 / 6)


def sec(V, twoJ, VA):
    return SectorSpec(V, twoJ), Bipartition.of(V, VA)


def test_one_dimensional_sector_block():
    s, b = sec(4, 4, 2)
    st = ens.sample_block_state(s, b, ens.sample_rng(1, 0))
    assert list(st.blocks) == [(2, 2)]
    assert st.blocks[(2, 2)].shape == (1, 1)
    assert abs(abs(st.blocks[(2, 2)][0, 0]) - 1) < 1e-15


def test_samples_are_normalized():
    s, b = sec(10, 2, 4)
    for i in range(20):
        st = ens.sample_block_state(s, b, ens.sample_rng(3, i))
        assert abs(st.norm_sq() - 1) < 1e-12


def test_sphere_coordinates_are_exchangeable():
    s, b = sec(6, 2, 2)
    lay = ens.layout_for(s, b)
    vals = np.array([np.abs(ens.sample_block_state(s, b, ens.sample_rng(9, i)).flat(lay)) ** 2 for i in range(10_000)])
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(len(vals))
    assert np.all(np.abs(mean - 1 / lay.d) < 5 * se)


def test_stretched_reduced_density():
    s, b = sec(4, 4, 2)
    rho = ens.reduced_density(ens.sample_block_state(s, b, ens.sample_rng(0, 0)), s, b)
    assert sorted(rho.mblocks) == [-2, 0, 2]
    vals = {m: float(blk[0, 0].real) for m, blk in rho.mblocks.items()}
    assert vals[0] == pytest.approx(2 / 3, abs=1e-14)
    assert vals[2] == pytest.approx(1 / 6, abs=1e-14) and vals[-2] == pytest.approx(1 / 6, abs=1e-14)
    assert ens.entropy(rho) == pytest.approx(STRETCHED, abs=1e-14)
    assert ens.purity(rho) == pytest.approx(0.5, abs=1e-14)


def test_trace_is_one():
    s, b = sec(8, 2, 3)
    for i in range(100):
        rho = ens.reduced_density(ens.sample_block_state(s, b, ens.sample_rng(4, i)), s, b)
        assert abs(rho.trace() - 1) < 1e-10


def test_edge_magnetization_block():
    s, b = sec(4, 2, 2)
    st = ens.sample_block_state(s, b, ens.sample_rng(5, 0))
    rho = ens.reduced_density(st, s, b)
    w = abs(st.blocks[(2, 2)][0, 0]) ** 2
    for m in (-2, 2):
        assert rho.mblocks[m].shape == (1, 1)
        assert rho.mblocks[m][0, 0].real == pytest.approx(float(cg_squared(2, m, 2, 2).value) * w, abs=1e-15)


def test_entropy_special_spectra():
    assert ens.spectrum_entropy(np.array([1.0, 0.0, 0.0])) == 0.0
    assert ens.spectrum_entropy(np.full(7, 1 / 7)) == pytest.approx(math.log(7))
    assert ens.spectrum_entropy(np.array([0.5, 0.5, -1e-12])) == pytest.approx(math.log(2))
    with pytest.raises(NumericalError):
        ens.spectrum_entropy(np.array([1.0, -1e-6]))


def test_entropy_rejects_bad_trace():
    with pytest.raises(NumericalError):
        ens.entropy(ens.ReducedDensity({0: np.eye(2)}))


def test_pure_state_purity():
    assert ens.purity(ens.ReducedDensity({0: np.array([[1.0]])})) == 1.0


def test_reduced_density_checks_blocks():
    s, b = sec(4, 2, 2)
    with pytest.raises(InvariantViolation):
        ens.reduced_density(ens.BlockState({(2, 2): np.ones((1, 1))}), s, b)


def test_per_sample_bounds():
    s, b = sec(8, 2, 3)
    est = ens.mc_average(s, b, 500, 2)
    d = est.d
    assert np.all(est.entropy.values >= -1e-12)
    assert np.all(est.entropy.values <= math.log(d) + 1e-12)
    assert np.all(est.purity.values >= 1 / d - 1e-12)


def test_mc_d1_sector_deterministic():
    est = ens.mc_average(*sec(4, 4, 2), 100, 1)
    assert est.entropy.stderr == 0 and est.entropy.mean == pytest.approx(STRETCHED, abs=1e-14)
    assert ens.mc_average(*sec(2, 0, 1), 50, 1).entropy.mean == pytest.approx(math.log(2), abs=1e-15)


def test_mc_purity_matches_planar_value():
    s, b = sec(8, 2, 3)
    est = ens.mc_average(s, b, 4000, 17).purity
    assert abs(est.mean - float(normalized_purity(s, b))) < 3 * est.stderr


def test_mc_bit_identical_across_workers():
    s, b = sec(10, 2, 5)
    one = ens.mc_average(s, b, 700, 123, workers=1)
    eight = ens.mc_average(s, b, 700, 123, workers=8)
    assert one.entropy.mean == eight.entropy.mean
    assert one.purity.mean == eight.purity.mean
    assert np.array_equal(one.entropy.values, eight.entropy.values)


def test_mc_size_cap():
    with pytest.raises(SizeLimitError):
        ens.mc_average(*sec(30, 2, 3), 10, 1)


@pytest.mark.parametrize("V,twoJ,count", [(2, 0, 1), (4, 2, 3), (6, 0, 5)])
def test_oracle_basis_counts(V, twoJ, count):
    states, basis = ens.oracle_sector_basis(SectorSpec(V, twoJ))
    assert basis.shape[1] == count
    assert np.allclose(basis.conj().T @ basis, np.eye(count), atol=1e-12)


def test_oracle_singlet():
    states, basis = ens.oracle_sector_basis(SectorSpec(2, 0))
    full = np.zeros(4)
    full[states] = basis[:, 0].real
    assert abs(abs(full @ np.array([0, 1, -1, 0]) / math.sqrt(2)) - 1) < 1e-12


def test_oracle_deterministic_sectors():
    est = ens.oracle_entropy_average(*sec(4, 4, 2), 50, 3)
    assert np.allclose(est.values, STRETCHED, atol=1e-13)
    est = ens.oracle_entropy_average(*sec(2, 0, 1), 50, 3)
    assert np.allclose(est.values, math.log(2), atol=1e-14)


def test_oracle_size_cap():
    with pytest.raises(SizeLimitError):
        ens.oracle_entropy_average(*sec(16, 0, 4), 2, 1)


def test_oracle_matches_blocks_v6():
    s, b = sec(6, 2, 2)
    mc = ens.mc_average(s, b, 2000, 8).entropy
    orc = ens.oracle_entropy_average(s, b, 2000, 8)
    assert abs(mc.mean - orc.mean) < 3 * math.hypot(mc.stderr, orc.stderr)


def _var_se(x):
    n = len(x)
    c = x - x.mean()
    m2, m4 = np.mean(c**2), np.mean(c**4)
    return m2 * n / (n - 1), math.sqrt(max(m4 - m2 * m2, 0.0) / n)


@pytest.mark.slow
def test_block_and_partial_trace_distributions_agree():
    n = 1000
    for V in range(2, 13, 2):
        for twoJ in range(0, V + 1, 2):
            for VA in range(1, V // 2 + 1):
                s, b = sec(V, twoJ, VA)
                mc = ens.mc_average(s, b, n, 31).entropy
                orc = ens.oracle_entropy_average(s, b, n, 31)
                tol = 1e-12
                assert abs(mc.mean - orc.mean) <= 3 * math.hypot(mc.stderr, orc.stderr) + tol, (V, twoJ, VA)
                v1, e1 = _var_se(mc.values)
                v2, e2 = _var_se(orc.values)
                assert abs(v1 - v2) <= 5 * math.hypot(e1, e2) + tol, (V, twoJ, VA)


def test_embedding_has_total_spin_and_same_spectrum():
    for V, twoJ, VA in ((4, 2, 2), (6, 2, 3), (6, 4, 2), (8, 2, 3), (8, 0, 4)):
        s, b = sec(V, twoJ, VA)
        st = ens.sample_block_state(s, b, ens.sample_rng(11, V + twoJ))
        psi = ens.embed_block_state(st, s, b)
        J = twoJ / 2
        assert np.linalg.norm(psi) == pytest.approx(1, abs=1e-12)
        assert ens.total_spin_sq_full(psi, V) == pytest.approx(J * (J + 1), abs=1e-10)
        blocks = np.sort(ens.reduced_density(st, s, b).spectrum())
        full = np.sort(ens.partial_trace_spectrum(psi, V, VA))
        full = full[-blocks.size:]
        assert np.allclose(blocks, full, atol=1e-12)


def test_digamma_relation():
    s, b = sec(8, 2, 3)
    fixed = ens.mc_average(s, b, 4000, 21).entropy
    gauss = ens.digamma_entropy(s, b, 4000, 21)
    assert abs(fixed.mean - gauss.mean) < 3 * math.hypot(fixed.stderr, gauss.stderr)


def test_rng_streams_are_stable():
    a = ens.sample_rng(5, 3).standard_normal(4)
    b = ens.sample_rng(5, 3).standard_normal(4)
    c = ens.sample_rng(5, 3, ens.ORACLE_STREAM).standard_normal(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
