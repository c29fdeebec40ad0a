import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from famapprox.family import brute_force_opt, load_manifest
from famapprox.instances import MIN_OPT_TARGET, block_positions, gen_butterfly_block_family, gen_planted, gen_wishart
from famapprox.linearfam import orthonormalize

from oracles import block_corner_positions, exhaustive_opt


def test_exact_planting():
    inst = gen_planted(8, 10, 0.0, seed=1)
    assert np.array_equal(inst.family.dense_member(inst.planted_id), inst.A)
    assert inst.opt == 0.0


def test_singleton_family():
    inst = gen_planted(12, 1, 0.37, seed=2)
    assert len(inst.family) == 1 and inst.planted_id == 0
    assert abs(np.linalg.norm(inst.A - inst.family.dense_member(0)) - 0.37) <= 1e-12


def test_planted_is_optimal():
    for seed in range(10):
        inst = gen_planted(32, 256, 0.1, decoy_gap=3, seed=seed)
        i, v = brute_force_opt(inst.A, inst.family)
        assert i == inst.planted_id and v == pytest.approx(0.1, rel=1e-12)
        d = inst.family.distances_to(inst.A)
        others = np.delete(d, inst.planted_id)
        assert others.min() >= 3 * 0.1


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 10), st.integers(1, 30),
       st.one_of(st.just(0.0), st.floats(MIN_OPT_TARGET, 2.0)), st.integers(0, 2**31))
def test_recorded_opt_matches_exhaustive_scan(n, size, opt, seed):
    inst = gen_planted(n, size, opt, seed=seed)
    j, w = exhaustive_opt(inst.A, [inst.family.dense_member(i) for i in range(size)])
    assert abs(w - inst.opt) <= 1e-12 * max(1.0, np.linalg.norm(inst.A))


def test_planted_bad_args():
    with pytest.raises(ValueError):
        gen_planted(4, 0, 0.1)
    with pytest.raises(ValueError):
        gen_planted(4, 3, -1.0)
    with pytest.raises(ValueError):
        gen_planted(4, 3, 1e-130)


def test_planted_roundtrip(tmp_path):
    inst = gen_planted(6, 9, 0.2, seed=4)
    inst.save(tmp_path)
    m = load_manifest(tmp_path)
    assert m["planted_id"] == inst.planted_id and m["opt"] == inst.opt and m["seed"] == 4
    assert np.array_equal(m["A"], inst.A)
    assert np.array_equal(m["family"].stack, inst.family.stack)


def test_wishart_symmetric_psd():
    for seed in range(1000):
        A = gen_wishart(16, seed)
        assert np.abs(A - A.T).max() <= 1e-12
        assert np.linalg.eigvalsh(A).min() >= -1e-10 * np.linalg.norm(A, 2)


def test_wishart_scalar():
    for seed in range(20):
        a = gen_wishart(1, seed)
        assert a.shape == (1, 1) and a[0, 0] >= 0


def test_wishart_second_moment():
    n = 8
    vals = [np.linalg.norm(gen_wishart(n, s)) ** 2 for s in range(10_000)]
    assert abs(np.mean(vals) / (2 * n**3 + n**2) - 1) <= 0.05


def test_butterfly_positions():
    L, member = gen_butterfly_block_family(4, seed=0)
    assert L.q == 4
    assert block_positions(4) == block_corner_positions(4) == [(0, 0), (0, 2), (2, 0), (2, 2)]
    for P, (i, j) in zip(L.basis, block_positions(4)):
        assert P[i, j] == 1.0 and np.count_nonzero(P) == 1


def test_butterfly_members_sparse():
    L, member = gen_butterfly_block_family(16, seed=3)
    assert L.q == 16 and np.count_nonzero(member) <= 16
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert np.count_nonzero(L.combine(rng.standard_normal(16))) <= 16
    Q = orthonormalize(L)
    assert np.array_equal(Q.basis != 0, L.basis != 0)


def test_butterfly_needs_square():
    with pytest.raises(ValueError):
        gen_butterfly_block_family(5)
