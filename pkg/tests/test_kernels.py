import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from famapprox import _kernels_py, kernels

compiled = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="extension not built")


def test_backend_switch():
    prev = kernels.use_backend("python")
    assert kernels.BACKEND == "python"
    kernels.use_backend(prev)
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 7), st.integers(1, 6), st.integers(0, 2**31))
def test_residual_parity(n, k, l, seed):
    from famapprox import _kernels
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((k, n, n))
    S[rng.random(S.shape) < 0.3] = 0.0  # exercise the zero-skip path
    pi, Z = rng.standard_normal((n, l)), rng.standard_normal((n, l))
    ref = _kernels_py.residual_norms(Z, S, pi, np.inf)
    np.testing.assert_allclose(_kernels.residual_norms(Z, S, pi, np.inf), ref, rtol=1e-12)
    bound = float(np.median(ref))
    got = _kernels.residual_norms(Z, S, pi, bound)
    inside = ref <= bound * (1 - 1e-9)
    np.testing.assert_allclose(got[inside], ref[inside], rtol=1e-12)
    assert np.all(got[ref > bound * (1 + 1e-9)] > bound)


@compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 7), st.integers(1, 6), st.integers(0, 2**31))
def test_distance_parity(n, k, p, seed):
    from famapprox import _kernels
    rng = np.random.default_rng(seed)
    T, imgs = rng.standard_normal((n, p)), rng.standard_normal((k, n, p))
    np.testing.assert_allclose(_kernels.frobenius_distances(T, imgs),
                               _kernels_py.frobenius_distances(T, imgs), rtol=1e-12)


def test_wrappers_accept_noncontiguous(backend):
    rng = np.random.default_rng(0)
    S = rng.standard_normal((4, 6, 6))
    pi = rng.standard_normal((3, 6)).T  # transposed view
    Z = rng.standard_normal((6, 3))
    ref = [np.linalg.norm(Z - B @ pi) for B in S]
    np.testing.assert_allclose(kernels.residual_norms(Z, S, pi, 1e9), ref, rtol=1e-12)


def test_unbounded_scans_exact(backend):
    rng = np.random.default_rng(1)
    A = rng.standard_normal((7, 7))
    S = np.stack([rng.standard_normal((7, 7)), A])
    pi = rng.standard_normal((7, 5))
    assert kernels.residual_norms(A @ pi, S, pi)[1] == 0.0
    assert kernels.residual_norms(A @ pi, S, pi, 0.0)[1] == 0.0


def test_chunking_matches_unchunked(monkeypatch):
    rng = np.random.default_rng(2)
    S = rng.standard_normal((9, 4, 4))
    pi, Z = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    X, Y = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    full = _kernels_py.residual_norms(Z, S, pi, np.inf), _kernels_py.bilinear_forms(S, X, Y)
    monkeypatch.setattr(_kernels_py, "_CHUNK", 20)
    np.testing.assert_allclose(_kernels_py.residual_norms(Z, S, pi, np.inf), full[0], rtol=1e-14)
    np.testing.assert_allclose(_kernels_py.bilinear_forms(S, X, Y), full[1], rtol=1e-12)
