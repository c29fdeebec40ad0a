"""Hot loops over family stacks, backed by the compiled extension when it is
importable and by numpy otherwise.

>>> from famapprox import kernels
>>> kernels.BACKEND in ("cython", "python")
True
"""
import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "python"
_impl = BACKENDS[BACKEND]


def use_backend(name):
    """Switch every kernel to ``name`` ("cython" or "python"); returns the
    previous backend name."""
    global BACKEND, _impl
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    previous = BACKEND
    BACKEND, _impl = name, BACKENDS[name]
    return previous


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def residual_norms(target, stack, pi, bound=np.inf):
    """Frobenius norms ``||target - stack[k] @ pi||`` for every member k.

    Entries whose norm exceeds ``bound`` are only guaranteed to be
    reported as some value above ``bound``.

    The compiled kernel only pays off through early abandonment, so it is
    used for finite positive bounds.  Unbounded scans and zero bounds go
    through BLAS, whose products match an oracle's bit for bit; exact
    family members then score exactly 0.
    """
    impl = _impl if 0 < bound < np.inf else _kernels_py
    return impl.residual_norms(_f64(target), _f64(stack), _f64(pi), float(bound))


def frobenius_distances(target, images):
    """Frobenius norms ``||target - images[k]||`` for every k."""
    return _impl.frobenius_distances(_f64(target), _f64(images))


def bilinear_forms(stack, X, Y):
    """``out[k, p] = X[p] @ stack[k] @ Y[p]`` for probe rows X, Y.

    Always numpy: batched BLAS products beat a compiled per-member loop
    at every size tried, and they evaluate in the same order as the
    oracle's bilinear batch.
    """
    return _kernels_py.bilinear_forms(_f64(stack), _f64(X), _f64(Y))
