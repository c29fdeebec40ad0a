"""Random test matrices and Frobenius-norm estimators.

All randomness comes from counter-based Philox generators.  A sketch keeps
the integer seed it was drawn from, so any sketch can be regenerated on its
own; :class:`SeedStream` hands out independent child seeds for the many
sketches a single algorithm run needs.
"""
from dataclasses import dataclass, field

import numpy as np


def make_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


class SeedStream:
    """Splittable source of independent integer seeds."""

    def __init__(self, seed):
        self._seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)

    def next(self):
        child = self._seq.spawn(1)[0]
        return int(child.generate_state(1, dtype=np.uint64)[0])

    def spawn(self):
        return SeedStream(self._seq.spawn(1)[0])


@dataclass(frozen=True)
class SketchMatrix:
    data: np.ndarray = field(repr=False)
    kind: str
    seed: int
    variance: float = None

    @property
    def shape(self):
        return self.data.shape


def _check_dims(n, k):
    if int(n) != n or int(k) != k or n < 1 or k < 1:
        raise ValueError(f"sketch dimensions must be positive integers, got ({n}, {k})")


def rademacher_sketch(n, l, seed, scaled=True):
    """n x l matrix of i.i.d. signs, scaled by 1/sqrt(l) unless ``scaled=False``."""
    _check_dims(n, l)
    signs = make_rng(seed).integers(0, 2, size=(int(n), int(l)), dtype=np.int8)
    data = np.where(signs == 1, 1.0, -1.0)
    if scaled:
        data *= 1.0 / np.sqrt(l)
    return SketchMatrix(data, "rademacher" if scaled else "rademacher-unscaled", seed)


def gaussian_sketch(n, k, variance, seed):
    """n x k matrix of i.i.d. N(0, variance) entries."""
    _check_dims(n, k)
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    data = make_rng(seed).normal(0.0, np.sqrt(variance), size=(int(n), int(k)))
    return SketchMatrix(data, "gaussian", seed, float(variance))


def _as_data(pi):
    return pi.data if isinstance(pi, SketchMatrix) else np.asarray(pi, dtype=np.float64)


def sketched_distance(Z, B, pi):
    """``||Z - B @ pi||_F`` computed without any oracle queries.

    ``B`` is a :class:`~famapprox.family.FamilyMember` or a plain matrix.
    """
    P = _as_data(pi)
    Z = np.asarray(Z, dtype=np.float64)
    image = B.apply(P) if hasattr(B, "apply") else np.asarray(B, dtype=np.float64) @ P
    if image.shape != Z.shape:
        raise ValueError(f"shape mismatch: Z is {Z.shape}, B @ pi is {image.shape}")
    return float(np.linalg.norm(Z - image))


@dataclass(frozen=True)
class VmvEstimatorParams:
    m: int
    t: int
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.t < 1:
            raise ValueError(f"need m >= 1 and t >= 1, got m={self.m}, t={self.t}")
        if self.t % 2 == 0:
            raise ValueError(f"t must be odd so the median is a sample value, got {self.t}")


def vmv_probes(n, params):
    """Unscaled sign probe pairs, shape ``(t*m, n)`` each, block-major."""
    rng = make_rng(params.seed)
    total = params.m * params.t
    X = np.where(rng.integers(0, 2, size=(total, n), dtype=np.int8) == 1, 1.0, -1.0)
    Y = np.where(rng.integers(0, 2, size=(total, n), dtype=np.int8) == 1, 1.0, -1.0)
    return X, Y


def median_of_means(probe_values, params):
    """Median over t blocks of the mean squared probe value.

    ``probe_values`` has the ``t*m`` probes on its last axis; leading axes
    (e.g. one row per family member) are kept.
    """
    v = np.asarray(probe_values, dtype=np.float64)
    sq = (v * v).reshape(v.shape[:-1] + (params.t, params.m))
    # shift by each block's first value: a constant block then averages to
    # exactly that value (single-entry C gives exactly c^2)
    first = sq[..., :1]
    blocks = first[..., 0] + (sq - first).mean(axis=-1)
    return np.median(blocks, axis=-1)


def vmv_norm_estimate(C, params, B=None):
    """Median-of-means estimate of ``||C||_F^2`` from bilinear probes.

    ``C`` is a matrix or a :class:`~famapprox.oracle.QueryOracle`.  With an
    oracle, the probed matrix is ``A - B`` (``B`` defaults to zero): each
    probe costs one vmv query and the ``x @ B @ y`` part is exact.
    """
    if hasattr(C, "query_bilinear_batch"):
        n = C.n
        X, Y = vmv_probes(n, params)
        values = C.query_bilinear_batch(X, Y)
        if B is not None:
            Bd = B.dense() if hasattr(B, "dense") else np.asarray(B, dtype=np.float64)
            values = values - np.einsum("pi,ij,pj->p", X, Bd, Y)
    else:
        C = np.asarray(C, dtype=np.float64)
        if B is not None:
            C = C - (B.dense() if hasattr(B, "dense") else np.asarray(B, dtype=np.float64))
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {C.shape}")
        X, Y = vmv_probes(C.shape[0], params)
        values = np.einsum("pi,ij,pj->p", X, C, Y)
    return float(median_of_means(values, params))
