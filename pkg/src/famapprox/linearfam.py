"""Linear matrix families approximated through finite covers.

A linear family is the span of q independent n x n matrices.  The optimum
for A lies in a Frobenius ball whose radius is estimated with a handful of
right queries; a lattice cover of that ball (in coefficients over an
orthonormal basis) becomes a finite family handed to the binary-search
selector.
"""
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .family import FamilyMember, FiniteFamily, load_manifest
from .refine import RETURNED, ApproxResult, binary_search_approx, _count, _log2
from .sketch import SeedStream, rademacher_sketch

DEFAULT_COVER_BUDGET = 10**7


class DependenceError(ValueError):
    """The basis matrices are (numerically) linearly dependent."""


class CoverBudgetError(ValueError):
    """A requested cover would exceed the point budget."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class LinearFamily:
    """span{P_1, ..., P_q}; ``basis`` is a (q, n, n) array."""

    def __init__(self, basis, orthonormal=False, check=True):
        basis = np.asarray(basis, dtype=np.float64)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2] or basis.shape[0] < 1:
            raise ValueError(f"expected a (q, n, n) basis stack, got {basis.shape}")
        self.basis = basis
        self.q, self.n = basis.shape[0], basis.shape[1]
        self.orthonormal = orthonormal
        self.triangular = None  # set by orthonormalize: original = triangular.T @ new
        if check and np.linalg.matrix_rank(self.vectors()) < self.q:
            raise DependenceError("basis matrices are linearly dependent")

    def __repr__(self):
        return f"LinearFamily(n={self.n}, q={self.q}, orthonormal={self.orthonormal})"

    def vectors(self):
        return self.basis.reshape(self.q, -1)

    def gram(self):
        V = self.vectors()
        return V @ V.T

    def combine(self, coeffs):
        return np.tensordot(np.asarray(coeffs, dtype=np.float64), self.basis, axes=1)

    @classmethod
    def from_manifest(cls, directory):
        manifest = load_manifest(directory)
        if manifest.get("kind") != "basis":
            raise ValueError(f"{directory}: not a basis manifest")
        return cls(np.stack(manifest["basis_matrices"]))


def orthonormalize(L, tol=1e-10):
    """Modified Gram-Schmidt in the Frobenius inner product.

    The returned family spans the same space; its ``triangular`` factor
    satisfies ``L.vectors() == triangular.T @ new.vectors()``.
    """
    V = L.vectors()
    q = V.shape[0]
    Q = np.empty_like(V)
    R = np.zeros((q, q))
    for i in range(q):
        v = V[i].copy()
        for j in range(i):
            R[j, i] = Q[j] @ v
            v -= R[j, i] * Q[j]
        norm = np.linalg.norm(v)
        if norm <= tol * np.linalg.norm(V[i]) or norm == 0:
            raise DependenceError(f"basis matrix {i} lies in the span of the previous ones")
        R[i, i] = norm
        Q[i] = v / norm
    out = LinearFamily(Q.reshape(L.basis.shape), orthonormal=True, check=False)
    out.triangular = R
    return out


def least_squares_projection(A, L):
    """Continuous optimum over the span: (coefficients, ||A - B*||_F).

    Solves the q x q normal equations in the Frobenius inner product.
    """
    V = L.vectors()
    a = np.asarray(A, dtype=np.float64).ravel()
    G = V @ V.T
    if np.linalg.cond(G) > 1e14:
        raise DependenceError("Gram matrix is singular to working precision")
    coeffs = np.linalg.solve(G, V @ a)
    return coeffs, float(np.linalg.norm(a - coeffs @ V))


@dataclass
class BallCover:
    radius: float
    covering_radius: float
    points: np.ndarray = field(repr=False)
    lattice_bound: int = 1

    def __len__(self):
        return self.points.shape[0]


def build_ball_cover(q, R, alpha, budget=DEFAULT_COVER_BUDGET):
    """Cover of the radius-R ball in R^q with covering radius ``alpha``.

    Lattice of spacing ``2*alpha/sqrt(q)`` (covering radius exactly
    ``alpha``), restricted to points within ``R + alpha`` of the origin and
    projected onto the ball.  Projection onto a convex set never moves a
    point away from the ball's members, so the covering radius is kept.
    """
    if q < 1 or not R > 0 or not alpha > 0:
        raise ValueError(f"need q >= 1, R > 0, alpha > 0; got q={q}, R={R}, alpha={alpha}")
    if alpha >= R:
        return BallCover(float(R), float(alpha), np.zeros((1, q)), 1)
    step = 2 * alpha / math.sqrt(q)
    K = int(math.floor((R + alpha) / step))
    estimate = (2 * K + 1) ** q
    if estimate > budget:
        raise CoverBudgetError(
            f"cover needs about {estimate} lattice points (budget {budget}); "
            f"raise alpha or lower q",
            estimate,
        )
    axis = step * np.arange(-K, K + 1)
    keep_r2 = (R + alpha) ** 2
    chunks = []
    # sweep the first coordinate to keep the temporary grid small
    tails = list(itertools.product(range(-K, K + 1), repeat=q - 1))
    rest = np.array(tails, dtype=np.float64).reshape(len(tails), q - 1) * step
    rest_r2 = np.einsum("ij,ij->i", rest, rest)
    for x0 in axis:
        mask = rest_r2 + x0 * x0 <= keep_r2
        if mask.any():
            block = np.empty((int(mask.sum()), q))
            block[:, 0] = x0
            block[:, 1:] = rest[mask]
            chunks.append(block)
    points = np.concatenate(chunks)
    norms = np.linalg.norm(points, axis=1)
    outside = norms > R
    points[outside] *= (R / norms[outside])[:, None]
    points = np.unique(points, axis=0)
    return BallCover(float(R), float(alpha), points, estimate)


class CombinationMember(FamilyMember):
    """B = sum_i coeffs[i] * basis[i]."""

    kind = "combination"

    def __init__(self, id, coeffs, basis):
        super().__init__(id, basis.shape[1])
        self.coeffs, self.basis = coeffs, basis

    def dense(self):
        return np.tensordot(self.coeffs, self.basis, axes=1)

    def apply(self, X):
        return np.tensordot(self.coeffs, self.basis @ X, axes=1)


class CoverFamily(FiniteFamily):
    """Finite family of basis combinations, one per coefficient row.

    Sketches are formed from the sketched basis, so a member costs q
    multiply-adds per sketch entry instead of an n x n product.
    """

    def __init__(self, basis, coeffs):
        self.basis = np.asarray(basis, dtype=np.float64)
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
        if self.coeffs.shape[1] != self.basis.shape[0]:
            raise ValueError("coefficient rows must have one entry per basis matrix")
        self.n = self.basis.shape[1]
        self._stack = None

    def __len__(self):
        return self.coeffs.shape[0]

    def __getitem__(self, i):
        if not -len(self) <= i < len(self):
            raise IndexError(i)
        i = i % len(self)
        return CombinationMember(i, self.coeffs[i], self.basis)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def stack(self):
        if self._stack is None:
            self._stack = self._combine(self.basis, None)
        return self._stack

    def _coef(self, ids):
        return self.coeffs if ids is None else self.coeffs[np.asarray(ids, dtype=np.intp)]

    def _combine(self, sketched_basis, ids):
        C = self._coef(ids)
        q = sketched_basis.shape[0]
        return (C @ sketched_basis.reshape(q, -1)).reshape((C.shape[0],) + sketched_basis.shape[1:])

    def dense_member(self, i):
        return self[i].dense()

    def images(self, pi, ids=None):
        return self._combine(self.basis @ pi, ids)

    def left_factor(self, psi, ids=None):
        return self._combine(psi.T @ self.basis, ids)

    def residuals(self, target, pi, ids=None, bound=np.inf):
        return kernels.frobenius_distances(target, self.images(pi, ids))

    def bilinear(self, X, Y, ids=None):
        return self._coef(ids) @ kernels.bilinear_forms(self.basis, X, Y)

    def distances_to(self, A, ids=None):
        A = np.asarray(A, dtype=np.float64)
        C = self._coef(ids)
        V = self.basis.reshape(self.basis.shape[0], -1)
        out = np.empty(C.shape[0])
        step = max(1, (1 << 22) // V.shape[1])
        for lo in range(0, C.shape[0], step):
            diff = A.ravel() - C[lo:lo + step] @ V
            out[lo:lo + step] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return out


def covering_approx(oracle, cover, cfg):
    """Select from a materialized cover with the binary-search selector."""
    return binary_search_approx(oracle, cover, cfg)


def linear_family_approx(oracle, L, alpha, cfg, budget=DEFAULT_COVER_BUDGET):
    """Approximate A from span(L) with additive error of order alpha*||A||_F.

    Returns ``(result, coefficients)`` with coefficients over L's original
    basis.  ``result.extras`` also holds the chosen matrix and the cover
    geometry.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    start = oracle.counts()
    seeds = SeedStream(cfg.seed)
    l = _count(cfg.c * _log2(1 / cfg.delta))
    pi = rademacher_sketch(L.n, l, seeds.next()).data
    norm_estimate = float(np.linalg.norm(oracle.query_right(pi)))
    ortho = orthonormalize(L)
    extras = {"norm_estimate": norm_estimate}

    if norm_estimate == 0:
        coeffs = np.zeros(L.q)
        extras.update(cover_size=1, radius=0.0, covering_radius=0.0,
                      matrix=np.zeros((L.n, L.n)), coefficients=coeffs)
        result = ApproxResult("linear", 0, RETURNED, bound_used=0.0, error_estimate=0.0,
                              ledger=oracle.counts() - start, extras=extras)
        return result, coeffs

    radius, cover_alpha = 4 * norm_estimate, alpha * norm_estimate / 6
    try:
        cover = build_ball_cover(L.q, radius, cover_alpha, budget)
    except CoverBudgetError as err:
        raise CoverBudgetError(
            f"linear family cover too large for q={L.q}, alpha={alpha}: {err}", err.estimate
        ) from None
    family = CoverFamily(ortho.basis, cover.points)
    inner = covering_approx(oracle, family, cfg.replace(seed=seeds.next()))
    coeffs = None
    if inner.chosen is not None:
        ortho_coeffs = cover.points[inner.chosen]
        coeffs = np.linalg.solve(ortho.triangular, ortho_coeffs)
        extras.update(matrix=ortho.combine(ortho_coeffs), orthonormal_coefficients=ortho_coeffs,
                      coefficients=coeffs)
    extras.update(cover_size=len(cover), radius=radius, covering_radius=cover_alpha,
                  lattice_bound=cover.lattice_bound, inner_extras=inner.extras)
    result = ApproxResult(
        "linear", inner.chosen, inner.termination,
        bound_used=inner.bound_used,
        error_estimate=inner.error_estimate,
        ledger=oracle.counts() - start,
        params=inner.params,
        trace=inner.trace,
        extras=extras,
    )
    return result, coeffs
