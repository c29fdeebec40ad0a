"""Counted access to a hidden matrix.

Algorithms only ever see a :class:`QueryOracle`; every product with the
hidden matrix goes through :meth:`QueryOracle.query_right`,
:meth:`QueryOracle.query_left` or :meth:`QueryOracle.query_bilinear` and is
tallied in the oracle's ledger.  Ground-truth code (tests, the CLI's error
reports) may call :func:`reveal` to get the backing matrix.
"""
import threading
from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when a query block does not conform to the oracle dimension."""


@dataclass(frozen=True)
class QueryLedger:
    right_queries: int = 0
    left_queries: int = 0
    vmv_queries: int = 0

    @property
    def total(self):
        return self.right_queries + self.left_queries + self.vmv_queries

    def __sub__(self, other):
        return QueryLedger(
            self.right_queries - other.right_queries,
            self.left_queries - other.left_queries,
            self.vmv_queries - other.vmv_queries,
        )

    def as_tuple(self):
        return (self.right_queries, self.left_queries, self.vmv_queries)


class QueryOracle:
    """Hidden n x n matrix behind right, left and bilinear queries.

    ``backing`` is anything supporting ``@`` with 2-D arrays and ``.T``
    (a dense array, a scipy sparse matrix, a ``LinearOperator``).  Blocked
    queries with k columns count as k queries.
    """

    def __init__(self, backing):
        if isinstance(backing, (list, tuple)) or (
            isinstance(backing, np.ndarray) and backing.dtype != np.float64
        ):
            backing = np.asarray(backing, dtype=np.float64)
        shape = getattr(backing, "shape", None)
        if shape is None or len(shape) != 2 or shape[0] != shape[1] or shape[0] < 1:
            raise ShapeError(f"oracle needs a square matrix, got shape {shape}")
        self._A = backing
        self.n = int(shape[0])
        self._lock = threading.Lock()
        self._right = 0
        self._left = 0
        self._vmv = 0

    def __repr__(self):
        return f"QueryOracle(n={self.n}, counts={self.counts().as_tuple()})"

    def _block(self, X):
        X = np.asarray(X, dtype=np.float64)
        vector = X.ndim == 1
        if vector:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != self.n or X.shape[1] < 1:
            raise ShapeError(f"expected an {self.n} x k block with k >= 1, got {X.shape}")
        return X, vector

    def query_right(self, X):
        """Return ``A @ X``; a 1-D ``X`` is treated as one column."""
        X, vector = self._block(X)
        Y = np.asarray(self._A @ X, dtype=np.float64)
        with self._lock:
            self._right += X.shape[1]
        return Y[:, 0] if vector else Y

    def query_left(self, X):
        """Return ``A.T @ X``; a 1-D ``X`` is treated as one column."""
        X, vector = self._block(X)
        Y = np.asarray(self._A.T @ X, dtype=np.float64)
        with self._lock:
            self._left += X.shape[1]
        return Y[:, 0] if vector else Y

    def query_bilinear(self, x, y):
        """Return the scalar ``x @ A @ y`` (one vmv query)."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.shape != (self.n,) or y.shape != (self.n,):
            raise ShapeError(f"expected two length-{self.n} vectors, got {x.shape}, {y.shape}")
        value = float(x @ np.asarray(self._A @ y[:, None], dtype=np.float64)[:, 0])
        with self._lock:
            self._vmv += 1
        return value

    def query_bilinear_batch(self, X, Y):
        """Row-wise ``X[p] @ A @ Y[p]``; costs one vmv query per row."""
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if X.ndim != 2 or X.shape != Y.shape or X.shape[1] != self.n:
            raise ShapeError(f"expected two p x {self.n} probe blocks, got {X.shape}, {Y.shape}")
        # same evaluation order as the family side, so an exact member's
        # probe differences are exactly zero
        values = ((X @ self._A) * Y).sum(axis=-1)
        with self._lock:
            self._vmv += X.shape[0]
        return values

    def counts(self):
        with self._lock:
            return QueryLedger(self._right, self._left, self._vmv)

    def clone(self):
        """Fresh oracle over the same backing matrix, with zeroed counters."""
        return QueryOracle(self._A)


def reveal(oracle):
    """Privileged handle on the backing matrix, for ground-truth checks only."""
    return oracle._A


def counts(oracle):
    return oracle.counts()
