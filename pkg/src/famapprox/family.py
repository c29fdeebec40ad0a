"""Finite hypothesis families and their on-disk format.

A family is an ordered list of explicitly known n x n members.  Sketches of
members (``B @ Pi``, ``Psi.T @ B @ Pi``, ``x @ B @ y``) are computed exactly
and never touch the oracle.  Dense stacks are kept for desk-scale n; the
structured member kinds exist for persistence and cheap single applies.

On disk a family is a directory holding ``manifest.json`` plus raw
little-endian float64 payloads (row-major, no header)::

    {"n": 4, "kind": "finite",
     "members": [{"id": 0, "kind": "dense", "file": "member_00000.bin"},
                 {"id": 1, "kind": "rank1", "file": "member_00001.bin"},
                 {"id": 2, "kind": "pattern", "file": "member_00002.bin",
                  "rows": [0, 3], "cols": [1, 2]}]}

A rank-1 payload is ``u`` followed by ``v`` (2n floats); a pattern payload
holds the values at ``(rows[i], cols[i])``.  Linear families use
``"kind": "basis"`` with a ``"basis"`` list of dense payload files.
"""
import json
from pathlib import Path

import numpy as np

from . import kernels
from .sketch import make_rng

PAYLOAD_DTYPE = np.dtype("<f8")


class FamilyMember:
    """One member B of a family; subclasses differ in storage."""

    kind = None

    def __init__(self, id, n):
        self.id = int(id)
        self.n = int(n)

    def dense(self):
        raise NotImplementedError

    def apply(self, X):
        """Exact ``B @ X``."""
        return self.dense() @ X

    def __repr__(self):
        return f"{type(self).__name__}(id={self.id}, n={self.n})"


class DenseMember(FamilyMember):
    kind = "dense"

    def __init__(self, id, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"member {id}: expected a square matrix, got {matrix.shape}")
        super().__init__(id, matrix.shape[0])
        self.matrix = matrix

    def dense(self):
        return self.matrix

    def apply(self, X):
        return self.matrix @ X


class Rank1Member(FamilyMember):
    """B = u v^T."""

    kind = "rank1"

    def __init__(self, id, u, v):
        u = np.asarray(u, dtype=np.float64).ravel()
        v = np.asarray(v, dtype=np.float64).ravel()
        if u.shape != v.shape:
            raise ValueError(f"member {id}: u and v differ in length")
        super().__init__(id, u.size)
        self.u, self.v = u, v

    def dense(self):
        return np.outer(self.u, self.v)

    def apply(self, X):
        return np.multiply.outer(self.u, self.v @ X)


class PatternMember(FamilyMember):
    """Sparse member: ``values`` at positions ``(rows, cols)``."""

    kind = "pattern"

    def __init__(self, id, n, rows, cols, values):
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        values = np.asarray(values, dtype=np.float64)
        if not rows.shape == cols.shape == values.shape or rows.ndim != 1:
            raise ValueError(f"member {id}: rows, cols, values must be equal-length vectors")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or max(rows.max(), cols.max()) >= n):
            raise ValueError(f"member {id}: pattern index out of range for n={n}")
        super().__init__(id, n)
        self.rows, self.cols, self.values = rows, cols, values

    def dense(self):
        B = np.zeros((self.n, self.n))
        np.add.at(B, (self.rows, self.cols), self.values)
        return B

    def apply(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros((self.n,) + X.shape[1:])
        np.add.at(out, self.rows, self.values.reshape((-1,) + (1,) * (X.ndim - 1)) * X[self.cols])
        return out


def member_sketch(B, pi):
    """Exact ``B @ pi`` for a member (no oracle queries)."""
    P = pi.data if hasattr(pi, "data") else np.asarray(pi, dtype=np.float64)
    if P.shape[0] != B.n:
        raise ValueError(f"sketch has {P.shape[0]} rows, member dimension is {B.n}")
    return B.apply(P)


class FiniteFamily:
    """Ordered, immutable list of members sharing dimension n.

    Batched queries take an optional ``ids`` selector (any integer index
    array); results follow the order of ``ids``.
    """

    def __init__(self, members, n=None):
        members = list(members)
        if n is None:
            if not members:
                raise ValueError("cannot infer n for an empty family")
            n = members[0].n
        for pos, B in enumerate(members):
            if B.id != pos:
                raise ValueError(f"member ids must be 0..|F|-1 in order; position {pos} has id {B.id}")
            if B.n != n:
                raise ValueError(f"member {pos} has dimension {B.n}, family has {n}")
        self.n = int(n)
        self._members = members
        self._stack = None

    @classmethod
    def from_matrices(cls, matrices):
        matrices = np.asarray(matrices, dtype=np.float64)
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise ValueError(f"expected a (k, n, n) stack, got {matrices.shape}")
        fam = cls([DenseMember(i, M) for i, M in enumerate(matrices)], n=matrices.shape[1])
        fam._stack = matrices
        return fam

    def __len__(self):
        return len(self._members)

    def __getitem__(self, i):
        return self._members[i]

    def __iter__(self):
        return iter(self._members)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, size={len(self)})"

    @property
    def stack(self):
        if self._stack is None:
            self._stack = np.stack([B.dense() for B in self._members]) if len(self) else np.zeros((0, self.n, self.n))
        return self._stack

    def _select(self, ids):
        return self.stack if ids is None else self.stack[np.asarray(ids, dtype=np.intp)]

    def dense_member(self, i):
        return self.stack[i]

    def images(self, pi, ids=None):
        """``B @ pi`` for the selected members, shape (k, n, l)."""
        return self._select(ids) @ pi

    def left_factor(self, psi, ids=None):
        """``psi.T @ B`` for the selected members, shape (k, m, n).

        Formed as ``(B.T @ psi).T`` so that an exact member reproduces the
        oracle's left-query block bit for bit.
        """
        S = self._select(ids)
        return np.swapaxes(np.swapaxes(S, 1, 2) @ psi, 1, 2)

    def left_images(self, psi, pi, ids=None):
        """``psi.T @ B @ pi`` for the selected members, shape (k, m, l)."""
        return self.left_factor(psi, ids) @ pi

    def residuals(self, target, pi, ids=None, bound=np.inf):
        """``||target - B @ pi||_F`` for the selected members.

        Values above ``bound`` are only guaranteed to exceed it.
        """
        return kernels.residual_norms(target, self._select(ids), pi, bound)

    def bilinear(self, X, Y, ids=None):
        """``X[p] @ B @ Y[p]`` for the selected members, shape (k, p)."""
        return kernels.bilinear_forms(self._select(ids), X, Y)

    def distances_to(self, A, ids=None):
        """Exact ``||A - B||_F`` per member (ground truth)."""
        A = np.asarray(A, dtype=np.float64)
        S = self._select(ids)
        return np.sqrt(np.einsum("kij,kij->k", A - S, A - S))


class CandidateSet:
    """Live subset of a family's ids; refinement only ever removes ids."""

    def __init__(self, family, live=None):
        self.family = family
        self.live = np.arange(len(family), dtype=np.intp) if live is None else np.unique(np.asarray(live, dtype=np.intp))
        if self.live.size and (self.live[0] < 0 or self.live[-1] >= len(family)):
            raise ValueError("candidate ids outside the family")

    def __len__(self):
        return int(self.live.size)

    def __contains__(self, i):
        pos = np.searchsorted(self.live, i)
        return bool(pos < self.live.size and self.live[pos] == i)

    def keep(self, mask):
        return CandidateSet(self.family, self.live[np.asarray(mask, dtype=bool)])

    def ids(self):
        return [int(i) for i in self.live]


def sample_without_replacement(candidates, q, seed):
    """Uniformly random subset of ``min(q, |live|)`` live ids, sorted."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    size = min(int(min(q, len(candidates))), len(candidates))
    if size == 0:
        return []
    if size == len(candidates):
        return candidates.ids()
    picked = make_rng(seed).choice(candidates.live, size=size, replace=False)
    return sorted(int(i) for i in picked)


def true_error(A, B):
    """Exact ``||A - B||_F`` (ground truth; needs the hidden matrix)."""
    Bd = B.dense() if hasattr(B, "dense") else np.asarray(B, dtype=np.float64)
    return float(np.linalg.norm(np.asarray(A, dtype=np.float64) - Bd))


def brute_force_opt(A, family):
    """Exhaustive ``argmin_B ||A - B||_F``; ties go to the lowest id."""
    if len(family) == 0:
        raise ValueError("brute_force_opt needs a nonempty family")
    errors = family.distances_to(A)
    best = int(np.argmin(errors))
    return best, float(errors[best])


# -- persistence -------------------------------------------------------------

def write_payload(path, array):
    np.ascontiguousarray(array, dtype=PAYLOAD_DTYPE).tofile(path)


def read_payload(path, count=None):
    data = np.fromfile(path, dtype=PAYLOAD_DTYPE)
    if count is not None and data.size != count:
        raise ValueError(f"{path}: expected {count} floats, found {data.size}")
    return data.astype(np.float64)


def _member_entry(B, directory):
    name = f"member_{B.id:05d}.bin"
    entry = {"id": B.id, "kind": B.kind, "file": name}
    if B.kind == "dense":
        write_payload(directory / name, B.matrix)
    elif B.kind == "rank1":
        write_payload(directory / name, np.concatenate([B.u, B.v]))
    elif B.kind == "pattern":
        write_payload(directory / name, B.values)
        entry["rows"] = B.rows.tolist()
        entry["cols"] = B.cols.tolist()
    else:
        # structured members without a file kind are stored densified
        entry["kind"] = "dense"
        write_payload(directory / name, B.dense())
    return entry


def save_manifest(directory, n, family=None, matrix=None, basis=None, **fields):
    """Write ``manifest.json`` and payloads into ``directory``.

    ``matrix`` (the hidden A of an instance) goes to ``matrix.bin``;
    ``basis`` (a list of n x n matrices) makes a ``"basis"`` manifest.
    Extra keyword fields are copied into the manifest verbatim.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"n": int(n), "kind": "basis" if basis is not None else "finite", "members": []}
    if family is not None:
        manifest["members"] = [_member_entry(B, directory) for B in family]
    if basis is not None:
        files = []
        for i, P in enumerate(basis):
            name = f"basis_{i:03d}.bin"
            write_payload(directory / name, P)
            files.append(name)
        manifest["basis"] = files
        manifest["q"] = len(files)
    if matrix is not None:
        write_payload(directory / "matrix.bin", matrix)
        manifest["matrix"] = "matrix.bin"
    manifest.update(fields)
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def _load_member(entry, n, directory):
    path = directory / entry["file"]
    kind = entry["kind"]
    if kind == "dense":
        return DenseMember(entry["id"], read_payload(path, n * n).reshape(n, n))
    if kind == "rank1":
        uv = read_payload(path, 2 * n)
        return Rank1Member(entry["id"], uv[:n], uv[n:])
    if kind == "pattern":
        rows, cols = entry["rows"], entry["cols"]
        return PatternMember(entry["id"], n, rows, cols, read_payload(path, len(rows)))
    raise ValueError(f"unknown member kind {kind!r}")


def load_manifest(directory):
    """Read a manifest directory.

    Returns the manifest dict with loaded objects under ``"family"``
    (FiniteFamily or None), ``"A"`` (hidden matrix or None) and
    ``"basis_matrices"`` (list or None).
    """
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    n = manifest["n"]
    members = sorted(manifest.get("members", []), key=lambda e: e["id"])
    manifest["family"] = FiniteFamily([_load_member(e, n, directory) for e in members], n=n) if members else None
    manifest["A"] = read_payload(directory / manifest["matrix"], n * n).reshape(n, n) if manifest.get("matrix") else None
    manifest["basis_matrices"] = (
        [read_payload(directory / f, n * n).reshape(n, n) for f in manifest["basis"]]
        if manifest.get("kind") == "basis" else None
    )
    return manifest
