"""Experiment instances with known ground truth."""
import math
from dataclasses import dataclass, field

import numpy as np

from .family import FiniteFamily, brute_force_opt, save_manifest
from .linearfam import LinearFamily
from .sketch import make_rng

MIN_OPT_TARGET = 1e-8


@dataclass
class PlantedInstance:
    A: np.ndarray = field(repr=False)
    family: FiniteFamily
    planted_id: int
    opt: float
    seed: int

    def save(self, directory, **fields):
        return save_manifest(directory, self.family.n, family=self.family, matrix=self.A,
                             generator="planted", planted_id=self.planted_id, opt=self.opt,
                             seed=self.seed, **fields)


def gen_planted(n, family_size, opt_target, decoy_gap=3.0, seed=0):
    """Random unit-norm A with one planted near-optimum and far decoys.

    The planted member sits at distance ``opt_target`` from A, every decoy
    at ``decoy_gap * base * (1 + u)`` for u ~ U[0, 1), where ``base`` is
    ``opt_target`` (or 0.1 when ``opt_target`` is 0).  The planted member
    lands at a random id; ``opt`` is recomputed by exhaustive search.
    """
    if family_size < 1:
        raise ValueError(f"family_size must be >= 1, got {family_size}")
    if decoy_gap < 2:
        raise ValueError(f"decoy_gap must be >= 2, got {decoy_gap}")
    if opt_target < 0:
        raise ValueError(f"opt_target must be nonnegative, got {opt_target}")
    if 0 < opt_target < MIN_OPT_TARGET:
        # A has unit norm, so smaller offsets vanish in float64 rounding
        raise ValueError(f"opt_target {opt_target} is below {MIN_OPT_TARGET}; use 0 for exact planting")
    rng = make_rng(seed)
    A = rng.standard_normal((n, n))
    A /= np.linalg.norm(A)
    directions = rng.standard_normal((family_size, n, n))
    directions /= np.linalg.norm(directions, axis=(1, 2))[:, None, None]
    base = opt_target if opt_target > 0 else 0.1
    gaps = decoy_gap * base * (1 + rng.uniform(size=family_size))
    planted_id = int(rng.integers(family_size))
    gaps[planted_id] = opt_target
    members = A + gaps[:, None, None] * directions
    family = FiniteFamily.from_matrices(members)
    best, opt = brute_force_opt(A, family)
    if best != planted_id and opt_target > 0:
        raise RuntimeError("planted member is not the optimum; decoy_gap too small")
    return PlantedInstance(A, family, best, opt, seed)


def gen_wishart(n, seed=0):
    """A = G G^T with G i.i.d. standard Gaussian (exactly symmetric)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    G = make_rng(seed).standard_normal((n, n))
    A = G @ G.T
    return (A + A.T) / 2


def gen_butterfly_block_family(n, values_scale=1.0, seed=0):
    """Matrices supported on the top-left entry of each sqrt(n) x sqrt(n)
    block; q = n single-entry basis matrices, ordered by block row-major.

    Returns ``(family, member)`` where ``member`` is a random element with
    N(0, values_scale^2) coefficients.
    """
    side = math.isqrt(n)
    if n < 1 or side * side != n:
        raise ValueError(f"n must be a perfect square, got {n}")
    basis = np.zeros((n, n, n))
    for k, (bi, bj) in enumerate((bi, bj) for bi in range(side) for bj in range(side)):
        basis[k, bi * side, bj * side] = 1.0
    family = LinearFamily(basis)
    member = family.combine(values_scale * make_rng(seed).standard_normal(n))
    return family, member


def block_positions(n):
    side = math.isqrt(n)
    return [(bi * side, bj * side) for bi in range(side) for bj in range(side)]
