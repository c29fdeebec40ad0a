"""Query-efficient selection of a near-optimal family member.

Every routine takes a :class:`~famapprox.oracle.QueryOracle` for the hidden
matrix A and a :class:`~famapprox.family.FiniteFamily`, and returns an
:class:`ApproxResult` whose ledger counts only the queries spent by that
call.

Parameter formulas use base-2 logarithms clamped below at 1; every derived
count is rounded up, floored at 2, then clipped by the optional caps in
:class:`RefineConfig`.
"""
import math
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels
from .family import CandidateSet, sample_without_replacement
from .oracle import QueryLedger
from .sketch import (
    SeedStream,
    VmvEstimatorParams,
    gaussian_sketch,
    median_of_means,
    rademacher_sketch,
    vmv_probes,
)

RETURNED = "returned"
FAILED = "failed"
NO_CANDIDATE = "no-candidate"

ALGORITHMS = ("one-shot", "one-sided", "two-sided", "coarse", "binary-search", "vmv")

# family members per block when forming all bilinear probe values at once
_VMV_BLOCK = 1 << 22
# element budget for a block of representative left factors
_FACTOR_BLOCK = 1 << 22


@dataclass(frozen=True)
class RefineConfig:
    eps: float = 0.5
    delta: float = 0.1
    c: float = 4.0
    cap_l: int = None
    cap_m: int = None
    cap_q: int = None
    cap_r: int = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        for name in ("cap_l", "cap_m", "cap_q", "cap_r"):
            cap = getattr(self, name)
            if cap is not None and cap < 2:
                raise ValueError(f"{name} must be at least 2 when set, got {cap}")

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class ParamSet:
    algorithm: str
    family_size: int
    l: int = None
    T: int = None
    m: int = None
    r: int = None
    q: int = None
    t: int = None
    iterations: int = None
    grid_R: int = None
    grid_step: float = None
    raw: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        return asdict(self)


def _log2(x):
    return max(1.0, math.log2(x))


def _count(x, cap=None):
    v = max(2, math.ceil(x)) if math.isfinite(x) else sys.maxsize
    return min(v, cap) if cap is not None else v


def _odd(k):
    return k if k % 2 else k + 1


def derive_params(family_size, cfg, algorithm):
    """Evaluate the sketch sizes and loop counts for ``algorithm``.

    ``raw`` keeps the unrounded, uncapped formula values.
    """
    if family_size < 1:
        raise ValueError(f"family size must be >= 1, got {family_size}")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    F, eps, delta, c = family_size, cfg.eps, cfg.delta, cfg.c
    log_f = _log2(F)
    loglog_f = _log2(log_f)
    log_ratio = _log2(log_f / delta)
    raw = {}
    out = {}

    if algorithm == "one-shot":
        raw["l"] = c * _log2(F / delta) / eps**2
        out["l"] = _count(raw["l"], cfg.cap_l)
    elif algorithm == "one-sided":
        raw["l"] = c / eps**2 * log_ratio
        raw["T"] = log_f / loglog_f
        out["l"] = _count(raw["l"], cfg.cap_l)
        out["T"] = _count(raw["T"])
    elif algorithm == "two-sided":
        raw["m"] = c / eps**2 * math.sqrt(log_f) * log_ratio
        raw["l"] = c / eps**2 * log_ratio
        raw["r"] = log_f / loglog_f
        exponent = 1.5 * math.sqrt(log_f) * log_ratio
        raw["q"] = 2.0**exponent if exponent < 1023 else math.inf
        out["m"] = _count(raw["m"], cfg.cap_m)
        out["l"] = _count(raw["l"], cfg.cap_l)
        out["r"] = _count(raw["r"], cfg.cap_r)
        out["q"] = _count(raw["q"], cfg.cap_q)
        out["iterations"] = math.ceil(math.sqrt(log_f)) + 1
    elif algorithm == "coarse":
        raw["t"] = c * _log2(1 / delta)
        out["t"] = _odd(_count(raw["t"]))
    elif algorithm == "binary-search":
        raw["l"] = c / eps**2 * _log2(log_f / (delta * eps))
        step = 1 + eps / 12
        raw["grid_R"] = math.log(6 * F) / math.log(step)
        out["l"] = _count(raw["l"], cfg.cap_l)
        out["grid_R"] = math.ceil(raw["grid_R"])
        out["grid_step"] = step
    else:  # vmv
        # Chebyshev at deviation eps/3 with probability 1/4 needs 36/eps^2 probes per block
        raw["m"] = 36 / eps**2
        raw["t"] = c * _log2(F / delta)
        out["m"] = math.ceil(raw["m"])
        out["t"] = _odd(_count(raw["t"]))
    return ParamSet(algorithm, int(F), raw=raw, **out)


@dataclass
class IterationRecord:
    index: int
    candidates: tuple
    branch: str
    survivors: int
    errors: tuple = None
    j_star: int = None
    representatives: tuple = None


@dataclass
class BisectionRecord:
    z: int
    bound: float
    accepted: bool
    inner_termination: str
    chosen: int = None
    sketched_error: float = None
    inner_queries: tuple = None


@dataclass
class ApproxResult:
    algorithm: str
    chosen: int
    termination: str
    bound_used: float = None
    error_estimate: float = None
    ledger: QueryLedger = field(default_factory=QueryLedger)
    params: ParamSet = None
    trace: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.trace)


def _check_bound(M):
    if not (M >= 0 and math.isfinite(M)):
        raise ValueError(f"the bound M must be finite and nonnegative, got {M}")
    return float(M)


def one_shot_argmin(oracle, family, cfg):
    """Sketch once with l right queries and return the sketched argmin."""
    start = oracle.counts()
    params = derive_params(len(family), cfg, "one-shot")
    seeds = SeedStream(cfg.seed)
    pi = rademacher_sketch(family.n, params.l, seeds.next()).data
    Z = oracle.query_right(pi)
    errors = family.residuals(Z, pi)
    best = int(np.argmin(errors))
    return ApproxResult(
        "one-shot", best, RETURNED,
        error_estimate=float(errors[best]),
        ledger=oracle.counts() - start,
        params=params,
    )


def one_sided_refine(oracle, family, M, cfg):
    """Iterative candidate refinement with right queries only.

    Each of the T rounds draws a fresh sketch and keeps members whose
    sketched residual is within ``(1 + eps/2) * M``; the lowest surviving id
    is returned.
    """
    M = _check_bound(M)
    start = oracle.counts()
    params = derive_params(len(family), cfg, "one-sided")
    seeds = SeedStream(cfg.seed)
    threshold = (1 + cfg.eps / 2) * M
    cand = CandidateSet(family)
    trace = []
    last_errors = None
    for i in range(1, params.T + 1):
        pi = rademacher_sketch(family.n, params.l, seeds.next()).data
        Z = oracle.query_right(pi)
        errors = family.residuals(Z, pi, cand.live, bound=threshold)
        keep = errors <= threshold
        trace.append(IterationRecord(i, tuple(cand.ids()), "filter", int(keep.sum())))
        last_errors = errors[keep]
        cand = cand.keep(keep)
        if len(cand) == 0:
            return ApproxResult("one-sided", None, NO_CANDIDATE, bound_used=M,
                                ledger=oracle.counts() - start, params=params, trace=trace)
    return ApproxResult(
        "one-sided", int(cand.live[0]), RETURNED,
        bound_used=M,
        error_estimate=float(last_errors[0]),
        ledger=oracle.counts() - start,
        params=params,
        trace=trace,
    )


def two_sided_refine(oracle, family, M, cfg):
    """Two-sided simulation of candidate refinement.

    A shared left sketch ``W = Psi.T @ A`` lets each round look for a
    representative member close to ``A @ Pi`` under every pre-drawn right
    sketch.  When all r sketches have one, the candidate minimising the
    worst distance to the representatives is returned outright; otherwise
    l right queries are spent on the first sketch without one and the
    candidates are filtered against it.
    """
    M = _check_bound(M)
    start = oracle.counts()
    params = derive_params(len(family), cfg, "two-sided")
    n, eps = family.n, cfg.eps
    seeds = SeedStream(cfg.seed)
    psi = rademacher_sketch(n, params.m, seeds.next()).data
    pis = [[rademacher_sketch(n, params.l, seeds.next()).data for _ in range(params.r)]
           for _ in range(params.iterations)]
    W = oracle.query_left(psi).T
    rep_threshold = (1 + eps / 6) * M
    filter_threshold = (1 + eps / 12) * M

    def done(chosen, termination, **kw):
        return ApproxResult("two-sided", chosen, termination, bound_used=M,
                            ledger=oracle.counts() - start, params=params, trace=trace, **kw)

    cand = CandidateSet(family)
    trace = []
    for i in range(params.iterations):
        if len(cand) == 0:
            return done(None, FAILED)
        reps = np.asarray(sample_without_replacement(cand, params.q, seeds.next()), dtype=np.intp)
        dist = np.empty((params.r, len(reps)))
        step = max(1, _FACTOR_BLOCK // (params.m * n))
        for lo in range(0, len(reps), step):
            factor = family.left_factor(psi, reps[lo:lo + step])
            for j, pi in enumerate(pis[i]):
                dist[j, lo:lo + step] = kernels.frobenius_distances(W @ pi, factor @ pi)
        best = np.argmin(dist, axis=1)
        rep_ids = [int(reps[b]) for b in best]
        E = [float(dist[j, b]) for j, b in enumerate(best)]
        record = IterationRecord(i, tuple(cand.ids()), "", len(cand), errors=tuple(E),
                                 representatives=tuple(int(x) for x in reps))
        trace.append(record)

        if all(e <= rep_threshold for e in E):
            record.branch = "single-shot"
            worst = np.zeros(len(cand))
            for rep, pi in zip(rep_ids, pis[i]):
                target = family.images(pi, [rep])[0]
                np.maximum(worst, family.residuals(target, pi, cand.live), out=worst)
            best = int(np.argmin(worst))
            chosen = int(cand.live[best])
            chosen_factor = family.left_factor(psi, [chosen])[0]
            estimate = max(float(np.linalg.norm(W @ pi - chosen_factor @ pi)) for pi in pis[i])
            return done(chosen, RETURNED, error_estimate=estimate,
                        extras={"objective": float(worst[best])})

        j_star = next(j for j, e in enumerate(E) if e > rep_threshold)
        pi = pis[i][j_star]
        Z = oracle.query_right(pi)
        errors = family.residuals(Z, pi, cand.live, bound=filter_threshold)
        keep = errors <= filter_threshold
        record.branch, record.j_star, record.survivors = "productive", j_star, int(keep.sum())
        cand = cand.keep(keep)
    return done(None, FAILED)


def coarse_opt_bound(oracle, family, delta, seed, c=4.0):
    """Median of ``sqrt(6|F|) * min_B ||A Pi - B Pi||_F`` over t two-column
    N(0, 1/2) sketches; spends 2t right queries."""
    params = derive_params(len(family), RefineConfig(delta=delta, c=c), "coarse")
    seeds = SeedStream(seed)
    scale = math.sqrt(6 * len(family))
    values = []
    for _ in range(params.t):
        pi = gaussian_sketch(family.n, 2, 0.5, seeds.next()).data
        Y = oracle.query_right(pi)
        values.append(scale * float(np.min(family.residuals(Y, pi))))
    return float(np.median(values))


def binary_search_approx(oracle, family, cfg):
    """Relative-error selection without a known bound on OPT.

    A coarse bound seeds a geometric grid of candidate bounds; bisection
    over the grid calls :func:`two_sided_refine` and accepts a bound when
    the returned member's sketched error is within ``(3 + eps/6)`` of it.
    The best accepted member (under one shared error sketch) is returned.
    """
    start = oracle.counts()
    params = derive_params(len(family), cfg, "binary-search")
    eps, delta = cfg.eps, cfg.delta
    seeds = SeedStream(cfg.seed)
    m_init = coarse_opt_bound(oracle, family, delta / 2, seeds.next(), cfg.c)
    R = params.grid_R
    grid = [(1 + eps / 12) ** i * m_init / (6 * len(family)) for i in range(R + 1)]
    pi = rademacher_sketch(family.n, params.l, seeds.next()).data
    W = oracle.query_right(pi)
    inner = cfg.replace(eps=eps / 24, delta=delta / (4 + 4 * R))

    def sketched_error(i):
        return float(family.residuals(W, pi, [i])[0])

    trace = []
    best, best_err = None, math.inf
    lo, hi = 0, R
    while lo < hi:
        z = (lo + hi) // 2
        res = two_sided_refine(oracle, family, grid[z], inner.replace(seed=seeds.next()))
        record = BisectionRecord(z, grid[z], False, res.termination, res.chosen,
                                 inner_queries=res.ledger.as_tuple())
        if res.chosen is not None:
            err = sketched_error(res.chosen)
            record.sketched_error = err
            record.accepted = err <= (3 + eps / 6) * grid[z]
        if record.accepted:
            hi = z
            if err < best_err:
                best, best_err = res.chosen, err
        else:
            lo = z + 1
        trace.append(record)

    extras = {"coarse_bound": m_init, "grid": grid, "fallback": False}
    bound = grid[hi]
    if best is None:
        # nothing accepted: one more run at the bound the search settled on
        extras["fallback"] = True
        res = two_sided_refine(oracle, family, grid[lo], inner.replace(seed=seeds.next()))
        extras["fallback_termination"] = res.termination
        bound = grid[lo]
        if res.chosen is not None:
            best, best_err = res.chosen, sketched_error(res.chosen)
    return ApproxResult(
        "binary-search", best, RETURNED if best is not None else FAILED,
        bound_used=bound,
        error_estimate=best_err if best is not None else None,
        ledger=oracle.counts() - start,
        params=params,
        trace=trace,
        extras=extras,
    )


def vmv_family_argmin(oracle, family, cfg):
    """Argmin of the median-of-means ``||A - B||_F^2`` estimate over the
    family, using m*t shared bilinear probes of A (vmv queries only)."""
    start = oracle.counts()
    params = derive_params(len(family), cfg, "vmv")
    seeds = SeedStream(cfg.seed)
    vp = VmvEstimatorParams(params.m, params.t, seeds.next())
    X, Y = vmv_probes(family.n, vp)
    a = oracle.query_bilinear_batch(X, Y)
    estimates = np.empty(len(family))
    block = max(1, _VMV_BLOCK // X.shape[0])
    for lo in range(0, len(family), block):
        ids = np.arange(lo, min(len(family), lo + block))
        estimates[ids] = median_of_means(a - family.bilinear(X, Y, ids), vp)
    best = int(np.argmin(estimates))
    return ApproxResult(
        "vmv", best, RETURNED,
        error_estimate=float(np.sqrt(estimates[best])),
        ledger=oracle.counts() - start,
        params=params,
        extras={"squared_estimate": float(estimates[best])},
    )
