"""Independent reference implementations used to freeze expected values.

Nothing here imports the library's algorithm code; each routine is a
deliberately naive second implementation of a formula or scan.
"""
import math

import numpy as np


def exhaustive_opt(A, members):
    """Plain loop over members; strict '<' keeps the lowest id on ties."""
    best_id, best = None, None
    for i, B in enumerate(members):
        d = 0.0
        for a, b in zip(np.asarray(A).ravel().tolist(), np.asarray(B).ravel().tolist()):
            d += (a - b) ** 2
        d = math.sqrt(d)
        if best is None or d < best:
            best_id, best = i, d
    return best_id, best


def _lg(x):
    return max(1.0, math.log(x, 2))


def _ceil_clamp(x, cap=None):
    v = max(2, int(math.ceil(x)))
    return v if cap is None else min(v, cap)


def params(size, eps, delta, c, algorithm, caps=None):
    """Dictionary of the derived sketch sizes, evaluated from the formulas."""
    caps = caps or {}
    L = _lg(size)
    LL = _lg(L)
    if algorithm == "one-shot":
        return {"l": _ceil_clamp(c * _lg(size / delta) / eps ** 2, caps.get("l"))}
    if algorithm == "one-sided":
        return {"l": _ceil_clamp(c * _lg(L / delta) / eps ** 2, caps.get("l")),
                "T": _ceil_clamp(L / LL)}
    if algorithm == "two-sided":
        inner = _lg(L / delta)
        expo = 1.5 * math.sqrt(L) * inner
        q = _ceil_clamp(2 ** expo) if expo < 60 else 2 ** 62
        if caps.get("q") is not None:
            q = min(q, caps["q"])
        return {"m": _ceil_clamp(c * math.sqrt(L) * inner / eps ** 2, caps.get("m")),
                "l": _ceil_clamp(c * inner / eps ** 2, caps.get("l")),
                "r": _ceil_clamp(L / LL, caps.get("r")),
                "q": q,
                "iterations": int(math.ceil(math.sqrt(L))) + 1}
    if algorithm == "coarse":
        t = _ceil_clamp(c * _lg(1 / delta))
        return {"t": t + (1 - t % 2)}
    if algorithm == "binary-search":
        step = 1 + eps / 12
        return {"l": _ceil_clamp(c * _lg(L / (delta * eps)) / eps ** 2, caps.get("l")),
                "grid_R": int(math.ceil(math.log(6 * size) / math.log(step)))}
    if algorithm == "vmv":
        t = _ceil_clamp(c * _lg(size / delta))
        return {"m": int(math.ceil(36 / eps ** 2)), "t": t + (1 - t % 2)}
    raise KeyError(algorithm)


def block_corner_positions(n):
    """Top-left corner of every sqrt(n) x sqrt(n) block, row-major."""
    s = int(round(math.sqrt(n)))
    out = []
    for bi in range(s):
        for bj in range(s):
            out.append((bi * s, bj * s))
    return out


def gram_schmidt(mats):
    """Classical Gram-Schmidt on flattened matrices, written out longhand."""
    vs = [np.asarray(m, dtype=float).ravel() for m in mats]
    out = []
    for v in vs:
        w = v.copy()
        for u in out:
            w = w - float(u @ v) * u
        out.append(w / math.sqrt(float(w @ w)))
    return out


def lattice_1d(R, alpha):
    """q=1 lattice: spacing 2*alpha, keep |p| <= R + alpha, clip to [-R, R]."""
    s = 2 * alpha
    k = int(math.floor((R + alpha) / s))
    pts = sorted({max(-R, min(R, j * s)) for j in range(-k, k + 1)})
    return pts


def uniform_ball(q, R, count, rng):
    """Uniform samples from the radius-R ball in R^q."""
    g = rng.standard_normal((count, q))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (R * rng.random(count) ** (1.0 / q))[:, None]


def cover_check(points, R, alpha, rng, samples=1000):
    """True when every uniform ball sample lies within alpha of a point."""
    x = uniform_ball(points.shape[1], R, samples, rng)
    d = np.sqrt(((x[:, None, :] - points[None, :, :]) ** 2).sum(-1)).min(axis=1)
    return bool(np.all(d <= alpha * (1 + 1e-12)))
