"""numpy versions of the compiled kernels (same signatures, same results up
to rounding).  ``bound`` is accepted for interface parity and ignored."""
import numpy as np

# elements per temporary block when forming stacked products
_CHUNK = 1 << 22


def _chunks(k, per_item):
    step = max(1, _CHUNK // max(per_item, 1))
    for start in range(0, k, step):
        yield slice(start, min(k, start + step))


def residual_norms(target, stack, pi, bound=np.inf):
    k, n, _ = stack.shape
    out = np.empty(k)
    for sl in _chunks(k, n * pi.shape[1]):
        diff = target - stack[sl] @ pi
        out[sl] = np.sqrt(np.einsum("kij,kij->k", diff, diff))
    return out


def frobenius_distances(target, images):
    out = np.empty(images.shape[0])
    for sl in _chunks(images.shape[0], target.size):
        diff = target - images[sl]
        out[sl] = np.sqrt(np.einsum("kij,kij->k", diff, diff))
    return out


def bilinear_forms(stack, X, Y):
    k, n, _ = stack.shape
    p = X.shape[0]
    out = np.empty((k, p))
    # (X @ B) * Y row sums, member by member within a chunk; this matches the
    # oracle's own evaluation order bit for bit
    for sl in _chunks(k, p * n):
        out[sl] = ((X @ stack[sl]) * Y).sum(axis=-1)
    return out
