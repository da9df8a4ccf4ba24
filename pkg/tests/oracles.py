"""Independent float64 reference implementations used to freeze expected values.

Nothing here imports the package under test. The forward passes are written
the long way (explicit loops where that removes any shared structure with the
library) so agreement is evidence, not tautology.
"""

import math

import numpy as np


def power_threshold(w: float, t: float, p: float) -> float:
    """Scalar power-law shrinkage, direct formula in float64."""
    a = abs(w)
    if a <= t:
        return 0.0
    if math.isinf(p):
        return w
    return math.copysign((a ** p - t ** p) ** (1.0 / p), w)


def soft_threshold(w: float, t: float) -> float:
    a = abs(w)
    return math.copysign(a - t, w) if a > t else 0.0


def pearson(a, b) -> float:
    """Plain textbook Pearson r in float64."""
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    xm = x - x.mean()
    ym = y - y.mean()
    return float((xm * ym).sum() / math.sqrt((xm * xm).sum() * (ym * ym).sum()))


def mlp_loss(weights: list[np.ndarray], biases: list[np.ndarray],
             x: np.ndarray, labels: np.ndarray, smoothing: float = 0.0) -> float:
    """Forward pass of a ReLU MLP plus smoothed cross-entropy, all float64."""
    h = np.asarray(x, dtype=np.float64)
    n_layers = len(weights)
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = h @ np.asarray(w, dtype=np.float64) + np.asarray(b, dtype=np.float64)
        if i < n_layers - 1:
            h = np.maximum(h, 0.0)
    n, k = h.shape
    shifted = h - h.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    target = np.full((n, k), smoothing / k)
    target[np.arange(n), labels] += 1.0 - smoothing
    return float(-(target * logp).sum() / n)


def central_difference(f, x0: np.ndarray, eps: float) -> np.ndarray:
    """Gradient of scalar f at x0 by symmetric differences, one coordinate at a time."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    flat = x0.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x0)
        flat[i] = orig - eps
        lo = f(x0)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def conv2d_naive(x: np.ndarray, k: np.ndarray, stride: int, padding: int) -> np.ndarray:
    """Quadruple-loop cross-correlation in float64. Slow and unambiguous."""
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    n, c, h, w = x.shape
    f, _, kh, kw = k.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, f, oh, ow))
    for img in range(n):
        for filt in range(f):
            for i in range(oh):
                for j in range(ow):
                    patch = xp[img, :, i * stride : i * stride + kh,
                               j * stride : j * stride + kw]
                    out[img, filt, i, j] = (patch * k[filt]).sum()
    return out


def splitmix64_reference(state: int):
    """Reference splitmix64 stepping, transcribed from the published algorithm."""
    mask = (1 << 64) - 1
    state = (state + 0x9E3779B97F4A7C15) & mask
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return state, (z ^ (z >> 31)) & mask
