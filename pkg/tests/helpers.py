"""Shared independent oracles used across test modules."""

import math
from fractions import Fraction

import numpy as np

from attrquest.classifier import PARAM_KEYS, batch_loss


def norm_rel_err(approx, exact):
    """Infinity-norm relative error with a unit floor on the denominator."""
    approx = np.asarray(approx, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    denom = max(1.0, float(np.max(np.abs(exact))) if exact.size else 0.0)
    return float(np.max(np.abs(approx - exact))) / denom if exact.size else 0.0


def flatten_params(params):
    return np.concatenate([getattr(params, k).ravel() for k in PARAM_KEYS])


def unflatten_into(params, vec):
    lo = 0
    for k in PARAM_KEYS:
        arr = getattr(params, k)
        hi = lo + arr.size
        arr[...] = vec[lo:hi].reshape(arr.shape)
        lo = hi


def fd_gradient(fn, vec, h=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.zeros_like(vec)
    for j in range(vec.size):
        up, down = vec.copy(), vec.copy()
        up[j] += h
        down[j] -= h
        grad[j] = (fn(up) - fn(down)) / (2.0 * h)
    return grad


def classifier_fd_gradient(params, X, Y, M, lam, h=1e-5):
    base = flatten_params(params)

    def fn(vec):
        work = params.copy()
        unflatten_into(work, vec)
        return batch_loss(work, X, Y, M, lam)

    return fd_gradient(fn, base, h=h)


def classifier_flat_gradient(grads):
    return np.concatenate([grads[k].ravel() for k in PARAM_KEYS])


def brute_force_info_gain(b, p_col, eps=1e-7):
    """Explicit double loop over items and answers; no algebraic shortcuts."""
    n = len(b)
    p = [min(max(float(v), eps), 1.0 - eps) for v in p_col]
    marginal = {}
    for a in (0, 1):
        total = 0.0
        for i in range(n):
            like = p[i] if a == 1 else 1.0 - p[i]
            total += b[i] * like
        marginal[a] = total
    j = 0.0
    for i in range(n):
        if b[i] <= 0.0:
            continue
        for a in (0, 1):
            like = p[i] if a == 1 else 1.0 - p[i]
            if like == 0.0:
                continue
            j += b[i] * like * math.log(like / marginal[a])
    return max(j, 0.0)


def exhaustive_best_f1(probs, values):
    """Best achievable F1 over the midpoint threshold grid, in exact rational
    arithmetic; returns (best_f1_float, best_theta)."""
    probs = [float(v) for v in probs]
    values = [int(v) for v in values]
    uniq = sorted(set(probs))
    grid = {0.0, 1.0}
    for lo, hi in zip(uniq[:-1], uniq[1:]):
        grid.add((lo + hi) / 2.0)
    best_f1 = Fraction(0)
    best_theta = None
    for theta in sorted(grid):
        tp = sum(1 for p, y in zip(probs, values) if p >= theta and y == 1)
        fp = sum(1 for p, y in zip(probs, values) if p >= theta and y == 0)
        fn = sum(1 for p, y in zip(probs, values) if p < theta and y == 1)
        f1 = Fraction(2 * tp, 2 * tp + fp + fn) if (2 * tp + fp + fn) else Fraction(0)
        if best_theta is None or f1 > best_f1 or (f1 == best_f1 and theta > best_theta):
            best_f1, best_theta = f1, theta
    return float(best_f1), best_theta
