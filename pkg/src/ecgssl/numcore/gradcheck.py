"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np


def relative_error(a, b, floor=1e-7):
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)


def numerical_grad(fn, arrays, h=1e-6):
    """Central differences of scalar ``fn()`` w.r.t. every entry of ``arrays``
    (perturbed in place and restored)."""
    out = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = fn()
            flat[i] = orig - h
            fm = fn()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def directional_check(fn, arrays, grads, rng, n_directions=4, h=1e-6):
    """Compare ``grad . v`` with the central difference of ``fn`` along random
    unit directions ``v``.  Cheap for large parameter sets; returns the worst
    relative error."""
    worst = 0.0
    for _ in range(n_directions):
        dirs = [rng.standard_normal(a.shape) for a in arrays]
        norm = np.sqrt(sum(float((d * d).sum()) for d in dirs))
        dirs = [d / norm for d in dirs]
        analytic = sum(float((g * d).sum()) for g, d in zip(grads, dirs))
        for a, d in zip(arrays, dirs):
            a += h * d
        fp = fn()
        for a, d in zip(arrays, dirs):
            a -= 2 * h * d
        fm = fn()
        for a, d in zip(arrays, dirs):
            a += h * d
        numeric = (fp - fm) / (2 * h)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
