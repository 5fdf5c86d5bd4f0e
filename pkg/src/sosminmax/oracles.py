"""Brute-force grid oracles for problems on [0, 1) and [0, 1)^2.

Independent of the SDP code: they only evaluate the polynomials, then
polish the most promising grid cells with a bounded scalar search.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize_scalar

from .polynomial import evaluate


def plot_grid(n):
    """n equispaced points of [0, 1) as a column."""
    return (np.arange(n) / n)[:, None]


def _periodic_refine(fun, x0, h):
    r = minimize_scalar(fun, bounds=(x0 - h, x0 + h), method="bounded", options={"xatol": 1e-12})
    return float(r.fun), float(np.mod(r.x, 1.0))


def _local_minima(v, k):
    """Indices of the k smallest periodic local minima of a sampled function."""
    idx = np.flatnonzero((v <= np.roll(v, 1)) & (v <= np.roll(v, -1)))
    return idx[np.argsort(v[idx])[:k]]


def grid_minmax_1d(g_list, n=100_000, refine=8):
    """min_x max_j g_j(x) on [0, 1) by a grid plus local refinement of the best cells."""
    X = plot_grid(n)
    v = np.max([evaluate(g, X) for g in g_list], axis=0)
    best, arg = float(v.min()), float(X[np.argmin(v), 0])
    fun = lambda x: max(float(evaluate(g, np.array([[x]]))[0]) for g in g_list)  # noqa: E731
    for i in _local_minima(v, refine):
        val, x = _periodic_refine(fun, X[i, 0], 1.0 / n)
        if val < best:
            best, arg = val, x
    return best, arg


def grid_minmax_2d(g, n=1000, refine=4):
    """min_x max_y g(x, y) on [0, 1)^2 by a nested grid with local refinement."""
    t = np.arange(n) / n
    XX, YY = np.meshgrid(t, t, indexing="ij")
    G = evaluate(g, np.stack([XX.ravel(), YY.ravel()], 1)).reshape(n, n)
    inner = G.max(axis=1)

    def inner_max(x):
        vals = evaluate(g, np.stack([np.full(n, x), t], 1))
        j = int(np.argmax(vals))
        r = minimize_scalar(
            lambda y: -float(evaluate(g, np.array([[x, y]]))[0]),
            bounds=(t[j] - 1.0 / n, t[j] + 1.0 / n), method="bounded", options={"xatol": 1e-12},
        )
        return max(-float(r.fun), float(vals[j]))

    # grid maxima underestimate the inner max, so only refined values count
    best, arg = np.inf, np.nan
    for i in _local_minima(inner, refine):
        val, x = _periodic_refine(inner_max, t[i], 1.0 / n)
        if val < best:
            best, arg = val, x
    return best, arg, t, inner
