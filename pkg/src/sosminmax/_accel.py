"""Hot numeric kernels, compiled with numba when available.

Every kernel exists twice: a pure-numpy version (suffix ``_np``) and a
numba version (suffix ``_nb``).  The public name points at the numba one
unless numba is missing or ``SOSMINMAX_DISABLE_NUMBA`` is set to a truthy
value before import.  Both paths must agree to rounding error; the test
suite and ``benchmarks/bench_kernels.py`` exercise them side by side.
"""

import os

import numpy as np

_FLAG = os.environ.get("SOSMINMAX_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if NUMBA_DISABLED:
        raise ImportError("disabled by SOSMINMAX_DISABLE_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

# |sin(pi t)| below this is treated as the removable singularity t in Z.
DIRICHLET_EPS = 1e-9


# ---------------------------------------------------------------------------
# Dirichlet (trigonometric) kernel Gram matrices
# ---------------------------------------------------------------------------


def dirichlet_gram_np(X, Y, r):
    """Product Dirichlet kernel between rows of ``X`` (n, d) and ``Y`` (k, d)."""
    n2 = 2 * r + 1
    out = np.ones((X.shape[0], Y.shape[0]))
    for c in range(X.shape[1]):
        t = X[:, c][:, None] - Y[:, c][None, :]
        den = np.sin(np.pi * t)
        small = np.abs(den) < DIRICHLET_EPS
        safe = np.where(small, 1.0, den)
        val = np.sin(n2 * np.pi * t) / (n2 * safe)
        out *= np.where(small, 1.0, val)
    return out


def trig_eval_np(P, F, cos_c, sin_c):
    """Evaluate sum_t cos_c[t] cos(2 pi F[t].p) + sin_c[t] sin(2 pi F[t].p)."""
    phase = 2.0 * np.pi * (P @ F.T.astype(np.float64))
    return np.cos(phase) @ cos_c + np.sin(phase) @ sin_c


def schur_lowrank_np(Q, ptr, w):
    """Schur complement block from low-rank coefficient factors.

    ``Q`` holds scaled inner products u_a' W^{-1} u_b of all factor columns
    of one PSD block; columns ``ptr[k]:ptr[k+1]`` belong to variable k and
    ``w`` carries the signed weights.  Returns
    ``M[k, l] = sum_{a in k, b in l} w_a w_b Q_ab^2``.
    """
    E = (Q * Q) * np.outer(w, w)
    starts = ptr[:-1]
    E = np.add.reduceat(E, starts, axis=0)
    return np.add.reduceat(E, starts, axis=1)


def max_over_columns_np(V):
    return V.max(axis=1)


if HAS_NUMBA:

    @njit(cache=True)
    def dirichlet_gram_nb(X, Y, r):
        n, k = X.shape[0], Y.shape[0]
        d = X.shape[1]
        n2 = 2 * r + 1
        out = np.ones((n, k))
        for i in range(n):
            for j in range(k):
                acc = 1.0
                for c in range(d):
                    t = X[i, c] - Y[j, c]
                    den = np.sin(np.pi * t)
                    if abs(den) >= DIRICHLET_EPS:
                        acc *= np.sin(n2 * np.pi * t) / (n2 * den)
                out[i, j] = acc
        return out

    @njit(cache=True)
    def trig_eval_nb(P, F, cos_c, sin_c):
        N, n = P.shape
        T = F.shape[0]
        out = np.zeros(N)
        for i in range(N):
            acc = 0.0
            for t in range(T):
                ph = 0.0
                for c in range(n):
                    ph += F[t, c] * P[i, c]
                ph *= 2.0 * np.pi
                acc += cos_c[t] * np.cos(ph) + sin_c[t] * np.sin(ph)
            out[i] = acc
        return out

    @njit(cache=True)
    def schur_lowrank_nb(Q, ptr, w):
        nv = ptr.shape[0] - 1
        M = np.zeros((nv, nv))
        for k in range(nv):
            for l in range(k, nv):
                acc = 0.0
                for a in range(ptr[k], ptr[k + 1]):
                    for b in range(ptr[l], ptr[l + 1]):
                        q = Q[a, b]
                        acc += w[a] * w[b] * q * q
                M[k, l] = acc
                M[l, k] = acc
        return M

    @njit(cache=True)
    def max_over_columns_nb(V):
        n, k = V.shape
        out = np.empty(n)
        for i in range(n):
            best = V[i, 0]
            for j in range(1, k):
                if V[i, j] > best:
                    best = V[i, j]
            out[i] = best
        return out

    dirichlet_gram = dirichlet_gram_nb
    trig_eval = trig_eval_nb
    schur_lowrank = schur_lowrank_nb
    max_over_columns = max_over_columns_nb
else:
    dirichlet_gram = dirichlet_gram_np
    trig_eval = trig_eval_np
    schur_lowrank = schur_lowrank_np
    max_over_columns = max_over_columns_np


def backend():
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if HAS_NUMBA else "numpy"
