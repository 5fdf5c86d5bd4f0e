"""Matrix-valued trigonometric SOS via a Fejer-type smoothing operator.

With q^(w) = a prod_i (1 - |w_i|/s)_+ normalized so (q^ * q^)(0) = 1, the
operator T h = |q|^2 conv h multiplies Fourier coefficients by (q^ * q^)(w)
and maps PSD-valued h to matrix SOS of degree s.  A matrix polynomial f of
degree 2r is SOS at degree s >= 3r whenever

    f(x) >= eps(s) sum_{w != 0} ||f^(w)||_op,   eps(s) = (1 - 6 r^2 / s^2)^-d - 1,

because the preimage h = T^-1 f stays PSD.  Everything here is exact
(rational) where it is cheap to be.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .simpleset import DomainError


def epsilon_exact(d: int, r: int, s: int) -> Fraction:
    if r < 1 or d < 1:
        raise DomainError("need d >= 1 and r >= 1")
    if s < 3 * r:
        raise DomainError(f"need s >= 3r, got s={s}, r={r}")
    return (1 - Fraction(6 * r * r, s * s)) ** (-d) - 1


def epsilon_bound(d: int, r: int, s: int) -> float:
    """(1 - 6 r^2 / s^2)^-d - 1, evaluated exactly then rounded once."""
    return float(epsilon_exact(d, r, s))


@lru_cache(maxsize=None)
def _autocorr_1d(s: int):
    """Normalized 1-D autocorrelation of (1 - |w|/s)_+ as exact fractions, lags 0..2s."""
    if s < 1:
        raise DomainError("need s >= 1")
    tri = {w: Fraction(s - abs(w), s) for w in range(-s + 1, s)}
    raw = [sum(tri[e] * tri.get(lag - e, 0) for e in tri) for lag in range(2 * s + 1)]
    return tuple(v / raw[0] for v in raw)


def _c(s, w):
    ac = _autocorr_1d(s)
    out = Fraction(1)
    for wi in w:
        wi = abs(int(wi))
        out *= ac[wi] if wi <= 2 * s else 0
    return out


@dataclass(frozen=True)
class FejerKernel:
    """q^(w) = a prod_i (1 - |w_i|/s)_+ on |w|_inf < s."""

    s: int
    d: int = 1

    @property
    def a(self) -> float:
        # (q^ * q^)(0) = a^2 sum_w q0(w)^2 factorizes over coordinates
        one = sum(Fraction(self.s - abs(w), self.s) ** 2 for w in range(-self.s + 1, self.s))
        return float(one) ** (-self.d / 2.0)

    def coeffs(self):
        """{w: q^(w)} over the support."""
        rng = range(-self.s + 1, self.s)
        a = self.a
        return {
            w: a * float(np.prod([(self.s - abs(wi)) / self.s for wi in w]))
            for w in itertools.product(rng, repeat=self.d)
        }

    def autocorrelation(self, w) -> float:
        return float(_c(self.s, np.atleast_1d(w)))


def fejer_autocorrelation(d: int, s: int):
    """{w: (q^ * q^)(w)} for |w|_inf <= 2s (zeros omitted); value 1 at w = 0."""
    out = {}
    for w in itertools.product(range(-2 * s, 2 * s + 1), repeat=d):
        v = _c(s, w)
        if v != 0:
            out[w] = float(v)
    return out


def _max_dev_exact(d, r, s):
    # the d-dim autocorrelation is a product of 1-D ones, and each factor
    # is in (0, 1], so the deviation 1/c - 1 peaks at the smallest product
    ac = _autocorr_1d(s)
    worst = min(ac[w] for w in range(2 * r + 1)) ** d
    return 1 / worst - 1


def verify_bound(d: int, r: int, s: int):
    """Compare max_{|w|_inf <= 2r} |1/(q^*q^)(w) - 1| with eps(s)."""
    bound = epsilon_exact(d, r, s)
    dev = _max_dev_exact(d, r, s)
    return {"max_dev": float(dev), "bound": float(bound), "ok": bool(dev <= bound + Fraction(1, 10**12))}


def max_dev_direct(d: int, r: int, s: int) -> float:
    """Same deviation by brute force over every w, in floating point."""
    ac = fejer_autocorrelation(d, s)
    return max(abs(1.0 / ac[w] - 1.0) for w in itertools.product(range(-2 * r, 2 * r + 1), repeat=d))


@dataclass
class MatrixTrigPolynomial:
    """f(x) = sum_w C_w cos(2 pi w.x) + S_w sin(2 pi w.x), C_w and S_w symmetric.

    One frequency of each +/- pair is stored, so the complex coefficients
    are f^(+-w) = (C_w -+ i S_w) / 2 for w != 0 and f^(0) = C_0.
    """

    freqs: np.ndarray  # (t, d) int
    cos_c: np.ndarray  # (t, n, n)
    sin_c: np.ndarray  # (t, n, n)

    def __post_init__(self):
        self.freqs = np.atleast_2d(np.asarray(self.freqs, dtype=np.int64))
        self.cos_c = np.asarray(self.cos_c, dtype=np.float64)
        self.sin_c = np.asarray(self.sin_c, dtype=np.float64)
        if self.cos_c.ndim == 1:
            self.cos_c = self.cos_c[:, None, None]
            self.sin_c = self.sin_c[:, None, None]

    @property
    def d(self):
        return self.freqs.shape[1]

    @property
    def size(self):
        return self.cos_c.shape[1]

    @property
    def degree(self):
        return int(np.abs(self.freqs).max()) if self.freqs.size else 0

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.d)
        ph = 2 * np.pi * X @ self.freqs.T
        return np.einsum("it,tab->iab", np.cos(ph), self.cos_c) + np.einsum(
            "it,tab->iab", np.sin(ph), self.sin_c
        )

    def coefficient_norm(self):
        """sum over w != 0 (both signs) of ||f^(w)||_op."""
        tot = 0.0
        for w, C, S in zip(self.freqs, self.cos_c, self.sin_c):
            if np.any(w != 0):
                tot += 2 * np.linalg.norm((C - 1j * S) / 2, 2)
        return tot

    def scale_coefficients(self, factors):
        f = np.asarray(factors, dtype=np.float64)[:, None, None]
        return MatrixTrigPolynomial(self.freqs.copy(), self.cos_c * f, self.sin_c * f)

    def min_eig_on_grid(self, n):
        """Smallest eigenvalue over a tensor grid with n points per axis."""
        axes = [np.arange(n) / n] * self.d
        X = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        best = np.inf
        for chunk in np.array_split(X, max(1, X.shape[0] // 4096)):
            best = min(best, float(np.linalg.eigvalsh(self(chunk)).min()))
        return best


def _multipliers(f: MatrixTrigPolynomial, s: int):
    return np.array([float(_c(s, w)) for w in f.freqs])


def sos_project(f: MatrixTrigPolynomial, s: int, inverse=False):
    """T f (multiply coefficients by (q^*q^)(w)), or T^-1 f when ``inverse``."""
    c = _multipliers(f, s)
    if inverse:
        if np.any(c == 0):
            raise DomainError("smoothing multiplier vanishes on the support; increase s")
        return f.scale_coefficients(1.0 / c)
    return f.scale_coefficients(c)


def preimage(f: MatrixTrigPolynomial, s: int):
    """h with T h = f; PSD values of h certify that f is matrix SOS at degree s."""
    return sos_project(f, s, inverse=True)


def sufficient_condition(f: MatrixTrigPolynomial, r: int, s: int, grid_n=1000):
    """Grid check of f(x) >= eps(s) sum ||f^(w)||_op; returns (holds, margin)."""
    if f.degree > 2 * r:
        raise DomainError(f"degree {f.degree} exceeds 2r = {2 * r}")
    need = epsilon_bound(f.d, r, s) * f.coefficient_norm()
    margin = f.min_eig_on_grid(grid_n) - need
    return margin >= 0, margin


def random_matrix_trig(rng, n, r, d=1, scale=1.0):
    """Random symmetric n x n trig polynomial of degree 2r (half-plane frequencies)."""
    grids = np.meshgrid(*([np.arange(-2 * r, 2 * r + 1)] * d), indexing="ij")
    F = np.stack([g.ravel() for g in grids], axis=1)
    F = np.array([w for w in F if not np.any(w) or w[np.flatnonzero(w)[0]] > 0])
    def sym():
        A = rng.standard_normal((F.shape[0], n, n)) * scale
        return 0.5 * (A + A.transpose(0, 2, 1))
    C, S = sym(), sym()
    S[np.all(F == 0, axis=1)] = 0.0
    return MatrixTrigPolynomial(F, C, S)


def shift_to_condition(f: MatrixTrigPolynomial, r, s, extra=0.05, grid_n=1000):
    """Add a multiple of I to the constant term so f >= (eps(s) + extra) sum ||f^(w)||."""
    need = (epsilon_bound(f.d, r, s) + extra) * f.coefficient_norm()
    lo = f.min_eig_on_grid(grid_n)
    C = f.cos_c.copy()
    k0 = int(np.flatnonzero(np.all(f.freqs == 0, axis=1))[0])
    C[k0] += max(0.0, need - lo) * np.eye(f.size)
    return MatrixTrigPolynomial(f.freqs.copy(), C, f.sin_c.copy())


def bound_table(ds=(1, 2), rs=(1, 2), s_max=12):
    rows = []
    for d in ds:
        for r in rs:
            for s in range(3 * r, s_max + 1):
                res = verify_bound(d, r, s)
                rows.append({"d": d, "r": r, "s": s, **res})
    return rows
