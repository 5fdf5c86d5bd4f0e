"""Real polynomials evaluated pointwise.

Three representations are supported: trigonometric (real cos/sin
coefficients per integer frequency), monomial (exponent/coefficient pairs)
and tabulated (an arbitrary vectorized callback).  The relaxations only
ever need values at sample points, so no coefficient algebra is provided
beyond what the certificates require.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _accel
from .simpleset import Kind, SimpleSet


def _points(X, n_vars):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if n_vars == 1 else X.reshape(1, -1)
    if X.shape[1] != n_vars:
        raise ValueError(f"expected {n_vars} coordinates, got {X.shape[1]}")
    return X


@dataclass(frozen=True)
class TrigPolynomial:
    """sum_t cos_c[t] cos(2 pi w_t.x) + sin_c[t] sin(2 pi w_t.x) on [0, 1)^n."""

    freqs: np.ndarray
    cos_c: np.ndarray
    sin_c: np.ndarray
    domain: SimpleSet | None = field(default=None, compare=False)

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.freqs, dtype=np.int64))
        c = np.asarray(self.cos_c, dtype=np.float64).ravel()
        s = np.asarray(self.sin_c, dtype=np.float64).ravel()
        if not (F.shape[0] == c.size == s.size):
            raise ValueError("frequency and coefficient counts differ")
        object.__setattr__(self, "freqs", F)
        object.__setattr__(self, "cos_c", c)
        object.__setattr__(self, "sin_c", s)

    @property
    def n_vars(self):
        return self.freqs.shape[1]

    @property
    def degree(self):
        return int(np.max(np.abs(self.freqs))) if self.freqs.size else 0

    def __call__(self, X):
        X = _points(X, self.n_vars)
        return _accel.trig_eval(
            np.ascontiguousarray(X),
            np.ascontiguousarray(self.freqs),
            np.ascontiguousarray(self.cos_c),
            np.ascontiguousarray(self.sin_c),
        )

    def to_json(self):
        return {
            "basis": "trig",
            "terms": [
                {"freq": f.tolist(), "cos": float(c), "sin": float(s)}
                for f, c, s in zip(self.freqs, self.cos_c, self.sin_c)
            ],
        }


@dataclass(frozen=True)
class MonomialPolynomial:
    """sum_t coefs[t] prod_i x_i^exps[t, i]."""

    exps: np.ndarray
    coefs: np.ndarray
    domain: SimpleSet | None = field(default=None, compare=False)

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.exps, dtype=np.int64))
        c = np.asarray(self.coefs, dtype=np.float64).ravel()
        if E.shape[0] != c.size:
            raise ValueError("exponent and coefficient counts differ")
        if np.any(E < 0):
            raise ValueError("negative exponent")
        object.__setattr__(self, "exps", E)
        object.__setattr__(self, "coefs", c)

    @property
    def n_vars(self):
        return self.exps.shape[1]

    @property
    def degree(self):
        return int(self.exps.sum(axis=1).max()) if self.exps.size else 0

    def __call__(self, X):
        X = _points(X, self.n_vars)
        out = np.zeros(X.shape[0])
        for e, c in zip(self.exps, self.coefs):
            out += c * np.prod(X**e, axis=1)
        return out

    def to_json(self):
        return {
            "basis": "monomial",
            "terms": [{"exp": e.tolist(), "coef": float(c)} for e, c in zip(self.exps, self.coefs)],
        }


@dataclass(frozen=True)
class Tabulated:
    """Values supplied by a vectorized callback ``fn(X) -> (n,)``."""

    fn: Callable
    n_vars: int = 1
    degree: int | None = None
    domain: SimpleSet | None = field(default=None, compare=False)

    def __call__(self, X):
        X = _points(X, self.n_vars)
        return np.asarray(self.fn(X), dtype=np.float64).reshape(X.shape[0])

    def to_json(self):
        raise TypeError("tabulated polynomials have no JSON form")


Polynomial = TrigPolynomial | MonomialPolynomial | Tabulated


def trig(terms, n_vars=1, domain=None):
    """Build a trig polynomial from ``[(freq, cos, sin), ...]``."""
    if not terms:
        return TrigPolynomial(np.zeros((1, n_vars), dtype=np.int64), [0.0], [0.0], domain)
    F = np.array([np.atleast_1d(t[0]) for t in terms], dtype=np.int64)
    return TrigPolynomial(F, [t[1] for t in terms], [t[2] for t in terms], domain)


def monomial(terms, n_vars=1, domain=None):
    """Build a monomial polynomial from ``[(exponents, coef), ...]``."""
    if not terms:
        return MonomialPolynomial(np.zeros((1, n_vars), dtype=np.int64), [0.0], domain)
    E = np.array([np.atleast_1d(t[0]) for t in terms], dtype=np.int64)
    return MonomialPolynomial(E, [t[1] for t in terms], domain)


def constant(c, n_vars=1):
    return monomial([(np.zeros(n_vars, dtype=int), c)], n_vars)


def evaluate(p, X, domain=None):
    """Values of ``p`` at the rows of ``X``, checking membership if a domain is known."""
    dom = domain if domain is not None else getattr(p, "domain", None)
    if dom is not None:
        X = dom.check(X)
    return p(X)


def random_trig(rng, degree, n_vars=1, scale=1.0):
    """Random real trig polynomial with frequencies in [-degree, degree]^n.

    Only one frequency of each +/- pair is kept.  Coefficients are standard
    normal times ``scale``.
    """
    grids = np.meshgrid(*([np.arange(-degree, degree + 1)] * n_vars), indexing="ij")
    F = np.stack([g.ravel() for g in grids], axis=1)
    # keep w with first nonzero coordinate positive, plus w = 0
    keep = []
    for w in F:
        nz = np.flatnonzero(w)
        if nz.size == 0 or w[nz[0]] > 0:
            keep.append(w)
    F = np.array(keep, dtype=np.int64)
    c = scale * rng.standard_normal(F.shape[0])
    s = scale * rng.standard_normal(F.shape[0])
    s[np.all(F == 0, axis=1)] = 0.0
    return TrigPolynomial(F, c, s)


def representable(p, sset):
    """Whether ``p`` lies in the span of phi(x) phi(x)' at the set's level.

    Tabulated polynomials are trusted if they declare no degree.
    """
    s = sset.hierarchy_level
    if isinstance(p, Tabulated):
        return p.degree is None or p.degree <= 2 * s
    k = sset.kind
    if k is Kind.DISCRETE:
        return True
    if k is Kind.TRIG:
        return isinstance(p, TrigPolynomial) and p.degree <= 2 * s
    if k in (Kind.SPHERE, Kind.BALL):
        return isinstance(p, MonomialPolynomial) and p.degree <= 2 * s
    if k is Kind.BOOLCUBE:
        if not isinstance(p, MonomialPolynomial):
            return False
        # x_i^2 = 1 on the cube, so only the parity pattern matters
        return int((p.exps % 2).sum(axis=1).max()) <= 2 * s
    return True


def poly_from_json(obj, domain=None):
    basis = obj.get("basis")
    if basis == "trig":
        terms = [(t["freq"], t.get("cos", 0.0), t.get("sin", 0.0)) for t in obj["terms"]]
        n = len(np.atleast_1d(obj["terms"][0]["freq"])) if obj["terms"] else 1
        return trig(terms, n, domain)
    if basis == "monomial":
        terms = [(t["exp"], t["coef"]) for t in obj["terms"]]
        n = len(np.atleast_1d(obj["terms"][0]["exp"])) if obj["terms"] else 1
        return monomial(terms, n, domain)
    raise ValueError(f"unknown polynomial basis {basis!r}")


def poly_to_json(p):
    return p.to_json()
