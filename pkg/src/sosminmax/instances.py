"""Seed-fixed problem instances used by the reproduction commands and tests."""

from __future__ import annotations

import numpy as np

from .minmax import BilinearObjective
from .polynomial import monomial, random_trig, trig
from .simpleset import Kind, make_set

# seeds picked once and frozen
THREE_POLY_SEED = 0
ALTERNATING_SEED = 2
BIVARIATE_SEED = 5


def three_polys(seed=THREE_POLY_SEED, n=3, degree=2):
    """``n`` random univariate trig polynomials of the given degree."""
    rng = np.random.default_rng(seed)
    return [random_trig(rng, degree) for _ in range(n)]


def abs_cos(s=2):
    """max(cos 2 pi x, -cos 2 pi x) = |cos 2 pi x|, minimized at 1/4 and 3/4."""
    return BilinearObjective(
        make_set(Kind.TRIG, 1, 1, s=s),
        g_list=[trig([(1, 1.0, 0.0)]), trig([(1, -1.0, 0.0)])],
    )


def cos_sin(s=2):
    """max(cos 2 pi x, sin 2 pi x), minimized at 5/8 with value -sqrt(2)/2."""
    return BilinearObjective(
        make_set(Kind.TRIG, 1, 1, s=s),
        g_list=[trig([(1, 1.0, 0.0)]), trig([(1, 0.0, 1.0)])],
    )


def finite_three(seed=THREE_POLY_SEED, s=2):
    """Three random degree-2 polynomials on the circle (finite Y)."""
    return BilinearObjective(make_set(Kind.TRIG, 1, 1, s=s), g_list=three_polys(seed))


def bivariate(seed=BIVARIATE_SEED, sx=1, sy=1):
    """A random degree-(2, 2) trig polynomial g(x, y) on [0, 1]^2."""
    rng = np.random.default_rng(seed)
    g = random_trig(rng, 2, n_vars=2)
    X = make_set(Kind.TRIG, 1, 1, s=sx)
    Y = make_set(Kind.TRIG, 1, 1, s=sy)
    return BilinearObjective(X, Y, g=g), g


def shifted_ball(offset=2.0):
    """g(x) = x - offset on the unit interval seen as a ball; empty for offset > 1."""
    return [monomial([((1,), 1.0), ((0,), -offset)])]


def boolean_pair(seed, d=3):
    """Two linear-plus-quadratic polynomials on {-1, 1}^d."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(2):
        terms = [((0,) * d, rng.standard_normal())]
        for i in range(d):
            e = [0] * d
            e[i] = 1
            terms.append((tuple(e), rng.standard_normal()))
        for i in range(d):
            for k in range(i + 1, d):
                e = [0] * d
                e[i] = e[k] = 1
                terms.append((tuple(e), rng.standard_normal()))
        out.append(monomial(terms, d))
    return out
