"""Simple sets: compact domains with a unit-norm polynomial feature map.

Only the kernel k(x, x') = phi(x)' phi(x') is ever evaluated; the feature
map itself is never built.  Supported kinds:

========  ===========================================  =====================
kind      domain                                       kernel (degree s)
========  ===========================================  =====================
discrete  {0, ..., p-1}                                1[x == x']
trig      torus [0, 1)^d                               product of Dirichlet
sphere    unit sphere in R^(d+1)                       ((1 + x'x') / 2)^s
ball      unit ball in R^d (projected sphere)          sphere kernel on lifts
boolcube  {-1, 1}^d                                    (1/m) sum_{i<=s} e_i(x*x')
product   cartesian product of the above               product of factors
========  ===========================================  =====================
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import _accel
from .matalg import ConditioningError, eigh, numerical_rank

MEMBERSHIP_TOL = 1e-12
WELL_POSITIONED_TOL = 1e-10
MAX_RESAMPLE = 20


class Kind(str, enum.Enum):
    DISCRETE = "discrete"
    TRIG = "trig"
    SPHERE = "sphere"
    BALL = "ball"
    BOOLCUBE = "boolcube"
    PRODUCT = "product"


class DomainError(ValueError):
    """A point does not belong to the set it is evaluated on."""


@dataclass(frozen=True)
class SimpleSet:
    """A simple set at a given polynomial degree.

    ``d`` is the kind-specific dimension (the atom count for ``discrete``,
    the sphere's intrinsic dimension for ``sphere``).  ``degree`` is the
    degree r of the problem data and ``hierarchy_level`` the degree s >= r
    actually used by the kernel.
    """

    kind: Kind
    d: int
    degree: int
    hierarchy_level: int
    factors: tuple = field(default=())

    # -- geometry ----------------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        if self.kind is Kind.DISCRETE:
            return 1
        if self.kind is Kind.SPHERE:
            return self.d + 1
        if self.kind is Kind.PRODUCT:
            return sum(f.ambient_dim for f in self.factors)
        return self.d

    @property
    def s(self) -> int:
        return self.hierarchy_level

    def split(self, X):
        """Split product-set coordinates into per-factor blocks."""
        out, c = [], 0
        for f in self.factors:
            out.append(X[:, c : c + f.ambient_dim])
            c += f.ambient_dim
        return out

    def contains(self, X, tol=MEMBERSHIP_TOL):
        """Boolean mask of rows of ``X`` lying in the set."""
        X = _as_points(X, self.ambient_dim)
        k = self.kind
        if k is Kind.DISCRETE:
            v = X[:, 0]
            return (np.abs(v - np.round(v)) <= tol) & (v > -0.5) & (v < self.d - 0.5)
        if k is Kind.TRIG:
            return np.all((X >= -tol) & (X <= 1.0 + tol), axis=1)
        if k is Kind.SPHERE:
            return np.abs(np.linalg.norm(X, axis=1) - 1.0) <= max(tol, 1e-14)
        if k is Kind.BALL:
            return np.linalg.norm(X, axis=1) <= 1.0 + tol
        if k is Kind.BOOLCUBE:
            return np.all(np.abs(np.abs(X) - 1.0) <= tol, axis=1)
        mask = np.ones(X.shape[0], dtype=bool)
        for f, Xf in zip(self.factors, self.split(X)):
            mask &= f.contains(Xf, tol)
        return mask

    def check(self, X, tol=MEMBERSHIP_TOL):
        X = _as_points(X, self.ambient_dim)
        bad = ~self.contains(X, tol)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DomainError(f"point {X[i].tolist()} is not in the {self.kind.value} set")
        return X

    # -- kernel ------------------------------------------------------------

    def gram(self, X, Y=None, check=True):
        """Kernel matrix k(X_i, Y_j) at the hierarchy level."""
        X = _as_points(X, self.ambient_dim)
        Y = X if Y is None else _as_points(Y, self.ambient_dim)
        if check:
            self.check(X)
            self.check(Y)
        s, k = self.hierarchy_level, self.kind
        if k is Kind.DISCRETE:
            return (np.round(X[:, 0])[:, None] == np.round(Y[:, 0])[None, :]).astype(float)
        if k is Kind.TRIG:
            return _accel.dirichlet_gram(
                np.ascontiguousarray(X), np.ascontiguousarray(Y), s
            )
        if k is Kind.SPHERE:
            return ((1.0 + X @ Y.T) / 2.0) ** s
        if k is Kind.BALL:
            return ((1.0 + lift_ball(X) @ lift_ball(Y).T) / 2.0) ** s
        if k is Kind.BOOLCUBE:
            return _boolcube_kernel(X, Y, s)
        out = np.ones((X.shape[0], Y.shape[0]))
        for f, Xf, Yf in zip(self.factors, self.split(X), self.split(Y)):
            out *= f.gram(Xf, Yf, check=False)
        return out

    def dims(self):
        return dims(self)


def _as_points(X, dim):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(1, -1) if dim > 1 else X.reshape(-1, 1)
    elif X.ndim > 2:
        raise ValueError(f"expected a 2-D array of points, got shape {X.shape}")
    if X.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {X.shape[1]}")
    return X


def lift_ball(X):
    """Lift ball points onto the upper hemisphere: x -> (x, sqrt(1 - |x|^2))."""
    t = np.sqrt(np.clip(1.0 - np.sum(X * X, axis=1), 0.0, None))
    return np.hstack([X, t[:, None]])


def _boolcube_kernel(X, Y, s):
    # e_i(z) of z = x * y by the usual recurrence over coordinates.
    d = X.shape[1]
    Z = X[:, None, :] * Y[None, :, :]
    top = min(s, d)
    e = np.zeros((top + 1,) + Z.shape[:2])
    e[0] = 1.0
    for c in range(d):
        zc = Z[:, :, c]
        for i in range(top, 0, -1):
            e[i] = e[i] + zc * e[i - 1]
    m = sum(math.comb(d, i) for i in range(top + 1))
    return e.sum(axis=0) / m


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def make_set(kind, d=1, r=1, *, s=None, factors=None):
    """Build a simple set.

    Parameters
    ----------
    kind : str or Kind
        One of ``discrete``, ``trig``, ``sphere``, ``ball``, ``boolcube``,
        ``product``.
    d : int
        Dimension; for ``discrete`` the number of atoms.
    r : int
        Degree of the problem data (quadratic forms have degree 2r).
    s : int, optional
        Hierarchy level, defaults to ``r``.
    factors : sequence of SimpleSet
        Required for ``product``.
    """
    kind = Kind(kind)
    s = r if s is None else s
    if kind is Kind.PRODUCT:
        if not factors:
            raise ValueError("product set needs at least one factor")
        factors = tuple(factors)
        return SimpleSet(Kind.PRODUCT, len(factors), r, s, factors)
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if r < 0 or s < r:
        raise ValueError(f"need 0 <= r <= s, got r={r}, s={s}")
    if kind is Kind.DISCRETE:
        return SimpleSet(kind, d, r, s)
    if r == 0:
        raise ValueError(
            f"{kind.value} sets need r >= 1: with r = 0 the identity map is "
            "not linear in the features, so minimizers cannot be extracted"
        )
    return SimpleSet(kind, d, r, s)


def product_set(*factors):
    return make_set(Kind.PRODUCT, factors=factors)


def with_hierarchy(sset, s):
    """Same domain and data degree, kernel of degree ``s``."""
    if s < sset.degree:
        raise ValueError(f"hierarchy level {s} is below the data degree {sset.degree}")
    if sset.kind is Kind.PRODUCT:
        facs = tuple(with_hierarchy(f, max(s, f.degree)) for f in sset.factors)
        return replace(sset, hierarchy_level=s, factors=facs)
    if sset.kind is Kind.DISCRETE:
        return replace(sset, hierarchy_level=s)
    return replace(sset, hierarchy_level=s)


def kernel(sset, x, y):
    """Kernel value k(x, y) for two single points."""
    return float(sset.gram(np.atleast_1d(x), np.atleast_1d(y))[0, 0])


# ---------------------------------------------------------------------------
# dimensions
# ---------------------------------------------------------------------------


def _sphere_dim(d, deg):
    # polynomials of degree <= deg restricted to the sphere in R^(d+1)
    if deg == 0:
        return 1
    return math.comb(d + deg, deg) + math.comb(d + deg - 1, deg - 1)


def _dims_at(kind, d, s, factors=()):
    if kind is Kind.DISCRETE:
        return (d, d, d)
    if kind is Kind.TRIG:
        return ((2 * s + 1) ** d, (4 * s + 1) ** d, (8 * s + 1) ** d)
    if kind in (Kind.SPHERE, Kind.BALL):
        return (_sphere_dim(d, s), _sphere_dim(d, 2 * s), _sphere_dim(d, 4 * s))
    if kind is Kind.BOOLCUBE:
        def count(deg):
            return sum(math.comb(d, i) for i in range(min(deg, d) + 1))
        return (count(s), count(2 * s), count(4 * s))
    m = mp = mpp = 1
    for f in factors:
        a, b, c = dims(f)
        m, mp, mpp = m * a, mp * b, mpp * c
    return (m, mp, mpp)


def dims(sset):
    """Feature-space dimensions ``(m, m', m'')`` at the hierarchy level.

    m is the span of phi, m' the span of phi phi' (degree-2s functions) and
    m'' the span of phi^{(x)4} (degree-4s functions) restricted to the set.
    """
    return _dims_at(sset.kind, sset.d, sset.hierarchy_level, sset.factors)


def numerical_dims(sset, n=None, seed=0, rel_tol=1e-9):
    """Estimate ``(m, m', m'')`` as ranks of k, k^2 and k^4 Gram matrices.

    Used as an independent cross-check of :func:`dims`; ``n`` points are
    drawn at random (not quasi-random) so the estimate does not share the
    sampler with the solvers.
    """
    m, mp, mpp = dims(sset)
    n = n or int(1.5 * mpp) + 10
    X = _random_points(sset, n, np.random.default_rng(seed))
    K = sset.gram(X)
    return tuple(numerical_rank(K**p, rel_tol) for p in (1, 2, 4))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    seed: int
    set: SimpleSet

    def __len__(self):
        return self.points.shape[0]


def _kronecker(n, d, offset):
    alpha = np.array([math.fmod(2.0 ** ((i + 1) / (d + 1)), 1.0) for i in range(d)])
    k = np.arange(1, n + 1, dtype=np.float64)[:, None]
    return np.mod(offset[None, :] + k * alpha[None, :], 1.0)


def _all_vertices(d):
    grid = np.array(np.meshgrid(*([[-1.0, 1.0]] * d), indexing="ij"))
    return grid.reshape(d, -1).T


def _draw(sset, n, rng, replace_ok=False):
    k = sset.kind
    if k is Kind.DISCRETE:
        if replace_ok:
            return rng.integers(0, sset.d, size=(n, 1)).astype(float)
        if n > sset.d:
            raise ValueError(f"cannot draw {n} distinct atoms from {sset.d}")
        return np.arange(n, dtype=float)[:, None]
    if k is Kind.TRIG:
        return _kronecker(n, sset.d, rng.random(sset.d))
    if k in (Kind.SPHERE, Kind.BALL):
        dim = sset.d + 1
        G = rng.standard_normal((n, dim))
        G /= np.linalg.norm(G, axis=1, keepdims=True)
        return G if k is Kind.SPHERE else G[:, : sset.d]
    if k is Kind.BOOLCUBE:
        V = _all_vertices(sset.d)
        if replace_ok:
            return V[rng.integers(0, V.shape[0], size=n)]
        if n > V.shape[0]:
            raise ValueError(f"cannot draw {n} distinct vertices from 2^{sset.d}")
        return V[rng.permutation(V.shape[0])[:n]]
    cols = [_draw(f, n, rng, replace_ok=True) for f in sset.factors]
    return np.hstack(cols)


def _random_points(sset, n, rng):
    if sset.kind is Kind.TRIG:
        return rng.random((n, sset.d))
    if sset.kind is Kind.DISCRETE:
        return np.arange(sset.d, dtype=float)[:, None]
    if sset.kind is Kind.BOOLCUBE:
        return _all_vertices(sset.d)
    if sset.kind is Kind.PRODUCT:
        return np.hstack([_random_points_n(f, n, rng) for f in sset.factors])
    return _draw(sset, n, rng)


def _random_points_n(sset, n, rng):
    if sset.kind is Kind.TRIG:
        return rng.random((n, sset.d))
    return _draw(sset, n, rng, replace_ok=True)


def _prefix_ok(sset, X):
    """Check the leading m, m', m'' points span their feature spaces."""
    m, mp, mpp = dims(sset)
    K = sset.gram(X, check=False)
    for power, size in ((1, m), (2, mp), (4, mpp)):
        if X.shape[0] < size:
            break
        w = eigh(K[:size, :size] ** power)[0]
        if not w[0] > WELL_POSITIONED_TOL * max(w[-1], 1.0):
            return False
    return True


def sample_points(sset, n, seed=0):
    """Deterministic well-positioned points on ``sset``.

    Tori use an additive Kronecker sequence with a seeded offset, spheres
    and balls normalized Gaussian directions, Boolean cubes sampling
    without replacement.  Discrete sets return atoms in index order.  The
    leading m (and, when present, m' and m'') points are checked for
    invertible kernel powers; up to 20 fresh draws are tried.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sset.kind is Kind.DISCRETE:
        X = _draw(sset, n, None)
        return PointSet(X, seed, sset)
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(MAX_RESAMPLE):
        rng = np.random.default_rng(child)
        X = _draw(sset, n, rng)
        if _prefix_ok(sset, X):
            return PointSet(X, seed, sset)
    raise ConditioningError(
        f"could not draw {n} well-positioned points on {sset.kind.value} "
        f"after {MAX_RESAMPLE} attempts"
    )


@lru_cache(maxsize=128)
def _cached_points(sset, n, seed):
    return sample_points(sset, n, seed)


def default_points(sset, seed=0):
    """The m'' well-positioned points used by the relaxations (cached)."""
    return _cached_points(sset, dims(sset)[2], seed)


# ---------------------------------------------------------------------------
# tightness of the pseudo-moment outer approximation
# ---------------------------------------------------------------------------


def moment_relaxation_tight(sset):
    """True when every pseudo-moment matrix is a genuine moment matrix.

    Holds for finite sets, univariate trigonometric polynomials, degree-one
    features on spheres and balls, and Boolean cubes whose features span
    every function on the cube.
    """
    k = sset.kind
    if k is Kind.DISCRETE:
        return True
    if k is Kind.TRIG:
        return sset.d == 1
    if k in (Kind.SPHERE, Kind.BALL):
        return sset.hierarchy_level == 1
    if k is Kind.BOOLCUBE:
        return sset.hierarchy_level >= sset.d
    return False


# ---------------------------------------------------------------------------
# JSON descriptors
# ---------------------------------------------------------------------------


def set_to_json(sset):
    if sset.kind is Kind.PRODUCT:
        return {
            "kind": "product",
            "r": sset.degree,
            "s": sset.hierarchy_level,
            "factors": [set_to_json(f) for f in sset.factors],
        }
    key = "size" if sset.kind is Kind.DISCRETE else "d"
    return {"kind": sset.kind.value, key: sset.d, "r": sset.degree, "s": sset.hierarchy_level}


def set_from_json(obj):
    kind = Kind(obj["kind"])
    r = int(obj.get("r", 1 if kind is not Kind.DISCRETE else 0))
    s = obj.get("s")
    if kind is Kind.PRODUCT:
        facs = [set_from_json(f) for f in obj["factors"]]
        out = make_set(kind, factors=facs, r=r)
        return with_hierarchy(out, int(s)) if s is not None else out
    d = int(obj.get("size", obj.get("d", 1)))
    return make_set(kind, d, r, s=None if s is None else int(s))
