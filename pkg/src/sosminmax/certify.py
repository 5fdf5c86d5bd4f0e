"""Emptiness certificates for {x : |x| <= 1, g_j(x) >= 0 for all j}.

The set is empty iff min_{|x|<=1} max_j -g_j(x) > 0.  When the relaxation
of that min-max is positive, its dual gives SOS polynomials with

    -1 = sum_j g_j(x) [(1 - |x|^2) u_j(x) + v_j(x)] + (1 - |x|^2) u_0(x) + v_0(x)

for every x.  Each SOS is stored as a PSD Gram matrix over an explicit
monomial basis, so verification needs nothing but polynomial evaluation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as cheb
from scipy.stats import qmc

from .matalg import min_eig, smat, svec_basis
from .polynomial import evaluate
from .sdp import SdpProblem, Status, solve
from .simpleset import Kind, dims, lift_ball, make_set

DECISION_MARGIN = 1e-7
PSD_FLOOR = 1e-9
MAX_RESIDUAL = 1e-6
GRAM_PSD_TOL = 1e-8


def monomial_exponents(d, deg):
    """Exponents of total degree <= deg in d variables, graded then lexicographic."""
    out = []
    for total in range(deg + 1):
        for e in itertools.product(range(total, -1, -1), repeat=d):
            if sum(e) == total:
                out.append(e)
    return np.array(out, dtype=np.int64).reshape(-1, d)


def monomials(X, exps):
    X = np.atleast_2d(X)
    return np.prod(X[:, None, :] ** exps[None, :, :], axis=2)


@dataclass
class SosTerm:
    """(1 - |x|^2) r(x)' U r(x) + p(x)' V p(x) over monomial vectors p, r."""

    v_gram: np.ndarray
    v_exps: np.ndarray
    u_gram: np.ndarray
    u_exps: np.ndarray

    def __call__(self, X):
        P = monomials(X, self.v_exps)
        val = np.einsum("ia,ab,ib->i", P, self.v_gram, P)
        if self.u_exps.size:
            R = monomials(X, self.u_exps)
            val += (1.0 - np.sum(X * X, axis=1)) * np.einsum("ia,ab,ib->i", R, self.u_gram, R)
        return val

    def psd_margin(self):
        vals = [min_eig(self.v_gram)]
        if self.u_gram.size:
            vals.append(min_eig(self.u_gram))
        return min(vals)

    def scaled(self, f):
        return SosTerm(self.v_gram * f, self.v_exps, self.u_gram * f, self.u_exps)


@dataclass
class Certificate:
    """Gram matrices for -c = sum_j g_j q_j + q_0 (``terms[0]`` is q_0)."""

    c: float
    terms: list
    degree: int
    d: int
    residual: float = field(default=np.nan)

    @property
    def gram_blocks(self):
        out = []
        for t in self.terms:
            out += [t.v_gram, t.u_gram]
        return out

    def psd_margin(self):
        return min(t.psd_margin() for t in self.terms)

    def to_json(self):
        return {
            "degree": self.degree,
            "d": self.d,
            "c": self.c,
            "residual": self.residual,
            "terms": [
                {
                    "v_gram": t.v_gram.tolist(),
                    "v_exps": t.v_exps.tolist(),
                    "u_gram": t.u_gram.tolist(),
                    "u_exps": t.u_exps.tolist(),
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        d = obj["d"]
        terms = [
            SosTerm(
                np.asarray(t["v_gram"], dtype=float),
                np.asarray(t["v_exps"], dtype=np.int64).reshape(-1, d),
                np.asarray(t["u_gram"], dtype=float).reshape(len(t["u_exps"]), len(t["u_exps"])),
                np.asarray(t["u_exps"], dtype=np.int64).reshape(-1, d),
            )
            for t in obj["terms"]
        ]
        return cls(obj["c"], terms, obj["degree"], d, obj.get("residual", np.nan))


@dataclass
class Undecided:
    """No certificate at this degree; ``value`` is the relaxed min-max."""

    value: float
    status: Status
    note: str = ""


def _svec_dot_rows(F):
    """Rows svec(f f') so that <f f', T> = row . svec(T)."""
    n = F.shape[1]
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return F[:, iu[0]] * F[:, iu[1]] * scale


def _cheb_power_table(deg):
    """C[k, j] = coefficient of x^j in the Chebyshev polynomial T_k."""
    C = np.zeros((deg + 1, deg + 1))
    for k in range(deg + 1):
        c = cheb.cheb2poly(np.eye(deg + 1)[k])
        C[k, : c.size] = c
    return C


def _cheb_to_monomial(exps):
    """M with prod_i T_{a_i}(x_i) = sum_b M[a, b] x^b over one exponent set."""
    n = exps.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    C = _cheb_power_table(int(exps.max()))
    index = {tuple(e): i for i, e in enumerate(exps)}
    M = np.zeros((n, n))
    for i, a in enumerate(exps):
        for b in itertools.product(*[range(ai + 1) for ai in a]):
            M[i, index[b]] = np.prod([C[ai, bi] for ai, bi in zip(a, b)])
    return M


def _cheb_values(X, exps):
    X = np.atleast_2d(X)
    out = np.ones((X.shape[0], exps.shape[0]))
    top = int(exps.max()) if exps.size else 0
    for i in range(X.shape[1]):
        V = cheb.chebvander(X[:, i], top)
        out *= V[:, exps[:, i]]
    return out


def lifted_basis(X, deg, t=None):
    """[T_a(x) for |a| <= deg; t T_b(x) for |b| <= deg - 1] with t^2 = 1 - |x|^2.

    Spans the same functions as degree-``deg`` ball kernel features but stays
    well conditioned at high degree.  ``t`` defaults to the upper lift
    sqrt(1 - |x|^2).
    """
    X = np.atleast_2d(X)
    ev, eu = _basis_split(X.shape[1], deg)
    if t is None:
        t = lift_ball(X)[:, -1]
    parts = [_cheb_values(X, ev)]
    if eu.size:
        parts.append(t[:, None] * _cheb_values(X, eu))
    return np.hstack(parts)


def _collocation(d, n):
    """About n points (x, t) on the unit sphere in R^(d+1), both signs of t.

    On one hemisphere the parts even and odd in t are nearly dependent, so
    an identity that holds there can hide a large odd part; on the whole
    sphere it holds modulo t^2 = 1 - |x|^2 and the odd part vanishes.
    """
    if d == 1:
        theta = 2.0 * np.pi * (np.arange(2 * n) + 0.5) / (2 * n)
        return np.cos(theta)[:, None], np.sin(theta)
    X = ball_grid(n, d)
    t = np.sqrt(np.clip(1.0 - np.sum(X * X, axis=1), 0.0, None))
    return np.vstack([X, X]), np.concatenate([t, -t])


def _build_maxmax(H, B1, B2, B4, margin=None):
    """max c s.t. sum_j h_j q_j - c - q_0 = 0 and sum_j q_j = 1 as functions.

    q_j = b1' T_j b1 and q_0 = b2' A b2 with T_j, A >= 0.  Function identities
    are imposed by projecting point values onto an orthonormal basis of the
    space they live in (spanned by B4 and B2 respectively).

    With ``margin`` the value c is pinned and the program instead maximizes
    the smallest eigenvalue over all Gram blocks, which pulls the solution
    into the interior of the cones.
    """
    n1, n2 = B1.shape[1], B2.shape[1]
    p_ = H.shape[1]
    prob = SdpProblem(sense="max")
    tv = [prob.add_vars(n1 * (n1 + 1) // 2) for _ in range(p_)]
    av = prob.add_vars(n2 * (n2 + 1) // 2)
    cv = prob.add_vars(1, obj=[1.0 if margin is None else 0.0])[0]
    ev = None if margin is None else prob.add_vars(1, obj=[1.0])[0]
    blocks = [(n1, tv[j]) for j in range(p_)] + [(n2, av)]
    for n, vars_ in blocks:
        b = prob.add_block(n)
        for t, (_, _, U, w) in enumerate(svec_basis(n)):
            prob.add_term(b, vars_[t], factors=U, weights=w)
        if ev is not None:
            prob.add_term(b, ev, -np.eye(n))
    if margin is not None:
        prob.add_equality({int(cv): 1.0}, margin)
    R1 = _svec_dot_rows(B1)
    R2 = _svec_dot_rows(B2)
    Q4 = np.linalg.qr(B4)[0]
    Q2 = np.linalg.qr(B2)[0]
    nv = prob.n_vars
    rows = np.zeros((B4.shape[0], nv))
    for j in range(p_):
        rows[:, tv[j]] = H[:, j : j + 1] * R1
    rows[:, av] = -R2
    rows[:, cv] = -1.0
    for r in Q4.T @ rows:
        prob.add_equality(r, 0.0)
    part = np.zeros((B1.shape[0], nv))
    for j in range(p_):
        part[:, tv[j]] = R1
    for r, rhs in zip(Q2.T @ part, Q2.T @ np.ones(B1.shape[0])):
        prob.add_equality(r, rhs)
    return prob, tv, av, cv


def _usable(sol, opts):
    """Optimal, or stalled at a primal-feasible point.

    Only the primal point is used and every certificate is re-verified
    independently, so a stalled dual does not matter.
    """
    if sol.status is Status.OPTIMAL:
        return True
    tol = 10 * opts.get("feas_tol", 1e-8)
    return sol.status in (Status.MAXITER, Status.NUMERICAL_FAILURE) and sol.primal_residual <= tol


def _psd_part(T):
    w, V = sla.eigh(0.5 * (T + T.T), driver="ev")
    return (V * np.clip(w, 0.0, None)) @ V.T


def _basis_split(d, deg):
    """Exponents of the lifted ball basis: x^a (|a| <= deg) and t x^b (|b| <= deg-1)."""
    return monomial_exponents(d, deg), monomial_exponents(d, deg - 1)


def _to_monomial_gram(T, d, deg):
    """Split b' T b into (v, u) Gram matrices over x^a and t x^b.

    The part odd in t vanishes identically for a valid identity (1 - |x|^2
    is not a square), so only the diagonal blocks are kept.
    """
    ev, eu = _basis_split(d, deg)
    nv = ev.shape[0]
    Mv, Mu = _cheb_to_monomial(ev), _cheb_to_monomial(eu)
    V = Mv.T @ T[:nv, :nv] @ Mv
    U = Mu.T @ T[nv:, nv:] @ Mu if eu.size else np.zeros((0, 0))
    return SosTerm(0.5 * (V + V.T), ev, 0.5 * (U + U.T), eu)


def emptiness_certificate(g_list, s=1, *, d=None, **opts):
    """Try to prove {|x| <= 1, g_j(x) >= 0 for all j} is empty at degree s.

    Solves the dual of the relaxed min_x max_j -g_j(x) over degree-s ball
    features.  Returns a :class:`Certificate` (normalized to c = 1) when the
    relaxed value exceeds 1e-7, otherwise :class:`Undecided`.
    """
    if not g_list:
        raise ValueError("need at least one polynomial")
    if d is None:
        d = g_list[0].n_vars
    ball = make_set(Kind.BALL, d, 1, s=s)
    mpp = dims(ball)[2]
    X, t = _collocation(d, 3 * mpp)
    B1, B2, B4 = (lifted_basis(X, k, t) for k in (s, 2 * s, 4 * s))
    H = -np.column_stack([evaluate(g, X) for g in g_list])
    prob, tv, av, cv = _build_maxmax(H, B1, B2, B4)
    sol = solve(prob, **opts)
    if not _usable(sol, opts):
        return Undecided(float(sol.objective), sol.status, "solver did not converge")
    value = float(sol.objective)
    if value <= DECISION_MARGIN:
        return Undecided(value, sol.status)
    # the maximizer sits on the boundary of the cones; giving up half the
    # margin buys Gram matrices that stay PSD through the polishing below
    inner, tv, av, cv = _build_maxmax(H, B1, B2, B4, margin=0.5 * value)
    centred = solve(inner, **opts)
    if _usable(centred, opts):
        sol = centred
    else:
        prob, tv, av, cv = _build_maxmax(H, B1, B2, B4)

    # polish: exact PSD multipliers, then re-fit q_0 so the identity is exact
    n1, n2 = B1.shape[1], B2.shape[1]
    Ts = [_psd_part(smat(sol.x[v], n1)) for v in tv]
    c = float(sol.x[cv])
    f = np.sum(H * np.einsum("ia,jab,ib->ij", B1, np.array(Ts), B1), axis=1) - c
    Q4 = np.linalg.qr(B4)[0]
    R2 = Q4.T @ _svec_dot_rows(B2)
    a0 = sol.x[av]
    a = a0 + np.linalg.lstsq(R2, Q4.T @ f - R2 @ a0, rcond=None)[0]
    A = smat(a, n2)
    if min_eig(A) < -PSD_FLOOR or c <= DECISION_MARGIN:
        return Undecided(value, sol.status, "margin lost while polishing")

    terms = [_to_monomial_gram(A, d, 2 * s)]
    terms += [_to_monomial_gram(T, d, s) for T in Ts]
    cert = normalize(Certificate(c, terms, s, d))
    cert.residual = verify_certificate(cert, g_list, 1000)
    if cert.residual > MAX_RESIDUAL or cert.psd_margin() < -GRAM_PSD_TOL:
        return Undecided(value, sol.status, "certificate failed verification")
    return cert


def normalize(cert: Certificate):
    """Divide every Gram matrix by c so the certificate reads -1 = ..."""
    f = 1.0 / cert.c
    return Certificate(1.0, [t.scaled(f) for t in cert.terms], cert.degree, cert.d, cert.residual)


def ball_grid(n, d):
    """Deterministic low-discrepancy points in the closed unit ball."""
    if d == 1:
        return np.linspace(-1.0, 1.0, n)[:, None]
    sampler = qmc.Halton(d, scramble=False)
    out = []
    have = 0
    while have < n:
        P = 2.0 * sampler.random(2 * n) - 1.0
        P = P[np.sum(P * P, axis=1) <= 1.0]
        out.append(P)
        have += P.shape[0]
    return np.vstack(out)[:n]


def verify_certificate(cert: Certificate, g_list, grid_n=1000):
    """Max violation of the certificate identity on a ball grid.

    Evaluates the polynomials and Gram quadratic forms directly; PSD-ness
    of the Gram matrices is checked separately by ``cert.psd_margin()``.
    """
    if not g_list:
        raise ValueError("need at least one polynomial")
    if len(g_list) != len(cert.terms) - 1:
        raise ValueError("certificate and polynomial counts differ")
    X = ball_grid(grid_n, cert.d)
    rhs = cert.terms[0](X)
    for g, t in zip(g_list, cert.terms[1:]):
        rhs = rhs + evaluate(g, X) * t(X)
    return float(np.max(np.abs(rhs / cert.c + 1.0)))
