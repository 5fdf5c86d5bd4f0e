"""Dense primal-dual interior-point solver for linear matrix inequalities.

Problems are stated over free scalar variables x:

    minimize (or maximize)  c'x
    subject to              F_b(x) = F_b0 + sum_k x_k F_bk  >= 0   (PSD, each block b)
                            A x = b

The conic dual, used for certificates, is

    maximize  -sum_b <F_b0, Z_b> + b'y
    subject to sum_b <F_bk, Z_b> + (A'y)_k = c_k,   Z_b >= 0

(for a maximization the internal objective is -c, so the identity above
holds with -c).  The gap between the two objectives equals sum_b <S_b, Z_b>
with S_b = F_b(x).

Coefficient matrices are stored as low-rank factors F = U diag(w) U', which
makes the Schur complement cheap when every coefficient is rank one or two,
as is the case for kernelized relaxations.  Iterations follow the
Nesterov-Todd direction with Mehrotra's predictor-corrector.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import dsytrf, dsytrs

from . import _accel
from .matalg import eigh, sym

FACTOR_DROP_TOL = 1e-14
STEP_FRACTION = 0.98
RAY_TOL = 1e-8


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAXITER = "MaxIter"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class _Block:
    order: int
    const: np.ndarray
    terms: list = field(default_factory=list)  # (var, U, w)


def factor_symmetric(F, drop_tol=FACTOR_DROP_TOL):
    """Low-rank factors ``(U, w)`` with ``F = U diag(w) U'``."""
    F = sym(F, tol=1e-10)
    lam, V = eigh(F)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    keep = np.abs(lam) > drop_tol * max(scale, 1e-300)
    return V[:, keep], lam[keep]


class SdpProblem:
    """Builder for an LMI-form semidefinite program.

    Examples
    --------
    Smallest eigenvalue of ``C`` as ``max t  s.t.  C - t I >= 0``:

    >>> p = SdpProblem(sense="max")
    >>> t = p.add_vars(1, obj=[1.0])[0]
    >>> b = p.add_block(2, const=np.diag([1.0, 2.0]))
    >>> p.add_term(b, t, -np.eye(2))
    >>> round(solve(p).objective, 6)
    1.0
    """

    def __init__(self, n_vars=0, sense="min"):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
        self.sense = sense
        self.c = np.zeros(n_vars)
        self.blocks: list[_Block] = []
        self.eq_rows: list[dict] = []
        self.eq_rhs: list[float] = []

    # -- building ----------------------------------------------------------

    @property
    def n_vars(self):
        return self.c.size

    def add_vars(self, k, obj=None):
        """Append ``k`` free variables and return their indices."""
        start = self.c.size
        extra = np.zeros(k) if obj is None else np.asarray(obj, dtype=np.float64)
        if extra.shape != (k,):
            raise ValueError("objective length does not match variable count")
        self.c = np.concatenate([self.c, extra])
        return np.arange(start, start + k)

    def set_objective(self, var, value):
        self.c[var] = value

    def add_block(self, order, const=None):
        if order < 1:
            raise ValueError("block order must be positive")
        C = np.zeros((order, order)) if const is None else sym(const, tol=1e-10)
        if C.shape != (order, order):
            raise ValueError(f"constant has shape {C.shape}, expected {(order, order)}")
        self.blocks.append(_Block(order, C))
        return len(self.blocks) - 1

    def add_term(self, block, var, coef=None, *, factors=None, weights=None):
        """Add ``x_var * F`` to a block.

        Give either a dense symmetric ``coef`` or ``factors`` U (n, r) with
        ``weights`` w (r,) meaning F = U diag(w) U'.
        """
        blk = self.blocks[block]
        if not 0 <= var < self.n_vars:
            raise IndexError(f"variable {var} out of range")
        if coef is not None:
            U, w = factor_symmetric(coef)
        else:
            U = np.asarray(factors, dtype=np.float64)
            if U.ndim == 1:
                U = U[:, None]
            w = np.ones(U.shape[1]) if weights is None else np.asarray(weights, dtype=np.float64)
        if U.shape[0] != blk.order or w.shape != (U.shape[1],):
            raise ValueError("factor shape does not match block order")
        if U.shape[1]:
            blk.terms.append((int(var), U, w))

    def add_equality(self, coeffs, rhs):
        """Add ``sum_k coeffs[k] x_k = rhs``; ``coeffs`` is a dict or dense row."""
        if isinstance(coeffs, dict):
            row = {int(k): float(v) for k, v in coeffs.items() if v != 0}
        else:
            a = np.asarray(coeffs, dtype=np.float64)
            row = {int(k): float(a[k]) for k in np.flatnonzero(a)}
        self.eq_rows.append(row)
        self.eq_rhs.append(float(rhs))

    # -- views -------------------------------------------------------------

    def eq_matrix(self):
        A = np.zeros((len(self.eq_rows), self.n_vars))
        for i, row in enumerate(self.eq_rows):
            for k, v in row.items():
                A[i, k] += v
        return A, np.asarray(self.eq_rhs, dtype=np.float64)

    def coef_matrix(self, block, var):
        blk = self.blocks[block]
        F = np.zeros((blk.order, blk.order))
        for k, U, w in blk.terms:
            if k == var:
                F += (U * w) @ U.T
        return F

    def evaluate(self, x):
        """Block matrices F_b(x)."""
        x = np.asarray(x, dtype=np.float64)
        out = []
        for blk in self.blocks:
            S = blk.const.copy()
            for k, U, w in blk.terms:
                S += (U * (w * x[k])) @ U.T
            out.append(S)
        return out

    def copy(self):
        q = SdpProblem(0, self.sense)
        q.c = self.c.copy()
        q.blocks = [_Block(b.order, b.const.copy(), list(b.terms)) for b in self.blocks]
        q.eq_rows = [dict(r) for r in self.eq_rows]
        q.eq_rhs = list(self.eq_rhs)
        return q

    def to_json(self):
        """Plain-JSON dump: ``{"blocks": [...], "eq": [...], "obj": [...]}``.

        Each block lists its constant and, per term, the variable index,
        factor matrix and weights.
        """
        blocks = [
            {
                "order": b.order,
                "const": b.const.tolist(),
                "terms": [
                    {"var": k, "factors": U.tolist(), "weights": w.tolist()}
                    for k, U, w in b.terms
                ],
            }
            for b in self.blocks
        ]
        eq = [
            {"coeffs": {str(k): v for k, v in row.items()}, "rhs": r}
            for row, r in zip(self.eq_rows, self.eq_rhs)
        ]
        return {"sense": self.sense, "blocks": blocks, "eq": eq, "obj": self.c.tolist()}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        p = cls(len(obj["obj"]), obj.get("sense", "min"))
        p.c = np.asarray(obj["obj"], dtype=np.float64)
        for b in obj["blocks"]:
            bi = p.add_block(b["order"], np.asarray(b["const"]))
            for t in b["terms"]:
                p.add_term(bi, t["var"], factors=np.asarray(t["factors"]).reshape(b["order"], -1),
                           weights=t["weights"])
        for e in obj["eq"]:
            p.add_equality({int(k): v for k, v in e["coeffs"].items()}, e["rhs"])
        return p


@dataclass
class SdpSolution:
    """Result of :func:`solve`.

    ``slacks`` are the PSD blocks F_b(x) and ``block_duals`` the dual PSD
    matrices Z_b; ``y`` are the equality multipliers, ordered like the
    equalities of the problem (rows dropped in presolve get zero).
    """

    status: Status
    x: np.ndarray
    slacks: list
    block_duals: list
    y: np.ndarray
    objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int

    @property
    def block_primal(self):
        return self.slacks

    @property
    def ok(self):
        return self.status is Status.OPTIMAL


# ---------------------------------------------------------------------------
# solver internals
# ---------------------------------------------------------------------------


class _Compiled:
    """Factor columns of each block grouped by variable."""

    def __init__(self, p: SdpProblem):
        self.n = p.n_vars
        self.orders = [b.order for b in p.blocks]
        self.consts = [b.const for b in p.blocks]
        self.U, self.w, self.col_var, self.vars, self.ptr = [], [], [], [], []
        for b in p.blocks:
            if not b.terms:
                self.U.append(np.zeros((b.order, 0)))
                self.w.append(np.zeros(0))
                self.col_var.append(np.zeros(0, dtype=np.int64))
                self.vars.append(np.zeros(0, dtype=np.int64))
                self.ptr.append(np.zeros(1, dtype=np.int64))
                continue
            order = sorted(range(len(b.terms)), key=lambda i: b.terms[i][0])
            U = np.hstack([b.terms[i][1] for i in order])
            w = np.concatenate([b.terms[i][2] for i in order])
            cv = np.concatenate(
                [np.full(b.terms[i][1].shape[1], b.terms[i][0], dtype=np.int64) for i in order]
            )
            vars_, first = np.unique(cv, return_index=True)
            self.U.append(np.ascontiguousarray(U))
            self.w.append(w)
            self.col_var.append(cv)
            self.vars.append(vars_)
            self.ptr.append(np.append(first, cv.size).astype(np.int64))

    def apply(self, b, x, U=None):
        """sum_k x_k F_bk, optionally with scaled factors ``U``."""
        U = self.U[b] if U is None else U
        return (U * (self.w[b] * x[self.col_var[b]])) @ U.T

    def adjoint(self, b, Y, U=None):
        """(<F_bk, Y>)_k as a length-n vector."""
        U = self.U[b] if U is None else U
        vals = np.einsum("ia,ia->a", Y @ U, U) * self.w[b]
        return np.bincount(self.col_var[b], weights=vals, minlength=self.n)

    def schur(self, b, Ut, M):
        if not self.vars[b].size:
            return
        Q = np.ascontiguousarray(Ut.T @ Ut)
        blk = _accel.schur_lowrank(Q, self.ptr[b], np.ascontiguousarray(self.w[b]))
        idx = self.vars[b]
        if idx.size == self.n:
            M += blk
        else:
            M[np.ix_(idx, idx)] += blk


class _KKT:
    """Solver for  M dx - A' dy = h,  A dx = r.

    Variables absent from every PSD block leave zero rows in M; those are
    handled by adding rho A'A to M, which leaves the solution unchanged
    because A dx = r.  The reduced system is then solved with Cholesky
    factors of M and of A M^-1 A', falling back to a symmetric-indefinite
    factorization of the full saddle-point matrix.  Two rounds of iterative
    refinement against the original system keep the dual residual small as
    M becomes ill-conditioned near the optimum.
    """

    def __init__(self, M, A, refine_steps=2):
        n, neq = M.shape[0], A.shape[0]
        self.n, self.M, self.A, self.refine_steps = n, M, A, refine_steps
        dM = np.diag(M).copy() if n else np.zeros(0)
        scale = max(1.0, float(dM.max())) if n else 1.0
        self.rho = 0.0
        if neq and np.any(dM <= 1e-12 * scale):
            self.rho = scale / max(1.0, float(np.max(np.sum(A * A, axis=0))))
        Mr = M + self.rho * (A.T @ A) if self.rho else M.copy()
        Mr[np.arange(n), np.arange(n)] += 1e-14 * scale
        try:
            self.cm = sla.cho_factor(Mr, lower=True, check_finite=False)
            if neq:
                self.MiAt = sla.cho_solve(self.cm, A.T, check_finite=False)
                self.cs = sla.cho_factor(A @ self.MiAt, lower=True, check_finite=False)
            self.mode = "chol"
        except (np.linalg.LinAlgError, sla.LinAlgError):
            K = np.zeros((n + neq, n + neq))
            K[:n, :n] = M
            K[:n, n:] = A.T
            K[n:, :n] = A
            self.ldu, self.ipiv, info = dsytrf(K, lower=1)
            if info != 0:
                raise np.linalg.LinAlgError("singular Newton system")
            self.mode = "ldl"

    def _solve_once(self, h, r):
        if self.mode == "chol":
            if self.rho:
                h = h + self.rho * (self.A.T @ r)
            dx0 = sla.cho_solve(self.cm, h, check_finite=False)
            if not r.size:
                return dx0, np.zeros(0)
            dy = sla.cho_solve(self.cs, r - self.A @ dx0, check_finite=False)
            return dx0 + self.MiAt @ dy, dy
        sol, _ = dsytrs(self.ldu, self.ipiv, np.concatenate([h, r]), lower=1)
        return sol[: self.n], -sol[self.n :]

    def solve(self, h, r):
        dx, dy = self._solve_once(h, r)
        for _ in range(self.refine_steps):
            rh = h - (self.M @ dx - self.A.T @ dy)
            rr = r - self.A @ dx
            ex, ey = self._solve_once(rh, rr)
            dx, dy = dx + ex, dy + ey
        return dx, dy


def _presolve_equalities(A, b, tol=1e-10):
    """Drop dependent rows; return (A, b, kept_rows) or None if inconsistent."""
    if A.shape[0] == 0:
        return A, b, np.zeros(0, dtype=np.int64)
    Q, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1e-300))) if diag.size else 0
    keep = np.sort(piv[:rank])
    A2, b2 = A[keep], b[keep]
    if rank < A.shape[0]:
        xls = np.linalg.lstsq(A2, b2, rcond=None)[0]
        res = np.abs(A @ xls - b)
        if np.max(res) > 1e-8 * (1.0 + np.max(np.abs(b))):
            return None
    return A2, b2, keep


def _max_step(D, dT):
    """Largest a <= 1/STEP_FRACTION with diag(D) + a dT PSD (D > 0 diagonal)."""
    s = 1.0 / np.sqrt(D)
    lam = sla.eigvalsh(dT * np.outer(s, s), driver="ev")[0]
    if lam >= 0:
        return np.inf
    return -1.0 / lam


def _nt_scaling(S, Z):
    """NT scaling matrix G with G^-1 S G^-T = G' Z G = diag(d)."""
    Ls = np.linalg.cholesky(S)
    Lz = np.linalg.cholesky(Z)
    U, d, Vt = np.linalg.svd(Lz.T @ Ls)
    G = Ls @ (Vt.T / np.sqrt(d))
    Ginv = (U.T / np.sqrt(d)[:, None]) @ Lz.T
    return G, Ginv, d


def solve(p: SdpProblem, gap_tol=1e-8, feas_tol=1e-8, max_iter=200, verbose=False):
    """Solve an LMI-form SDP by a primal-dual interior-point method.

    Parameters
    ----------
    p : SdpProblem
    gap_tol : float
        Target for sum_b <S_b, Z_b> / (1 + |objective|).
    feas_tol : float
        Target for the relative primal and dual residuals.
    max_iter : int

    Returns
    -------
    SdpSolution
    """
    if not p.blocks and not p.eq_rows:
        raise ValueError("problem has neither PSD blocks nor equalities")
    sign = 1.0 if p.sense == "min" else -1.0
    c = sign * p.c
    n = p.n_vars
    A_full, b_full = p.eq_matrix()
    pre = _presolve_equalities(A_full, b_full)
    cp = _Compiled(p)
    nb = len(cp.orders)

    def result(status, x, S, Z, y, it, pinf=np.nan, dinf=np.nan):
        yfull = np.zeros(len(p.eq_rows))
        if y is not None and pre is not None:
            yfull[pre[2]] = y
        pobj = float(c @ x)
        dobj = (
            -sum(float(np.sum(F0 * Zb)) for F0, Zb in zip(cp.consts, Z))
            + (float(pre[1] @ y) if pre is not None and y is not None else 0.0)
        )
        gap = sum(float(np.sum(Sb * Zb)) for Sb, Zb in zip(S, Z))
        return SdpSolution(
            status, x, [0.5 * (Sb + Sb.T) for Sb in S], [0.5 * (Zb + Zb.T) for Zb in Z],
            yfull, sign * pobj, sign * dobj, gap / (1.0 + abs(pobj)), pinf, dinf, it,
        )

    if pre is None:
        x0 = np.zeros(n)
        return result(Status.INFEASIBLE, x0, p.evaluate(x0), [np.zeros((o, o)) for o in cp.orders],
                      None, 0)
    A, b, _ = pre
    neq = A.shape[0]

    # -- initial point --------------------------------------------------
    x = np.zeros(n)
    y = np.zeros(neq)
    S, Z = [], []
    for bi, order in enumerate(cp.orders):
        fn = [np.linalg.norm(cp.consts[bi])]
        colnorm = np.zeros(n)
        if cp.vars[bi].size:
            # Frobenius norm of each F_bk from its factors
            for k in cp.vars[bi]:
                sl = slice(cp.ptr[bi][np.searchsorted(cp.vars[bi], k)],
                           cp.ptr[bi][np.searchsorted(cp.vars[bi], k) + 1])
                Uk, wk = cp.U[bi][:, sl], cp.w[bi][sl]
                colnorm[k] = np.linalg.norm((Uk * wk) @ Uk.T)
            fn.append(colnorm.max())
        eta = max(10.0, np.sqrt(order), max(fn))
        active = colnorm > 0
        zeta = max(10.0, np.sqrt(order))
        if np.any(active):
            zeta = max(zeta, order * np.max((1.0 + np.abs(c[active])) / (1.0 + colnorm[active])))
        S.append(eta * np.eye(order))
        Z.append(zeta * np.eye(order))

    ntot = sum(cp.orders)
    norm_F0 = np.sqrt(sum(np.linalg.norm(C) ** 2 for C in cp.consts))
    norm_b = np.linalg.norm(b)
    norm_c = np.linalg.norm(c)
    it = 0
    status = Status.MAXITER
    best = (np.inf,)
    pinf = dinf = np.inf

    for it in range(1, max_iter + 1):
        # residuals
        Rp = [cp.consts[bi] + cp.apply(bi, x) - S[bi] for bi in range(nb)]
        ATy = A.T @ y if neq else np.zeros(n)
        AZ = sum((cp.adjoint(bi, Z[bi]) for bi in range(nb)), np.zeros(n))
        rd = c - AZ - ATy
        req = b - A @ x if neq else np.zeros(0)
        pinf = (np.sqrt(sum(np.linalg.norm(R) ** 2 for R in Rp)) + np.linalg.norm(req)) / (
            1.0 + norm_F0 + norm_b
        )
        dinf = np.linalg.norm(rd) / (1.0 + norm_c)
        pobj = float(c @ x)
        dobj = -sum(float(np.sum(cp.consts[bi] * Z[bi])) for bi in range(nb)) + float(b @ y)
        comp = sum(float(np.sum(S[bi] * Z[bi])) for bi in range(nb))
        if verbose:
            print(f"{it:3d} p={pobj:+.9e} d={dobj:+.9e} gap={comp:.2e} pinf={pinf:.2e} dinf={dinf:.2e}")
        if comp <= gap_tol * (1.0 + abs(pobj)) and pinf <= feas_tol and dinf <= feas_tol:
            status = Status.OPTIMAL
            break
        merit = max(comp / (gap_tol * (1.0 + abs(pobj))), pinf / feas_tol, dinf / feas_tol)
        if merit < best[0]:
            best = (merit, it, x.copy(), y.copy(), [a.copy() for a in S], [a.copy() for a in Z],
                    pinf, dinf)
        # (Z, y) approaches a dual ray once the dual objective dwarfs c,
        # x a primal ray once -c'x dwarfs the constant data
        if dobj > 0 and np.linalg.norm(AZ + ATy) <= RAY_TOL * dobj:
            status = Status.INFEASIBLE
            break
        if pobj < 0 and norm_F0 + norm_b + pinf * (1.0 + norm_F0 + norm_b) <= RAY_TOL * -pobj:
            status = Status.UNBOUNDED
            break
        mu = comp / ntot if ntot else 0.0

        # scaling
        try:
            scal = [_nt_scaling(S[bi], Z[bi]) for bi in range(nb)]
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL_FAILURE
            break
        Ut, Rt, Dg = [], [], []
        M = np.zeros((n, n))
        for bi, (G, Ginv, d) in enumerate(scal):
            U_s = Ginv @ cp.U[bi]
            Ut.append(U_s)
            Rt.append(Ginv @ Rp[bi] @ Ginv.T)
            Dg.append(d)
            cp.schur(bi, U_s, M)
        try:
            kkt = _KKT(M, A)
        except np.linalg.LinAlgError:
            status = Status.NUMERICAL_FAILURE
            break

        def direction(Xs):
            h = -rd.copy()
            for bi in range(nb):
                h += cp.adjoint(bi, Xs[bi] - Rt[bi], Ut[bi])
            dx, dy = kkt.solve(h, req)
            dS = [cp.apply(bi, dx, Ut[bi]) + Rt[bi] for bi in range(nb)]
            dZ = [Xs[bi] - dS[bi] for bi in range(nb)]
            return dx, dy, dS, dZ

        def steps(dS, dZ):
            ap = ad = 1.0 / STEP_FRACTION
            for bi in range(nb):
                ap = min(ap, _max_step(Dg[bi], dS[bi]))
                ad = min(ad, _max_step(Dg[bi], dZ[bi]))
            return min(1.0, STEP_FRACTION * ap), min(1.0, STEP_FRACTION * ad)

        # predictor
        Xa = [-np.diag(d) for d in Dg]
        dxa, dya, dSa, dZa = direction(Xa)
        if not np.all(np.isfinite(dxa)):
            status = Status.NUMERICAL_FAILURE
            break
        apa, ada = steps(dSa, dZa)
        mu_aff = sum(
            float(np.sum((np.diag(Dg[bi]) + apa * dSa[bi]) * (np.diag(Dg[bi]) + ada * dZa[bi])))
            for bi in range(nb)
        ) / max(ntot, 1)
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0

        # corrector
        Xc = []
        for bi in range(nb):
            d = Dg[bi]
            cross = dSa[bi] @ dZa[bi]
            R = sigma * mu * np.eye(d.size) - np.diag(d * d) - 0.5 * (cross + cross.T)
            Xc.append(2.0 * R / (d[:, None] + d[None, :]))
        dx, dy, dSt, dZt = direction(Xc)
        if not np.all(np.isfinite(dx)):
            status = Status.NUMERICAL_FAILURE
            break
        ap, ad = steps(dSt, dZt)
        if max(ap, ad) < 1e-10:
            status = Status.NUMERICAL_FAILURE
            break
        x = x + ap * dx
        y = y + ad * dy
        for bi, (G, Ginv, d) in enumerate(scal):
            S[bi] = S[bi] + ap * (G @ dSt[bi] @ G.T)
            S[bi] = 0.5 * (S[bi] + S[bi].T)
            Zup = Ginv.T @ dZt[bi] @ Ginv
            Z[bi] = Z[bi] + ad * 0.5 * (Zup + Zup.T)

    if status in (Status.MAXITER, Status.NUMERICAL_FAILURE) and len(best) > 1:
        # report the least-violating iterate seen
        _, _, x, y, S, Z, pinf, dinf = best
    return result(status, x, S, Z, y, it, pinf, dinf)


REFINE_BAND = 1e-7


def refine_rank_one(
    p: SdpProblem,
    sol: SdpSolution,
    seed=0,
    *,
    moment_block=None,
    random_vars=None,
    band=REFINE_BAND,
    rank_tol=1e-6,
    **opts,
):
    """Move to a generic point of the optimal face.

    Re-solves ``p`` with the objective pinned to ``sol.objective`` (two
    one-by-one blocks forming a band of half-width ``band``, widened to the
    achieved duality gap if that is larger) and a seeded random linear
    objective over ``random_vars`` (default: all variables).  A random
    linear function is minimized at an extreme point of the face, which
    generically gives a rank-one moment block.

    If ``moment_block`` is given and already numerically rank one, ``sol``
    is returned unchanged.  Dual quantities of the result are those of
    ``sol``; only the primal point moves.  A banded solve that stalls is
    still used when its point is feasible and inside the band; otherwise
    ``sol`` is returned with status MaxIter.
    """
    if sol.status is not Status.OPTIMAL:
        raise ValueError("refinement needs an optimal solution")
    if moment_block is not None:
        w = sla.eigvalsh(sol.slacks[moment_block], driver="ev")
        if w.size < 2 or w[-2] <= rank_tol * max(w[-1], 1e-300):
            return sol
    obj = sol.objective
    width = max(band, abs(sol.objective - sol.dual_objective))
    q = p.copy()
    nz = np.flatnonzero(p.c)
    lo = q.add_block(1, const=[[-(obj - width)]])
    hi = q.add_block(1, const=[[obj + width]])
    for k in nz:
        q.add_term(lo, k, factors=np.ones((1, 1)), weights=[p.c[k]])
        q.add_term(hi, k, factors=np.ones((1, 1)), weights=[-p.c[k]])
    idx = np.arange(p.n_vars) if random_vars is None else np.asarray(random_vars)
    rng = np.random.default_rng(seed)
    q.sense = "min"
    q.c = np.zeros(p.n_vars)
    q.c[idx] = rng.standard_normal(idx.size)
    r = solve(q, **opts)
    new_obj = float(p.c @ r.x)
    # only the primal point is used: a stalled dual on the thin band is
    # harmless as long as the point is feasible and inside the band
    feas_tol = opts.get("feas_tol", 1e-8)
    usable = r.status is Status.OPTIMAL or (
        r.status in (Status.NUMERICAL_FAILURE, Status.MAXITER)
        and r.primal_residual <= 10 * feas_tol
        and abs(new_obj - obj) <= width + feas_tol
    )
    if not usable:
        return replace(sol, status=Status.MAXITER)
    return SdpSolution(
        Status.OPTIMAL,
        r.x,
        r.slacks[:-2],
        sol.block_duals,
        sol.y,
        new_obj,
        sol.dual_objective,
        abs(new_obj - sol.dual_objective) / (1.0 + abs(new_obj)),
        r.primal_residual,
        sol.dual_residual,
        sol.iterations + r.iterations,
    )

