"""One-stage primal-dual SOS relaxations of min_x max_y g(x, y).

The outer minimization runs over pseudo-moments of phi(x)^(x)4, written as
sum_i alpha_i phi(x_i)^(x)4 at m'' sample points; the inner maximization is
replaced by a matrix-SOS map x -> V(x) whose coefficients appear as the
duals of the PSD constraints.  For a finite Y = {1..p} the map is diagonal
with entries v_j(x) = phi~(x)' T_j phi~(x), a partition of unity.

Also provided: the two-stage baseline (fit an upper-bounding polynomial of
minimal mean, then minimize it) and its alternating variant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .matalg import empirical_features, features_from_gram, inv_sqrt, svec, svec_basis
from .polynomial import Tabulated, evaluate
from .sdp import SdpProblem, SdpSolution, Status, refine_rank_one, solve
from .simpleset import (
    SimpleSet,
    dims,
    moment_relaxation_tight,
    sample_points,
)
from .sosmin import extract_point, moment_rank, solve_min

TIGHT_TOL = 1e-6


class BoundStatus(str, enum.Enum):
    LOWER = "LowerBound"
    TIGHT = "Tight"
    UPPER = "UpperBound"
    UNKNOWN = "Unknown"


@dataclass
class BilinearObjective:
    """g(x, y) over X times Y.

    For a finite Y give ``g_list`` (one function of x per element of Y);
    otherwise give ``set_y`` and a function ``g`` of the concatenated
    coordinates (x, y).
    """

    set_x: SimpleSet
    set_y: SimpleSet | None = None
    g: object = None
    g_list: list | None = None

    def __post_init__(self):
        if (self.g_list is None) == (self.g is None):
            raise ValueError("give exactly one of g_list (finite Y) or g")
        if self.g is not None and self.set_y is None:
            raise ValueError("a general objective needs set_y")
        if self.g_list is not None and not self.g_list:
            raise ValueError("g_list is empty")

    @property
    def finite(self):
        return self.g_list is not None

    @property
    def p(self):
        return len(self.g_list) if self.finite else dims(self.set_y)[0]

    def y_tight(self):
        return self.finite or moment_relaxation_tight(self.set_y)

    def eval_table(self, X, Y=None):
        """Matrix of g(x_i, y_j)."""
        if self.finite:
            return np.column_stack([evaluate(gj, X) for gj in self.g_list])
        nx, ny = X.shape[0], Y.shape[0]
        XY = np.hstack([np.repeat(X, ny, axis=0), np.tile(Y, (nx, 1))])
        return np.asarray(self.g(XY), dtype=np.float64).reshape(nx, ny)

    def max_over_y(self, X, seed=0):
        """Inner maximum at the rows of X (enumeration or a Y relaxation)."""
        X = np.atleast_2d(X)
        if self.finite:
            return self.eval_table(X).max(axis=1)
        out = np.empty(X.shape[0])
        for i, x in enumerate(X):
            neg = Tabulated(
                lambda Y, x=x: -self.g(np.hstack([np.repeat(x[None, :], Y.shape[0], 0), Y])),
                n_vars=self.set_y.ambient_dim,
            )
            out[i] = -solve_min(self.set_y, neg, seed).value
        return out

    def shifted(self, c=0.0, scale=1.0):
        """The objective scale * g + c."""
        if self.finite:
            gl = [
                Tabulated(lambda X, gj=gj: scale * evaluate(gj, X) + c, n_vars=self.set_x.ambient_dim)
                for gj in self.g_list
            ]
            return BilinearObjective(self.set_x, g_list=gl)
        return BilinearObjective(
            self.set_x, self.set_y, g=lambda XY: scale * np.asarray(self.g(XY)) + c
        )


@dataclass
class _Layout:
    alpha: np.ndarray
    lam: np.ndarray
    dual_blocks: list
    moment_block: int
    dvars: np.ndarray | None = None


@dataclass
class MinMaxResult:
    value: float
    alpha: np.ndarray
    lam: np.ndarray
    dual_blocks: list
    x_star: np.ndarray
    bound_status: BoundStatus
    status: Status
    moment_rank: int
    points: np.ndarray
    anchor_inv_sqrt: np.ndarray
    set_x: SimpleSet
    finite: bool
    points_y: np.ndarray | None = None
    solution: SdpSolution | None = field(default=None, repr=False)

    @property
    def ok(self):
        return self.status is Status.OPTIMAL

    def features(self, X):
        """Empirical features phi~(x) in the basis used by the dual blocks."""
        m = self.anchor_inv_sqrt.shape[0]
        return self.set_x.gram(X, self.points[:m]) @ self.anchor_inv_sqrt


# ---------------------------------------------------------------------------
# kernelized pieces
# ---------------------------------------------------------------------------


def _kernel_pieces(sset, X):
    """Features Phi (n, m), squared-kernel features Phi2 (n, m') and N."""
    m, mp, _ = dims(sset)
    Phi = empirical_features(sset, X, m)
    L2 = sset.gram(X, X[:mp]) ** 2
    Phi2 = features_from_gram(L2, L2[:mp])
    return Phi, Phi2


def interpolation_matrix(sset, X):
    """N with phi(x_k) phi(x_k)' = sum_i N_ik phi(x_i) phi(x_i)' (i < m').

    Inner products of the rank-one matrices are squared kernel values, so
    N = (K' o K')^-1 (K'' o K'') with K' the kernel matrix of the first m'
    points and K'' between those and all points.
    """
    mp = dims(sset)[1]
    Kpp = sset.gram(X[:mp], X) ** 2
    return sla.solve(Kpp[:, :mp], Kpp, assume_a="pos")


def build_primal_dual_finite(set_x: SimpleSet, g_list, pts, G=None):
    """SDP of the one-stage relaxation for a finite Y.

    minimize sum_i lambda_i subject to, for every j,
    sum_i lambda_i phi~_i phi~_i' - sum_k alpha_k g_j(x_k) phi~_k phi~_k' >= 0,
    sum_k alpha_k = 1 and Phi2' diag(alpha) Phi2 >= 0.
    """
    X = getattr(pts, "points", pts)
    m, mp, mpp = dims(set_x)
    if X.shape[0] < mpp:
        raise ValueError(f"need {mpp} points, got {X.shape[0]}")
    X = X[:mpp]
    if G is None:
        G = np.column_stack([evaluate(gj, X) for gj in g_list])
    Phi, Phi2 = _kernel_pieces(set_x, X)
    p = SdpProblem(sense="min")
    alpha = p.add_vars(mpp)
    lam = p.add_vars(mp, obj=np.ones(mp))
    blocks = []
    for j in range(G.shape[1]):
        b = p.add_block(m)
        blocks.append(b)
        for i in range(mp):
            p.add_term(b, lam[i], factors=Phi[i][:, None])
        for k in range(mpp):
            if G[k, j] != 0.0:
                p.add_term(b, alpha[k], factors=Phi[k][:, None], weights=[-G[k, j]])
    mb = p.add_block(mp)
    for k in range(mpp):
        p.add_term(mb, alpha[k], factors=Phi2[k][:, None])
    p.add_equality({int(k): 1.0 for k in alpha}, 1.0)
    p.meta = _Layout(alpha, lam, blocks, mb)
    return p


def build_primal_dual(set_x: SimpleSet, set_y: SimpleSet, g, ptsX, ptsY, G=None):
    """SDP of the one-stage relaxation for a general simple set Y.

    Variables: alpha (m''), lambda (m') and symmetric D_1..D_{m'} of the
    size of Y's features.  Constraints:
    psi~(y_j)' D_i psi~(y_j) - lambda_i + [N diag(alpha) G]_ij = 0,
    sum_i D_i (x) phi~_i phi~_i' >= 0, sum alpha = 1 and the moment block.
    """
    X = getattr(ptsX, "points", ptsX)
    Y = getattr(ptsY, "points", ptsY)
    m, mp, mpp = dims(set_x)
    py, pyp, _ = dims(set_y)
    if X.shape[0] < mpp:
        raise ValueError(f"need {mpp} X points, got {X.shape[0]}")
    if Y.shape[0] < pyp:
        raise ValueError(f"need {pyp} Y points, got {Y.shape[0]}")
    X, Y = X[:mpp], Y[:pyp]
    if G is None:
        G = BilinearObjective(set_x, set_y, g=g).eval_table(X, Y)
    Phi, Phi2 = _kernel_pieces(set_x, X)
    Psi = empirical_features(set_y, Y, py)
    N = interpolation_matrix(set_x, X)
    basis = list(svec_basis(py))
    nsv = len(basis)

    p = SdpProblem(sense="min")
    alpha = p.add_vars(mpp)
    lam = p.add_vars(mp, obj=np.ones(mp))
    dvars = np.stack([p.add_vars(nsv) for _ in range(mp)])
    big = p.add_block(py * m)
    for i in range(mp):
        phi = Phi[i][:, None]
        for t, (_, _, U, w) in enumerate(basis):
            p.add_term(big, dvars[i, t], factors=np.kron(U, phi), weights=w)
    mb = p.add_block(mp)
    for k in range(mpp):
        p.add_term(mb, alpha[k], factors=Phi2[k][:, None])
    Sy = np.array([svec(np.outer(psi, psi)) for psi in Psi])
    for i in range(mp):
        for j in range(pyp):
            row = {int(dvars[i, t]): Sy[j, t] for t in range(nsv) if Sy[j, t] != 0.0}
            row[int(lam[i])] = -1.0
            for k in range(mpp):
                coef = N[i, k] * G[k, j]
                if coef != 0.0:
                    row[int(alpha[k])] = row.get(int(alpha[k]), 0.0) + coef
            p.add_equality(row, 0.0)
    p.add_equality({int(k): 1.0 for k in alpha}, 1.0)
    p.meta = _Layout(alpha, lam, [big], mb, dvars)
    return p


def _inner_anchor(sset, X):
    m = dims(sset)[0]
    return inv_sqrt(sset.gram(X[:m], X[:m]))


def _normalization(G):
    shift = float(np.mean(G))
    spread = float(np.max(np.abs(G - shift))) if G.size else 0.0
    return shift, (spread if spread > 0.0 else 1.0)


def solve_minmax(obj: BilinearObjective, seed=0, *, pts=None, pts_y=None, refine=True, **opts):
    """Solve the one-stage relaxation, extract x_star and classify the bound.

    Parameters
    ----------
    obj : BilinearObjective
    seed : int
        Seeds the sample points and the rank-one refinement.
    pts, pts_y : optional sample points for X and Y.
    refine : bool
        Re-solve on the optimal face with a random objective on alpha.
    """
    sx = obj.set_x
    mpp = dims(sx)[2]
    if pts is None:
        pts = sample_points(sx, mpp, seed)
    X = getattr(pts, "points", pts)[:mpp]
    Y = None
    if obj.finite:
        G = obj.eval_table(X)
    else:
        if pts_y is None:
            pts_y = sample_points(obj.set_y, dims(obj.set_y)[1], seed)
        Y = getattr(pts_y, "points", pts_y)
        G = obj.eval_table(X, Y[: dims(obj.set_y)[1]])
    # k(x, x) = 1 makes every rank-one term trace one, so a constant in g
    # moves sum(lambda) by exactly that constant; solving the centered,
    # unit-spread table makes the result equivariant to shifts and scalings
    shift, scale = _normalization(G)
    Gn = (G - shift) / scale
    if obj.finite:
        prob = build_primal_dual_finite(sx, obj.g_list, X, G=Gn)
    else:
        prob = build_primal_dual(sx, obj.set_y, obj.g, X, Y, G=Gn)
    lay = prob.meta
    sol = solve(prob, **opts)
    value = scale * float(sol.objective) + shift
    if sol.status is Status.OPTIMAL and refine:
        refined = refine_rank_one(
            prob, sol, seed, moment_block=lay.moment_block, random_vars=lay.alpha, **opts
        )
        if refined.status is Status.OPTIMAL:
            sol = refined
    alpha = sol.x[lay.alpha]
    _, Phi2 = _kernel_pieces(sx, X)
    rank = moment_rank((Phi2 * alpha[:, None]).T @ Phi2)
    res = MinMaxResult(
        value=value,
        alpha=alpha,
        lam=scale * sol.x[lay.lam] + shift * (interpolation_matrix(sx, X) @ alpha),
        dual_blocks=[sol.block_duals[b] for b in lay.dual_blocks],
        x_star=extract_point(sx, X, alpha),
        bound_status=BoundStatus.UNKNOWN,
        status=sol.status,
        moment_rank=rank,
        points=X,
        anchor_inv_sqrt=_inner_anchor(sx, X),
        set_x=sx,
        finite=obj.finite,
        points_y=Y,
        solution=sol,
    )
    if res.ok:
        res.bound_status = posteriori_check(res, obj, seed)
    return res


def dual_weights(res: MinMaxResult, X):
    """v_j(x) = phi~(x)' T_j phi~(x) at the rows of X, shape (n, p)."""
    if not res.finite:
        raise ValueError("dual weights are defined for finite Y only; use dual_blocks")
    F = res.features(X)
    return np.column_stack([np.einsum("ia,ab,ib->i", F, T, F) for T in res.dual_blocks])


def posteriori_check(res: MinMaxResult, obj: BilinearObjective, seed=0):
    """Classify the relaxation value as a bound on the true min-max.

    With an exact description of Y's moments the value is a lower bound.
    When the moment matrix is rank one and the true inner maximum at x_star
    equals the value, the bound is attained (Tight); without exact Y moments
    the same situation only gives an upper bound.
    """
    if not res.ok:
        return BoundStatus.UNKNOWN
    y_tight = obj.y_tight()
    if res.moment_rank == 1:
        inner = float(obj.max_over_y(res.x_star[None, :], seed)[0])
        if abs(inner - res.value) <= TIGHT_TOL:
            return BoundStatus.TIGHT if y_tight else BoundStatus.UPPER
    return BoundStatus.LOWER if y_tight else BoundStatus.UNKNOWN


# ---------------------------------------------------------------------------
# two-stage baseline
# ---------------------------------------------------------------------------


@dataclass
class TwoStageResult:
    value: float
    stage1_value: float
    upper_values: np.ndarray
    upper_coefs: np.ndarray
    x_star: np.ndarray
    mu: np.ndarray
    stage2_alpha: np.ndarray
    stage2_gap: float
    points: np.ndarray
    set_x: SimpleSet
    status: Status
    exact: bool = True

    def upper(self, X):
        """The fitted upper bound a(x) = sum_i c_i k(x_i, x)^2."""
        mp = self.upper_coefs.size
        return (self.set_x.gram(X, self.points[:mp]) ** 2) @ self.upper_coefs


def uniform_weights(sset, X):
    """Weights mu over m' points with sum_i mu_i phi~_i phi~_i' = I / m."""
    m, mp, _ = dims(sset)
    K2 = sset.gram(X[:mp], X[:mp]) ** 2
    return sla.solve(K2, np.full(mp, 1.0 / m), assume_a="pos")


def _stage_one(obj: BilinearObjective, X, Y, mu, opts):
    sx = obj.set_x
    m, mp, _ = dims(sx)
    Phi = empirical_features(sx, X, m)
    p = SdpProblem(sense="max")
    if obj.finite:
        G = obj.eval_table(X)
        pj = G.shape[1]
        a = p.add_vars(mp * pj, obj=G.ravel())
        for j in range(pj):
            b = p.add_block(m)
            for i in range(mp):
                p.add_term(b, a[i * pj + j], factors=Phi[i][:, None])
    else:
        G = obj.eval_table(X, Y)
        py = dims(obj.set_y)[0]
        Psi = empirical_features(obj.set_y, Y, py)
        pj = Y.shape[0]
        a = p.add_vars(mp * pj, obj=G.ravel())
        b = p.add_block(m * py)
        for i in range(mp):
            for j in range(pj):
                p.add_term(b, a[i * pj + j], factors=np.kron(Psi[j], Phi[i])[:, None])
    for i in range(mp):
        p.add_equality({int(a[i * pj + j]): 1.0 for j in range(pj)}, mu[i])
    sol = solve(p, **opts)
    # internal minimization of -objective: a(x_i) = -y_i
    return sol, -sol.y[:mp]


INEXACT_PRIMAL_TOL = 1e-6
INEXACT_DUAL_TOL = 1e-3


def two_stage(obj: BilinearObjective, pts=None, mu=None, seed=0, *, pts_y=None,
              accept_inexact=False, **opts):
    """Two-stage upper bound: fit a(x) >= max_y g(x, y), then minimize a.

    Stage 1 maximizes sum_ij alpha_ij g(x_i, y_j) over pseudo-moments with
    x-marginal ``mu`` (default: the weights of I/m); its equality multipliers
    give a(x_i).  Stage 2 runs the SOS minimization of a at the same points.

    With ``accept_inexact`` a stage-1 solve that stopped early is still used
    if its primal residual is below 1e-6 and its dual residual below 1e-3;
    the result then has ``exact=False``.
    """
    sx = obj.set_x
    mp = dims(sx)[1]
    if pts is None:
        pts = sample_points(sx, mp, seed)
    X = getattr(pts, "points", pts)[:mp]
    Y = None
    if not obj.finite:
        if pts_y is None:
            pts_y = sample_points(obj.set_y, dims(obj.set_y)[1], seed)
        Y = getattr(pts_y, "points", pts_y)
    mu = uniform_weights(sx, X) if mu is None else np.asarray(mu, dtype=np.float64)
    sol, avals = _stage_one(obj, X, Y, mu, opts)
    K2 = sx.gram(X, X) ** 2
    coefs = sla.solve(K2, avals, assume_a="pos")
    exact = sol.status is Status.OPTIMAL
    usable = exact or (
        accept_inexact
        and sol.status in (Status.MAXITER, Status.NUMERICAL_FAILURE)
        and sol.primal_residual <= INEXACT_PRIMAL_TOL
        and sol.dual_residual <= INEXACT_DUAL_TOL
    )
    if not usable:
        return TwoStageResult(np.nan, sol.objective, avals, coefs, X[0], mu, mu, np.nan, X, sx,
                              sol.status, False)
    a_fn = Tabulated(lambda Z: (sx.gram(Z, X) ** 2) @ coefs, n_vars=sx.ambient_dim)
    r2 = solve_min(sx, a_fn, seed, pts=X, values=avals, **opts)
    gap = float(a_fn(r2.x_star[None, :])[0] - r2.value)
    return TwoStageResult(
        value=r2.value,
        stage1_value=float(sol.objective),
        upper_values=avals,
        upper_coefs=coefs,
        x_star=r2.x_star,
        mu=mu,
        stage2_alpha=r2.alpha,
        stage2_gap=gap,
        points=X,
        set_x=sx,
        status=r2.status,
        exact=exact,
    )


@dataclass
class AlternatingResult:
    values: list
    steps: list


def alternate_two_stage(obj: BilinearObjective, pts=None, mu0=None, iters=6, seed=0, **opts):
    """Alternate between the two stages, feeding the stage-2 weights back as mu.

    ``values`` holds the stage-1 objective of each round; it cannot
    increase, but the iteration may settle at a non-global point.

    From the second round on mu is (numerically) a point mass.  The best
    upper bound touching max_j g_j at a kink is then not attained, the dual
    iterates diverge and the solver may stop short of its tolerances; such
    rounds are accepted with ``exact=False`` when the primal iterate is
    feasible (see ``two_stage(accept_inexact=True)``).  Stage-2 weights
    that do not lower the fitted bound on the samples are discarded and the
    previous mu is kept.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    sx = obj.set_x
    if pts is None:
        pts = sample_points(sx, dims(sx)[1], seed)
    mu = mu0
    values, steps = [], []
    for _ in range(iters):
        r = two_stage(obj, pts, mu, seed, accept_inexact=True, **opts)
        steps.append(r)
        values.append(r.stage1_value)
        if r.status is not Status.OPTIMAL:
            break
        # mu itself is feasible for stage 2; keep it unless the new weights
        # actually lower the fitted bound (they may not once a blows up)
        if r.stage2_alpha @ r.upper_values <= r.mu @ r.upper_values:
            mu = r.stage2_alpha
        else:
            mu = r.mu
    return AlternatingResult(values, steps)
