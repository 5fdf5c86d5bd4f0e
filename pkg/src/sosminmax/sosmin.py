"""Kernelized SOS lower bounds for minimizing one polynomial over a simple set.

The relaxation searches over pseudo-moment matrices written as
sum_i alpha_i phi~(x_i) phi~(x_i)' at m' sample points:

    minimize   sum_i alpha_i f(x_i)
    subject to sum_i alpha_i = 1,   Phi' diag(alpha) Phi >= 0.

alpha is free in sign; the PSD constraint is what makes the bound nontrivial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .matalg import empirical_features
from .polynomial import evaluate
from .sdp import SdpProblem, SdpSolution, Status, refine_rank_one, solve
from .simpleset import Kind, SimpleSet, dims, sample_points

RANK_TOL = 1e-6


@dataclass
class MinResult:
    value: float
    alpha: np.ndarray
    x_star: np.ndarray
    moment_rank: int
    status: Status
    points: np.ndarray
    solution: SdpSolution | None = None

    @property
    def ok(self):
        return self.status is Status.OPTIMAL


def build_min_sdp(sset: SimpleSet, f, pts, values=None):
    """SDP for the lower bound on ``f`` from the first m' points of ``pts``.

    ``values`` overrides the evaluations of ``f`` (one per point used).
    Variables are the weights alpha, one per point.
    """
    X = getattr(pts, "points", pts)
    mp = dims(sset)[1]
    if X.shape[0] < mp:
        raise ValueError(f"need {mp} points, got {X.shape[0]}")
    X = X[:mp]
    Phi = empirical_features(sset, X)
    fx = evaluate(f, X) if values is None else np.asarray(values, dtype=np.float64)[:mp]
    p = SdpProblem(sense="min")
    a = p.add_vars(mp, obj=fx)
    blk = p.add_block(Phi.shape[1])
    for i in range(mp):
        p.add_term(blk, a[i], factors=Phi[i][:, None])
    p.add_equality({int(i): 1.0 for i in a}, 1.0)
    return p


def moment_matrix(Phi, alpha):
    return (Phi * alpha[:, None]).T @ Phi


def moment_rank(M, tol=RANK_TOL):
    w = sla.eigvalsh(0.5 * (M + M.T), driver="ev")
    if w.size == 0 or w[-1] <= 0:
        return 0
    return int(np.sum(w > tol * w[-1]))


def extract_point(sset: SimpleSet, X, alpha):
    """Candidate minimizer from weights: sum_i alpha_i x_i, adapted per set.

    Torus coordinates use the phase of sum_i alpha_i exp(2 i pi x_i), since
    only (cos, sin) of each coordinate is linear in the features.  Finite
    sets return the heaviest atom, Boolean cubes the sign pattern, and
    spheres/balls the weighted mean projected back onto the set.
    """
    X = np.asarray(X, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    k = sset.kind
    if k is Kind.DISCRETE:
        return np.array([float(np.round(X[int(np.argmax(alpha)), 0]))])
    if k is Kind.TRIG:
        z = alpha @ np.exp(2j * np.pi * X)
        return np.mod(np.angle(z) / (2 * np.pi), 1.0)
    mean = alpha @ X
    if k is Kind.SPHERE:
        nrm = np.linalg.norm(mean)
        return mean / nrm if nrm > 0 else X[0].copy()
    if k is Kind.BALL:
        nrm = np.linalg.norm(mean)
        return mean / nrm if nrm > 1.0 else mean
    if k is Kind.BOOLCUBE:
        return np.where(mean >= 0, 1.0, -1.0)
    out, c = [], 0
    for fac in sset.factors:
        w = fac.ambient_dim
        out.append(extract_point(fac, X[:, c : c + w], alpha))
        c += w
    return np.concatenate(out)


def solve_min(sset: SimpleSet, f, seed=0, *, pts=None, values=None, refine=True, **opts):
    """Lower bound on min f over the set and a candidate minimizer.

    Parameters
    ----------
    sset : SimpleSet
    f : polynomial or callable
    seed : int
        Seeds the sample points and the rank-one refinement.
    pts : PointSet or array, optional
        Sample points (defaults to m' well-positioned points).
    values : array, optional
        Precomputed values of ``f`` at the points.
    refine : bool
        Move to a generic point of the optimal face before extraction.
    """
    mp = dims(sset)[1]
    if pts is None:
        pts = sample_points(sset, mp, seed)
    X = getattr(pts, "points", pts)[:mp]
    fx = evaluate(f, X) if values is None else np.asarray(values, dtype=np.float64)[:mp]
    # sum(alpha) = 1, so an affine change of the values only moves the
    # optimum; solving the centered, unit-spread problem makes the result
    # blind to offsets and scalings of f
    shift = float(np.mean(fx))
    spread = float(np.max(np.abs(fx - shift)))
    scale = spread if spread > 0.0 else 1.0
    p = build_min_sdp(sset, f, X, (fx - shift) / scale)
    sol = solve(p, **opts)
    Phi = empirical_features(sset, X)
    if sol.status is not Status.OPTIMAL:
        alpha = sol.x
        return MinResult(scale * sol.objective + shift, alpha, extract_point(sset, X, alpha),
                         moment_rank(moment_matrix(Phi, alpha)), sol.status, X, sol)
    value = scale * float(sol.objective) + shift
    if refine:
        refined = refine_rank_one(p, sol, seed, moment_block=0, **opts)
        # a failed refinement keeps the unrefined optimum
        if refined.status is Status.OPTIMAL:
            sol = refined
    alpha = sol.x
    M = moment_matrix(Phi, alpha)
    return MinResult(
        value, alpha, extract_point(sset, X, alpha), moment_rank(M),
        sol.status, X, sol,
    )


def certificate_gap(f, result: MinResult):
    """f(x_star) minus the relaxation value; nonnegative up to solver accuracy."""
    return float(evaluate(f, result.x_star[None, :])[0] - result.value)
