import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sosminmax.matalg import svec_basis
from sosminmax.sdp import SdpProblem, Status, refine_rank_one, solve


def lambda_min_program(C):
    n = C.shape[0]
    p = SdpProblem(sense="min")
    blk = p.add_block(n)
    row = {}
    for _, _, U, w in svec_basis(n):
        k = p.add_vars(1)[0]
        E = (U * w) @ U.T
        p.set_objective(k, float(np.sum(C * E)))
        p.add_term(blk, k, factors=U, weights=w)
        row[k] = float(np.trace(E))
    p.add_equality(row, 1.0)
    return p


def random_sym(seed, n):
    A = np.random.default_rng(seed).standard_normal((n, n))
    return 0.5 * (A + A.T)


def test_lambda_min_diagonal():
    sol = solve(lambda_min_program(np.diag([1.0, 2.0])))
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(sol.slacks[0], np.diag([1.0, 0.0]), atol=1e-6)


def test_lp_as_diagonal_sdp():
    p = SdpProblem(sense="min")
    x = p.add_vars(2, obj=[1.0, 1.0])
    b = p.add_block(2)
    p.add_term(b, x[0], np.diag([1.0, 0.0]))
    p.add_term(b, x[1], np.diag([0.0, 1.0]))
    p.add_equality({x[0]: 1.0, x[1]: 1.0}, 1.0)
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-8)


def test_random_lambda_min_seed_42():
    C = random_sym(42, 5)
    sol = solve(lambda_min_program(C))
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-7)


def test_max_sense_docstring_example():
    p = SdpProblem(sense="max")
    t = p.add_vars(1, obj=[1.0])[0]
    b = p.add_block(2, const=np.diag([1.0, 2.0]))
    p.add_term(b, t, -np.eye(2))
    assert solve(p).objective == pytest.approx(1.0, abs=1e-8)


@pytest.mark.slow
def test_lambda_min_order_50():
    C = random_sym(7, 50)
    sol = solve(lambda_min_program(C))
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-7)


def test_infeasible_detected():
    # x >= 1 and x <= -1
    p = SdpProblem(sense="min")
    x = p.add_vars(1, obj=[1.0])[0]
    b = p.add_block(2, const=np.diag([-1.0, -1.0]))
    p.add_term(b, x, np.diag([1.0, -1.0]))
    assert solve(p).status is Status.INFEASIBLE


def test_inconsistent_equalities_infeasible():
    p = SdpProblem(sense="min")
    x = p.add_vars(1, obj=[1.0])[0]
    b = p.add_block(1)
    p.add_term(b, x, np.eye(1))
    p.add_equality({x: 1.0}, 1.0)
    p.add_equality({x: 2.0}, 3.0)
    assert solve(p).status is Status.INFEASIBLE


def test_dependent_equalities_removed():
    p = SdpProblem(sense="min")
    x = p.add_vars(2, obj=[1.0, 2.0])
    b = p.add_block(2)
    p.add_term(b, x[0], np.diag([1.0, 0.0]))
    p.add_term(b, x[1], np.diag([0.0, 1.0]))
    p.add_equality({x[0]: 1.0, x[1]: 1.0}, 1.0)
    p.add_equality({x[0]: 2.0, x[1]: 2.0}, 2.0)
    sol = solve(p)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-8)


def test_unbounded_detected():
    # minimize x subject to x <= 1 only
    p = SdpProblem(sense="min")
    x = p.add_vars(1, obj=[1.0])[0]
    b = p.add_block(1, const=[[1.0]])
    p.add_term(b, x, -np.eye(1))
    assert solve(p).status is Status.UNBOUNDED


def test_deterministic_repeat():
    p = lambda_min_program(random_sym(3, 6))
    a, b = solve(p), solve(p)
    assert a.iterations == b.iterations
    assert abs(a.objective - b.objective) <= 1e-12
    np.testing.assert_array_equal(a.x, b.x)


def test_json_round_trip():
    p = lambda_min_program(random_sym(5, 4))
    q = SdpProblem.from_json(json.loads(json.dumps(p.to_json())))
    assert set(p.to_json()) == {"sense", "blocks", "eq", "obj"}
    assert solve(q).objective == pytest.approx(solve(p).objective, abs=1e-10)


def test_refine_unique_optimum_unchanged():
    p = lambda_min_program(np.diag([1.0, 2.0, 3.0]))
    sol = solve(p)
    ref = refine_rank_one(p, sol, seed=1, moment_block=0)
    assert ref.objective == pytest.approx(sol.objective, abs=1e-6)
    np.testing.assert_allclose(ref.slacks[0], sol.slacks[0], atol=1e-6)
    # without the rank hint the point may drift by O(sqrt(band)) inside the band
    ref = refine_rank_one(p, sol, seed=1)
    assert ref.objective == pytest.approx(sol.objective, abs=1e-6)
    np.testing.assert_allclose(ref.slacks[0], sol.slacks[0], atol=1e-3)


def test_refine_picks_extreme_point_of_face():
    # degenerate lambda_min: the optimal face is every density on a 2-dim eigenspace
    p = lambda_min_program(np.diag([1.0, 1.0, 3.0]))
    sol = solve(p)
    ref = refine_rank_one(p, sol, seed=4)
    w = np.linalg.eigvalsh(ref.slacks[0])
    assert w[-2] < 1e-6 * w[-1]
    assert ref.objective == pytest.approx(sol.objective, abs=1e-6)


def test_refine_requires_optimal():
    p = SdpProblem(sense="min")
    x = p.add_vars(1, obj=[1.0])[0]
    b = p.add_block(1, const=[[1.0]])
    p.add_term(b, x, -np.eye(1))
    with pytest.raises(ValueError):
        refine_rank_one(p, solve(p))


@settings(max_examples=20)
@given(st.integers(0, 2**31), st.integers(2, 8))
def test_refine_preserves_objective(seed, n):
    p = lambda_min_program(random_sym(seed, n))
    sol = solve(p)
    ref = refine_rank_one(p, sol, seed=seed)
    assert abs(ref.objective - sol.objective) <= 1e-6


@given(st.integers(0, 2**31), st.integers(1, 8))
def test_weak_duality_and_accuracy(seed, n):
    C = random_sym(seed, n)
    sol = solve(lambda_min_program(C))
    assert sol.status is Status.OPTIMAL
    assert sol.objective - sol.dual_objective >= -1e-9
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-7)
    for S, Z in zip(sol.slacks, sol.block_duals):
        assert np.sum(S * Z) <= 1e-8 * (1 + abs(sol.objective))
