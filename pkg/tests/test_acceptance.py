"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line (also collected in the pytest summary)
before asserting.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from sosminmax import certify, instances, matrixsos
from sosminmax.matalg import svec_basis
from sosminmax.minmax import (
    BilinearObjective,
    BoundStatus,
    alternate_two_stage,
    dual_weights,
    solve_minmax,
    two_stage,
)
from sosminmax.oracles import grid_minmax_1d, grid_minmax_2d
from sosminmax.polynomial import random_trig
from sosminmax.sdp import SdpProblem, Status, solve
from sosminmax.simpleset import Kind, make_set
from sosminmax.sosmin import solve_min

RANDOM_SEEDS = [1000 + k for k in range(10)]


def lambda_min_program(C):
    """min <C, X> s.t. tr X = 1, X >= 0, with X parameterized by its svec."""
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


@pytest.fixture(scope="module")
def random_three():
    """The ten random 3-polynomial instances with their relaxations and oracles."""
    out = []
    sx = make_set(Kind.TRIG, 1, 1, s=2)
    for k, seed in enumerate(RANDOM_SEEDS):
        gl = instances.three_polys(seed)
        obj = BilinearObjective(sx, g_list=gl)
        res = solve_minmax(obj, k)
        oracle, _ = grid_minmax_1d(gl, 100_000)
        out.append((obj, res, oracle))
    return out


def test_criterion_01_sdp_lambda_min(criterion):
    rng = np.random.default_rng(42)
    orders = np.linspace(5, 50, 20).astype(int)
    worst_err = worst_gap = 0.0
    statuses = []
    t0 = time.perf_counter()
    for n in orders:
        C = rng.standard_normal((n, n))
        C = 0.5 * (C + C.T)
        sol = solve(lambda_min_program(C))
        statuses.append(sol.status)
        worst_err = max(worst_err, abs(sol.objective - np.linalg.eigvalsh(C)[0]))
        worst_gap = max(worst_gap, abs(sol.gap))
    elapsed = time.perf_counter() - t0
    ok = (all(s is Status.OPTIMAL for s in statuses) and worst_err <= 1e-7
          and worst_gap <= 1e-8 and elapsed < 10.0)
    criterion(1, ok, f"max |obj - lambda_min| = {worst_err:.2e}, max gap = {worst_gap:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_02_trig_min_tight(criterion):
    sset = make_set(Kind.TRIG, 1, 1)
    grid = np.arange(10**6) / 1e6
    worst_val = worst_x = 0.0
    for seed in range(20):
        f = random_trig(np.random.default_rng(seed), 2)
        res = solve_min(sset, f, seed)
        v = f(grid)
        i = int(np.argmin(v))
        worst_val = max(worst_val, abs(res.value - v[i]))
        dx = abs((res.x_star[0] - grid[i] + 0.5) % 1.0 - 0.5)
        worst_x = max(worst_x, dx)
    ok = worst_val <= 1e-6 and worst_x <= 1e-4
    criterion(2, ok, f"max value error {worst_val:.2e}, max x_star error {worst_x:.2e}")
    assert ok


def test_criterion_03_finite_minmax(criterion, random_three):
    r1 = solve_minmax(instances.abs_cos())
    x1 = r1.x_star[0]
    ok1 = abs(r1.value) <= 1e-6 and min(abs(x1 - 0.25), abs(x1 - 0.75)) <= 1e-4
    r2 = solve_minmax(instances.cos_sin())
    ok2 = abs(r2.value + np.sqrt(2) / 2) <= 1e-5 and abs(r2.x_star[0] - 0.625) <= 1e-4
    lower = all(res.value <= orc + 1e-6 for _, res, orc in random_three)
    tight = sum(res.bound_status is BoundStatus.TIGHT for _, res, _ in random_three)
    ok = ok1 and ok2 and lower and tight >= 8
    criterion(3, ok, f"|cos| value {r1.value:.1e} at {x1:.6f}; cos/sin error "
              f"{r2.value + np.sqrt(2) / 2:.1e} at {r2.x_star[0]:.6f}; random: lower bound "
              f"{'holds' if lower else 'VIOLATED'}, {tight}/10 Tight")
    assert ok


def test_criterion_04_partition_of_unity(criterion, random_three):
    grid = (np.arange(1000) / 1000)[:, None]
    cases = [solve_minmax(instances.abs_cos()), solve_minmax(instances.cos_sin())]
    cases += [res for _, res, _ in random_three if res.bound_status is BoundStatus.TIGHT]
    worst_sum = 0.0
    worst_neg = 0.0
    for res in cases:
        V = dual_weights(res, grid)
        tot = V.sum(axis=1)
        worst_sum = max(worst_sum, abs(tot.min() - 1), abs(tot.max() - 1))
        worst_neg = min(worst_neg, V.min())
    ok = worst_sum <= 1e-5 and worst_neg >= -1e-6
    criterion(4, ok, f"{len(cases)} tight instances: max |sum_j v_j - 1| = {worst_sum:.1e}, "
              f"min v_j = {worst_neg:.1e}")
    assert ok


def test_criterion_05_boolean_exact(criterion):
    import itertools

    V = np.array(list(itertools.product([-1.0, 1.0], repeat=3)))
    sset = make_set(Kind.BOOLCUBE, 3, 1)
    worst = 0.0
    for seed in range(10):
        gl = instances.boolean_pair(seed)
        res = solve_minmax(BilinearObjective(sset, g_list=gl), seed)
        exact = np.max([g(V) for g in gl], axis=0).min()
        worst = max(worst, abs(res.value - exact))
    ok = worst <= 1e-7
    criterion(5, ok, f"max |relaxation - enumeration| = {worst:.2e} over 10 instances")
    assert ok


def test_criterion_06_two_stage(criterion):
    gl = instances.three_polys(instances.THREE_POLY_SEED)
    grid = (np.arange(10_000) / 10_000)[:, None]
    mx = np.max([g(grid) for g in gl], axis=0)
    one = solve_minmax(BilinearObjective(make_set(Kind.TRIG, 1, 1, s=2), g_list=gl))
    dominance, excess, finals = [], [], []
    for s in (2, 4, 8):
        r = two_stage(BilinearObjective(make_set(Kind.TRIG, 1, 1, s=s), g_list=gl))
        a = r.upper(grid)
        dominance.append(float((a - mx).min()))
        excess.append(float((a - mx).mean()))
        finals.append(r.value)
    ok = (
        min(dominance) >= -1e-7
        and excess[0] > excess[1] > excess[2]
        and all(v >= one.value - 1e-6 for v in finals)
    )
    criterion(6, ok, f"min(a_r - max g) = {min(dominance):.1e}; integral gaps "
              f"{', '.join(f'{e:.4f}' for e in excess)}; two-stage values "
              f"{', '.join(f'{v:.4f}' for v in finals)} vs one-stage {one.value:.4f}")
    assert ok


def test_criterion_07_alternating_stall(criterion):
    gl = instances.three_polys(instances.ALTERNATING_SEED)
    obj = BilinearObjective(make_set(Kind.TRIG, 1, 1, s=2), g_list=gl)
    al = alternate_two_stage(obj, iters=6)
    vals = np.array(al.values)
    oracle, _ = grid_minmax_1d(gl, 100_000)
    monotone = bool(np.all(np.diff(vals) <= 1e-9))
    excess = vals[-1] - oracle
    ok = len(vals) == 6 and monotone and excess >= 1e-3
    criterion(7, ok, f"values {', '.join(f'{v:.4f}' for v in vals)}; final exceeds the "
              f"global min-max {oracle:.4f} by {excess:.4f}")
    assert ok


def test_criterion_08_bivariate(criterion):
    obj, g = instances.bivariate()
    t0 = time.perf_counter()
    res = solve_minmax(obj)
    elapsed = time.perf_counter() - t0
    oracle, _, _, _ = grid_minmax_2d(g, 1000)
    err = abs(res.value - oracle)
    ok = res.status is Status.OPTIMAL and err <= 1e-4 and elapsed < 60
    criterion(8, ok, f"value {res.value:.7f} vs nested grid {oracle:.7f} (error {err:.1e}), "
              f"solve {elapsed:.1f} s")
    assert ok


def test_criterion_09_certificates(criterion):
    gl = instances.shifted_ball(2.0)
    cert = certify.emptiness_certificate(gl, 1)
    is_cert = isinstance(cert, certify.Certificate)
    residual = certify.verify_certificate(cert, gl, 1000) if is_cert else np.inf
    margin = cert.psd_margin() if is_cert else -np.inf
    from sosminmax.polynomial import monomial

    nonempty = [monomial([((1,), 1.0)])]
    undecided = all(
        isinstance(certify.emptiness_certificate(nonempty, s), certify.Undecided) for s in range(1, 5)
    )
    bad = certify.Certificate.from_json(cert.to_json()) if is_cert else None
    if bad is not None:
        bad.terms[1].v_gram[0, 0] += 0.1
    bad_res = certify.verify_certificate(bad, gl, 1000) if bad is not None else 0.0
    ok = is_cert and residual <= 1e-10 and margin >= -1e-9 and undecided and bad_res > 1e-3
    criterion(9, ok, f"residual {residual:.1e}, min Gram eigenvalue {margin:.1e}; g = x undecided "
              f"for s <= 4: {undecided}; corrupted residual {bad_res:.2f}")
    assert ok


def test_criterion_10_matrix_sos_constant(criterion):
    exact = matrixsos.epsilon_bound(1, 1, 6) == 0.2
    rows = matrixsos.bound_table((1, 2), (1, 2), 12)
    all_ok = all(r["ok"] for r in rows)
    ratios = [
        200**2 * matrixsos.epsilon_bound(d, r, 200) / (6 * r * r * d) for d in (1, 2) for r in (1, 2)
    ]
    asym = all(0.95 <= q <= 1.05 for q in ratios)
    ok = exact and all_ok and asym
    criterion(10, ok, f"eps(1,1,6) == 0.2: {exact}; {sum(r['ok'] for r in rows)}/{len(rows)} "
              f"(d,r,s) bounds hold; s = 200 ratios in [{min(ratios):.4f}, {max(ratios):.4f}]")
    assert ok


def test_criterion_11_hierarchy_monotone(criterion):
    objs = [instances.abs_cos, instances.cos_sin] + [
        (lambda s, seed=seed: instances.finite_three(seed, s=s)) for seed in RANDOM_SEEDS
    ]
    worst = np.inf
    for make in objs:
        vals = [solve_minmax(make(s=s)).value for s in (2, 3, 4)]
        worst = min(worst, float(np.min(np.diff(vals))))
    ok = worst >= -1e-7
    criterion(11, ok, f"smallest step value(s+1) - value(s) = {worst:.1e} over {len(objs)} instances")
    assert ok


def _run_suite(out):
    """Run every reproduction command plus a certificate in a fresh interpreter."""
    for fig in ("fig1", "fig2", "fig3", "fig5"):
        subprocess.run(
            [sys.executable, "-m", "sosminmax", "repro", fig, "--seed", "0", "--out", str(out / fig)],
            check=True, capture_output=True,
        )


def test_criterion_12_determinism(criterion, tmp_path):
    from sosminmax.cli import strip_timestamp

    _run_suite(tmp_path / "a")
    _run_suite(tmp_path / "b")
    same = []
    for fig in ("fig1", "fig2", "fig3", "fig5"):
        ra = json.loads((tmp_path / "a" / fig / "result.json").read_text())
        rb = json.loads((tmp_path / "b" / fig / "result.json").read_text())
        same.append(strip_timestamp(ra) == strip_timestamp(rb))
        for csv in (tmp_path / "a" / fig).glob("*.csv"):
            same.append(csv.read_bytes() == (tmp_path / "b" / fig / csv.name).read_bytes())
    ok = all(same)
    criterion(12, ok, f"{sum(same)}/{len(same)} result.json and CSV files identical across two runs")
    assert ok
