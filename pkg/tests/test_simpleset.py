import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sosminmax.simpleset import (
    DomainError,
    Kind,
    dims,
    kernel,
    make_set,
    numerical_dims,
    product_set,
    sample_points,
    set_from_json,
    set_to_json,
    with_hierarchy,
)


@pytest.mark.parametrize(
    "kind, d, r, expected",
    [
        ("trig", 1, 1, (3, 5, 9)),
        ("trig", 2, 1, (9, 25, 81)),
        ("sphere", 2, 2, (9, 25, 81)),
        ("boolcube", 3, 1, (4, 7, 8)),
        ("discrete", 4, 0, (4, 4, 4)),
    ],
)
def test_dims_examples(kind, d, r, expected):
    assert dims(make_set(kind, d, r)) == expected


@pytest.mark.parametrize(
    "sset",
    [
        make_set("trig", 1, 1, s=2),
        make_set("trig", 2, 1),
        make_set("sphere", 2, 1),
        make_set("sphere", 1, 2),
        make_set("ball", 1, 2),
        make_set("ball", 2, 1),
        make_set("boolcube", 3, 1),
        make_set("boolcube", 4, 2),
        product_set(make_set("trig", 1, 1), make_set("discrete", 3, 0)),
    ],
    ids=lambda s: f"{s.kind.value}-{s.d}-{s.s}",
)
def test_dims_match_gram_ranks(sset):
    # hemisphere features of high degree decay fast, so balls need a finer rank cut
    tol = 1e-14 if sset.kind is Kind.BALL else 1e-9
    assert numerical_dims(sset, rel_tol=tol) == dims(sset)


def test_trig_kernel_values():
    T = make_set("trig", 1, 1)
    assert kernel(T, 0.0, 0.0) == pytest.approx(1.0)
    # Dirichlet kernel of order 1 vanishes at 1/3
    assert kernel(T, 0.0, 1.0 / 3.0) == pytest.approx(0.0, abs=1e-12)


def test_sphere_kernel_on_diagonal():
    S = make_set("sphere", 2, 2)
    e1 = np.array([1.0, 0.0, 0.0])
    assert kernel(S, e1, e1) == pytest.approx(1.0)
    assert kernel(S, e1, -e1) == pytest.approx(0.0)


def test_ball_kernel_uses_upper_hemisphere():
    B = make_set("ball", 1, 1)
    # lifts of 0 and 1 are orthogonal
    assert kernel(B, 0.0, 1.0) == pytest.approx(0.5)


def test_points_outside_raise():
    with pytest.raises(DomainError):
        kernel(make_set("sphere", 1, 1), [2.0, 0.0], [1.0, 0.0])
    with pytest.raises(DomainError):
        make_set("boolcube", 2, 1).gram(np.array([[0.5, 1.0]]))
    with pytest.raises(DomainError):
        make_set("ball", 2, 1).gram(np.array([[1.0, 1.0]]))


def test_invalid_construction():
    with pytest.raises(ValueError):
        make_set("trig", 1, 2, s=1)
    with pytest.raises(ValueError):
        make_set("trig", 1, 0)
    with pytest.raises(ValueError):
        make_set("sphere", 0, 1)
    with pytest.raises(ValueError):
        with_hierarchy(make_set("trig", 1, 2), 1)


def test_with_hierarchy():
    T = make_set("trig", 1, 1)
    T3 = with_hierarchy(T, 3)
    assert (T3.degree, T3.s) == (1, 3)
    assert dims(T3) == (7, 13, 25)
    P = with_hierarchy(product_set(make_set("trig", 1, 1), make_set("trig", 1, 1)), 2)
    assert dims(P) == (25, 81, 289)


def test_discrete_sampling_returns_atoms_in_order():
    pts = sample_points(make_set("discrete", 3, 0), 3).points
    np.testing.assert_array_equal(pts[:, 0], [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        sample_points(make_set("discrete", 3, 0), 4)


def test_trig_sampling_distinct():
    pts = sample_points(make_set("trig", 1, 1), 5, seed=3).points
    assert len(np.unique(np.round(pts, 12))) == 5
    assert np.all((pts >= 0) & (pts < 1))


def test_boolcube_sampling_all_vertices():
    pts = sample_points(make_set("boolcube", 2, 1), 4, seed=7).points
    got = {tuple(p) for p in pts}
    assert got == {(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)}


@pytest.mark.parametrize("kind, d", [("trig", 1), ("sphere", 2), ("ball", 2), ("boolcube", 3)])
def test_sampling_deterministic(kind, d):
    S = make_set(kind, d, 1)
    n = dims(S)[2]
    a = sample_points(S, n, seed=11).points
    b = sample_points(S, n, seed=11).points
    np.testing.assert_array_equal(a, b)
    assert S.contains(a).all()


@pytest.mark.parametrize(
    "sset",
    [
        make_set("trig", 2, 1, s=2),
        make_set("discrete", 5, 0),
        make_set("ball", 3, 1),
        product_set(make_set("trig", 1, 1), make_set("sphere", 1, 1)),
    ],
)
def test_json_round_trip(sset):
    obj = json.loads(json.dumps(set_to_json(sset)))
    assert set_from_json(obj) == sset


# -- properties ------------------------------------------------------------

SETS = [
    make_set("trig", 1, 1, s=2),
    make_set("trig", 2, 1),
    make_set("sphere", 2, 2),
    make_set("ball", 2, 1),
    make_set("boolcube", 3, 2),
]


def _points(sset, n, seed):
    return sample_points(sset, n, seed=seed).points


@given(st.sampled_from(SETS), st.integers(0, 10_000))
def test_kernel_is_one_on_diagonal(sset, seed):
    X = _points(sset, 6 if sset.kind is not Kind.BOOLCUBE else 4, seed)
    np.testing.assert_allclose(np.diag(sset.gram(X)), 1.0, atol=1e-12)


@given(st.sampled_from(SETS), st.integers(0, 10_000))
def test_gram_is_psd(sset, seed):
    X = _points(sset, 8 if sset.kind is not Kind.BOOLCUBE else 8, seed)
    K = sset.gram(X)
    np.testing.assert_allclose(K, K.T, atol=1e-13)
    assert np.linalg.eigvalsh(K).min() >= -1e-9 * max(1.0, np.abs(K).max())


@given(st.integers(0, 10_000))
def test_product_kernel_factorizes(seed):
    A = make_set("trig", 1, 1, s=2)
    B = make_set("sphere", 1, 1)
    P = product_set(A, B)
    X = _points(P, 5, seed)
    expected = A.gram(X[:, :1]) * B.gram(X[:, 1:])
    np.testing.assert_allclose(P.gram(X), expected, atol=1e-13)


@given(
    st.sampled_from(["trig", "sphere", "ball", "boolcube"]),
    st.integers(1, 3),
    st.integers(1, 4),
)
def test_dims_monotone_in_hierarchy(kind, d, s):
    lo = dims(make_set(kind, d, 1, s=s))
    hi = dims(make_set(kind, d, 1, s=s + 1))
    assert all(a <= b for a, b in zip(lo, hi))
    assert lo[0] <= lo[1] <= lo[2]
