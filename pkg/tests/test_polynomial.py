import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sosminmax.polynomial import (
    Tabulated,
    constant,
    evaluate,
    monomial,
    poly_from_json,
    poly_to_json,
    random_trig,
    representable,
    trig,
)
from sosminmax.simpleset import DomainError, make_set


def test_constant_and_cosine():
    assert constant(3.0)(np.array([0.1, 0.7])) == pytest.approx([3.0, 3.0])
    c = trig([(1, 1.0, 0.0)])
    assert c(0.25)[0] == pytest.approx(0.0, abs=1e-15)
    assert c(0.5)[0] == pytest.approx(-1.0)


def test_monomial_values():
    p = monomial([((2, 0), 1.0), ((0, 1), -3.0), ((0, 0), 0.5)], n_vars=2)
    assert p.degree == 2
    assert p(np.array([[2.0, 1.0]]))[0] == pytest.approx(4 - 3 + 0.5)


def test_evaluate_checks_domain():
    p = monomial([((1,), 1.0)], domain=make_set("ball", 1, 1))
    assert evaluate(p, [0.5])[0] == pytest.approx(0.5)
    with pytest.raises(DomainError):
        evaluate(p, [1.5])


@given(st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 2))
def test_random_trig_matches_fourier_sum(seed, degree, n_vars):
    rng = np.random.default_rng(seed)
    p = random_trig(rng, degree, n_vars)
    X = rng.random((15, n_vars))
    direct = np.zeros(15)
    for w, c, s in zip(p.freqs, p.cos_c, p.sin_c):
        ph = 2 * np.pi * X @ w
        direct += c * np.cos(ph) + s * np.sin(ph)
    np.testing.assert_allclose(p(X), direct, atol=1e-12)
    assert p.degree == degree


@given(st.integers(0, 2**31))
def test_json_round_trip(seed):
    rng = np.random.default_rng(seed)
    for p in (random_trig(rng, 2, 2), monomial([((1, 2), rng.standard_normal())], 2)):
        q = poly_from_json(json.loads(json.dumps(poly_to_json(p))))
        X = rng.random((5, 2))
        np.testing.assert_allclose(q(X), p(X), atol=1e-14)


def test_tabulated_has_no_json():
    with pytest.raises(TypeError):
        Tabulated(lambda X: X[:, 0]).to_json()
    with pytest.raises(ValueError):
        poly_from_json({"basis": "legendre", "terms": []})


def test_representable():
    T = make_set("trig", 1, 1)
    assert representable(trig([(2, 1.0, 0.0)]), T)
    assert not representable(trig([(3, 1.0, 0.0)]), T)
    assert not representable(monomial([((1,), 1.0)]), T)
    cube = make_set("boolcube", 3, 1)
    # x1^2 x2 x3 is x2 x3 on the cube
    assert representable(monomial([((2, 1, 1), 1.0)], 3), cube)
    assert not representable(monomial([((1, 1, 1), 1.0)], 3), cube)
    assert representable(Tabulated(np.cos), T)
