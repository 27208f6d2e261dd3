import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpgen.potential import (
    BasisLabel, CoefficientFileError, PotentialShape, TrigPolynomial, dimension_count,
    dumps_coefficients, index_table, load_coefficients, loads_coefficients, save_coefficients,
    torus_distance, wrap,
)


def brute_count(d, n):
    return sum(1 for m in itertools.product(range(-n, n + 1), repeat=d) if sum(map(abs, m)) <= n)


def random_poly(gen, d, n):
    shape = PotentialShape(d, n)
    return TrigPolynomial(shape, gen.standard_normal(shape.N))


@pytest.mark.parametrize("d,n,N", [(1, 1, 3), (2, 2, 13), (3, 0, 1)])
def test_dimension_count_examples(d, n, N):
    assert dimension_count(d, n) == N


def test_dimension_count_matches_enumeration():
    for d in range(1, 5):
        for n in range(0, 7):
            assert dimension_count(d, n) == brute_count(d, n)


@pytest.mark.parametrize("d,n", [(0, 1), (-1, 2), (2, -1)])
def test_dimension_count_rejects_bad_input(d, n):
    with pytest.raises(ValueError):
        dimension_count(d, n)


def test_dimension_count_overflow_is_explicit():
    with pytest.raises(OverflowError):
        dimension_count(40, 200)


def test_index_table_examples():
    assert index_table(PotentialShape(1, 1)) == [
        BasisLabel("const", (0,)), BasisLabel("cos", (1,)), BasisLabel("sin", (1,))]
    labels = [str(b) for b in index_table(PotentialShape(2, 1))]
    assert labels == ["const", "cos(0, 1)", "sin(0, 1)", "cos(1, 0)", "sin(1, 0)"]
    assert len(index_table(PotentialShape(2, 2))) == 13


def test_index_table_covers_representatives_once():
    for d, n in [(1, 4), (2, 3), (3, 2)]:
        t = index_table(PotentialShape(d, n))
        assert len(t) == dimension_count(d, n)
        ms = {lab.m for lab in t[1:]}
        assert len(ms) == (len(t) - 1) // 2
        for m in ms:
            assert tuple(-v for v in m) not in ms
            assert sum(map(abs, m)) <= n


def test_jet_examples():
    V = TrigPolynomial.from_terms(2, 2, 2.0)
    v, g, H = V.evaluate_jet([0.3, 0.7])
    assert v == 2.0 and not g.any() and not H.any()
    V = TrigPolynomial.from_terms(1, 1, cos={(1,): 1.0})
    v, g, H = V.evaluate_jet([0.0])
    assert v == 1.0 and g[0] == 0.0 and H[0, 0] == pytest.approx(-4 * np.pi**2, rel=1e-15)


def test_absent_orders_are_none():
    V = TrigPolynomial.from_terms(1, 1, cos={(1,): 1.0})
    v, g, H = V.evaluate_jet([0.2], order=0)
    assert g is None and H is None
    with pytest.raises(ValueError):
        V.evaluate_jet([0.2], order=3)


def test_from_terms_normalizes_negative_frequencies():
    a = TrigPolynomial.from_terms(2, 1, sin={(-1, 0): 1.0})
    b = TrigPolynomial.from_terms(2, 1, sin={(1, 0): -1.0})
    assert np.array_equal(a.coefficients, b.coefficients)
    x = np.array([0.13, 0.41])
    assert a(x) == pytest.approx(np.sin(-2 * np.pi * 0.13), abs=1e-15)


def fd_grad(V, x, h=1e-5):
    g = np.empty(V.d)
    for j in range(V.d):
        e = np.zeros(V.d)
        e[j] = h
        g[j] = (V.evaluate_jet(x + e, 0)[0] - V.evaluate_jet(x - e, 0)[0]) / (2 * h)
    return g


def fd_hess(V, x, h=1e-5):
    H = np.empty((V.d, V.d))
    for j in range(V.d):
        e = np.zeros(V.d)
        e[j] = h
        H[:, j] = (V.evaluate_jet(x + e, 1)[1] - V.evaluate_jet(x - e, 1)[1]) / (2 * h)
    return H


@pytest.mark.parametrize("d,n", [(1, 3), (2, 2), (3, 2)])
def test_jets_match_finite_differences(d, n, rng):
    for _ in range(20):
        V = random_poly(rng, d, n)
        x = rng.random(d)
        _, g, H = V.evaluate_jet(x)
        assert np.abs(g - fd_grad(V, x)).max() <= 1e-6
        assert np.abs(H - fd_hess(V, x)).max() <= 1e-4
        assert np.array_equal(H, H.T)


@given(d=st.integers(1, 3), n=st.integers(0, 4), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_periodicity(d, n, seed):
    gen = np.random.default_rng(seed)
    V = random_poly(gen, d, n)
    x = gen.random(d)
    v0 = V.evaluate_jet(x, 0)[0]
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        assert abs(V.evaluate_jet(x + e, 0)[0] - v0) <= 1e-12


@given(d=st.integers(1, 3), n=st.integers(0, 4), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_linearity(d, n, seed):
    gen = np.random.default_rng(seed)
    A, B = random_poly(gen, d, n), random_poly(gen, d, n)
    S = TrigPolynomial(A.shape, A.coefficients + B.coefficients)
    x = gen.random((5, d))
    err = np.abs(S(x) - A(x) - B(x)).max()
    assert err <= 1e-12 * (A.l1_norm + B.l1_norm)


def test_shifted_potential(rng):
    V = random_poly(rng, 2, 3)
    t = rng.random(2)
    X = rng.random((50, 2))
    assert np.allclose(V.shifted(t)(X), V(X + t), atol=1e-12)


def test_wrap_and_quotient_metric():
    assert wrap(np.array([-1e-17]))[0] == 0.0
    assert np.all(wrap(np.array([1.5, -0.25, 3.0])) == [0.5, 0.75, 0.0])
    assert torus_distance([0.05, 0.0], [0.95, 0.0]) == pytest.approx(0.1)


def test_coefficients_must_be_finite_and_sized():
    with pytest.raises(ValueError):
        TrigPolynomial(PotentialShape(1, 1), [0.0, np.nan, 0.0])
    with pytest.raises(ValueError):
        TrigPolynomial(PotentialShape(1, 1), [0.0, 1.0])


def test_coefficient_file_round_trip(tmp_path, rng):
    V = random_poly(rng, 2, 2)
    p = tmp_path / "c.json"
    save_coefficients(V, p)
    W = load_coefficients(p)
    assert np.array_equal(V.coefficients, W.coefficients)
    obj = json.loads(p.read_text())
    assert obj["d"] == 2 and obj["n"] == 2 and len(obj["coefficients"]) == 13
    assert dumps_coefficients(W) == p.read_text()


@pytest.mark.parametrize("text,needle", [
    ('{"d": 1, "n": 1, "coefficients": [0, 1', "line 1"),
    ('[1, 2]', "JSON object"),
    ('{"d": 1, "coefficients": [0, 1, 0]}', "'n'"),
    ('{"d": 1, "n": 1, "coefficients": [0, 1]}', "expected 3"),
    ('{"d": 1, "n": 1, "coefficients": [0, "x", 0]}', "coefficients[1]"),
    ('{"d": 0, "n": 1, "coefficients": []}', "'d'"),
    ('{"d": 1.5, "n": 1, "coefficients": []}', "'d'"),
])
def test_coefficient_file_diagnostics(text, needle):
    with pytest.raises(CoefficientFileError, match=None) as exc:
        loads_coefficients(text)
    assert needle in str(exc.value)
