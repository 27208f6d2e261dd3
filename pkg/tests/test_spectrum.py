import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigvalsh_tridiagonal

from conftest import cos1
from qpgen import spectrum as S
from qpgen.kernels import get_backend
from qpgen.morse import critical_value_range
from qpgen.potential import PotentialShape, TrigPolynomial
from qpgen.survey import Distribution, sample_coefficients

GOLDEN = (math.sqrt(5) - 1) / 2


def tri(diag, off=None):
    diag = np.asarray(diag, dtype=float)
    return S.Tridiagonal(diag, -np.ones(len(diag) - 1) if off is None else off)


def test_diophantine_examples():
    assert S.diophantine_check([GOLDEN], c=0.2, tau=2, M=50).passed
    r = S.diophantine_check([0.5], c=1e-9, M=2)
    assert not r.passed and r.worst_m == (2,) and r.worst_value == 0.0
    r = S.diophantine_check([math.sqrt(2) - 1, math.sqrt(3) - 1], c=0.05, tau=3, M=30)
    assert r.passed and r.tau == 3


def test_diophantine_worst_is_the_direct_scan_minimum():
    om = np.array([0.3141, 0.2718])
    r = S.diophantine_check(om, c=0.05, M=12)
    best = min(
        (abs(a * om[0] + b * om[1] - round(a * om[0] + b * om[1])) * (abs(a) + abs(b)) ** 3, (a, b))
        for a in range(-12, 13) for b in range(-12, 13)
        if 0 < abs(a) + abs(b) <= 12 and (a > 0 or (a == 0 and b > 0)))
    assert r.worst_ratio == pytest.approx(best[0], rel=1e-12) and r.worst_m == best[1]
    with pytest.raises(ValueError):
        S.diophantine_check(om, M=0)


def test_operator_config_validation():
    V = cos1()
    with pytest.raises(S.DiophantineError):
        S.OperatorConfig(V, [0.5], 1.0)
    with pytest.raises(ValueError):
        S.OperatorConfig(V, [1.2], 1.0)
    with pytest.raises(ValueError):
        S.OperatorConfig(V, [GOLDEN], -1.0)
    with pytest.raises(ValueError):
        S.OperatorConfig(V, [GOLDEN, 0.3], 1.0)


def test_build_truncation_examples():
    V = cos1()
    T = S.build_truncation(S.OperatorConfig(V, [GOLDEN], 0.0), 5)
    assert not T.diag.any() and np.all(T.offdiag == -1)
    one = TrigPolynomial.from_terms(1, 1, 1.0)
    T = S.build_truncation(S.OperatorConfig(one, [GOLDEN], 3.0), 4)
    assert np.all(T.diag == 3.0)
    cfg = S.OperatorConfig(V, [0.25], 1.0, require_diophantine=False)
    T = S.build_truncation(cfg, 4)
    assert np.allclose(T.diag, [1, 0, -1, 0], atol=1e-15)
    with pytest.raises(ValueError):
        S.build_truncation(cfg, 1)


def test_small_eigenvalues():
    ev = S.eigenvalues_tridiagonal(tri([0, 0, 0]))
    assert np.allclose(ev, [-math.sqrt(2), 0, math.sqrt(2)], atol=1e-12)
    assert S.eigenvalues_tridiagonal(tri([4.5], np.zeros(0)))[0] == 4.5


def test_free_laplacian_closed_form():
    L = 1000
    ev = S.eigenvalues_tridiagonal(tri(np.zeros(L)))
    ref = np.sort(-2 * np.cos(np.arange(1, L + 1) * np.pi / (L + 1)))
    assert np.abs(ev - ref).max() <= 1e-10


@given(seed=st.integers(0, 2**32 - 1), L=st.integers(2, 80), scale=st.floats(0.01, 50))
@settings(max_examples=40, deadline=None)
def test_against_lapack_and_trace(seed, L, scale):
    gen = np.random.default_rng(seed)
    d = scale * gen.standard_normal(L)
    e = gen.standard_normal(L - 1)
    ev = S.eigenvalues_tridiagonal(S.Tridiagonal(d, e))
    tol = 1e-10 * (np.abs(d).max() + 2 * np.abs(e).max())
    assert np.abs(ev - eigvalsh_tridiagonal(d, e)).max() <= tol
    assert abs(ev.sum() - d.sum()) <= 1e-9 * L * (np.abs(d).max() + 2)
    assert np.all(np.diff(ev) >= 0)


@given(seed=st.integers(0, 2**32 - 1), L=st.integers(3, 60))
@settings(max_examples=40, deadline=None)
def test_cauchy_interlacing(seed, L):
    gen = np.random.default_rng(seed)
    d = 3 * gen.standard_normal(L)
    T = tri(d)
    full = S.eigenvalues_tridiagonal(T)
    sub = S.eigenvalues_tridiagonal(tri(d[:-1]))
    assert np.all(full[:-1] <= sub + 1e-9) and np.all(sub <= full[1:] + 1e-9)


def test_sturm_count():
    T = tri(np.zeros(10))
    ev = S.eigenvalues_tridiagonal(T)
    for k in range(10):
        assert S.sturm_count(T, ev[k] + 1e-6) == k + 1


def test_bisection_backends_bit_identical(rng):
    d = 5 * np.cos(2 * np.pi * rng.random(300))
    T = tri(d)
    args = S._bisection_setup(T)
    a = get_backend("numba").bisect_eigenvalues(T.diag, *args)
    b = get_backend("numpy").bisect_eigenvalues(T.diag, *args)
    assert np.array_equal(a, b)
    for name in ("numba", "numpy"):
        assert get_backend(name).sturm_count(T.diag, T.offdiag, 0.1, args[3]) == S.sturm_count(T, 0.1)


def test_spectral_bounds_and_shift_covariance():
    V = sample_coefficients(PotentialShape(1, 3), Distribution(), 6)
    lo, hi = critical_value_range(V)
    lam, mu = 2.5, 0.75
    cfg = S.OperatorConfig(V, [GOLDEN], lam)
    est = S.approximate_spectrum(cfg, 200, 4, seed=1)
    assert est.eigenvalues[0] >= lam * lo - 2 - 1e-9 and est.eigenvalues[-1] <= lam * hi + 2 + 1e-9
    c = V.coefficients.copy()
    c[0] += mu
    est2 = S.approximate_spectrum(S.OperatorConfig(TrigPolynomial(V.shape, c), [GOLDEN], lam),
                                  200, 4, seed=1)
    assert np.abs(est2.eigenvalues - est.eigenvalues - lam * mu).max() <= 1e-9


def test_free_union_spectrum():
    est = S.approximate_spectrum(S.OperatorConfig(cos1(), [GOLDEN], 0.0), 500, 20, seed=3)
    assert est.eigenvalues.min() >= -2 and est.eigenvalues.max() <= 2
    assert abs(est.eigenvalues.min() + 2) < 1e-4 and abs(est.eigenvalues.max() - 2) < 1e-4


def test_single_phase_is_one_truncation():
    cfg = S.OperatorConfig(cos1(), [GOLDEN], 2.0)
    est = S.approximate_spectrum(cfg, 100, 1, seed=4)
    x0 = est.phase_points[0]
    ref = S.eigenvalues_tridiagonal(S.build_truncation(cfg, 100, x0))
    assert np.array_equal(est.eigenvalues, ref)


def test_constant_potential_shift():
    one = TrigPolynomial.from_terms(1, 1, 1.0)
    est = S.approximate_spectrum(S.OperatorConfig(one, [GOLDEN], 3.0), 100, 3)
    assert est.eigenvalues.min() >= 1 and est.eigenvalues.max() <= 5


def test_threads_do_not_change_results():
    cfg = S.OperatorConfig(cos1(), [GOLDEN], 2.0)
    a = S.approximate_spectrum(cfg, 200, 6, seed=1)
    b = S.approximate_spectrum(cfg, 200, 6, seed=1, threads=3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_orbit_mode():
    cfg = S.OperatorConfig(cos1(), [GOLDEN], 1.0)
    est = S.approximate_spectrum(cfg, 50, 4, mode="orbit")
    assert est.eigenvalues.size == 200 and len(est.per_phase) == 1
    with pytest.raises(ValueError):
        S.approximate_spectrum(cfg, 50, 4, mode="nope")
    with pytest.raises(ValueError):
        S.approximate_spectrum(cfg, 50, 0)


def test_detect_gaps_examples():
    gaps, interval = S.detect_gaps([0, 0.1, 0.2, 1.0, 1.1], 0.5)
    assert not interval and len(gaps) == 1
    l, r, w = gaps[0]
    assert (l, r) == (0.2, 1.0) and w == pytest.approx(0.8)
    with pytest.raises(ValueError):
        S.detect_gaps([1.0], 0.1)
    with pytest.raises(ValueError):
        S.detect_gaps([1.0, 2.0], 0.0)


def test_gap_invariants_raw_mode():
    cfg = S.OperatorConfig(cos1(), [GOLDEN], 5.0)
    est = S.analyze_gaps(S.approximate_spectrum(cfg, 300, 6, seed=2), 0.1, boundary_filter="none")
    lo, hi = est.eigenvalues[0], est.eigenvalues[-1]
    for l, r, w in est.gaps:
        assert lo < l < r < hi and w > est.resolution
    assert est.is_interval == (not est.gaps)


def covered(gaps, point):
    return any(l < point < r for l, r, _ in gaps)


def test_phase_union_monotonicity_raw_mode():
    cfg = S.OperatorConfig(cos1(), [GOLDEN], 5.0)
    big = S.approximate_spectrum(cfg, 300, 8, seed=2)
    small = S.SpectrumEstimate(np.sort(np.concatenate(big.per_phase[:4])), 300, 4,
                               big.per_phase[:4])
    g_small, _ = S.detect_gaps(small.eigenvalues, 0.1)
    g_big, _ = S.detect_gaps(big.eigenvalues, 0.1)
    assert set(small.eigenvalues) <= set(big.eigenvalues)
    # every gap of the larger union sits inside a gap of the smaller one
    for l, r, _ in g_big:
        assert any(a <= l and r <= b for a, b, _ in g_small)


def test_consensus_filter_drops_isolated_states():
    per = [np.array([0.0, 0.01, 0.02, 1.0, 1.01]) for _ in range(9)]
    per.append(np.array([0.0, 0.01, 0.5, 1.0, 1.01]))  # one phase with a boundary state at 0.5
    kept = S.phase_consensus(per, 0.1)
    assert 0.5 not in kept
    est = S.analyze_gaps(S.SpectrumEstimate(np.sort(np.concatenate(per)), 100, 10, per), 0.1)
    assert len(est.gaps) == 1 and est.gaps[0][:2] == (0.02, 1.0)
    raw = S.analyze_gaps(S.SpectrumEstimate(np.sort(np.concatenate(per)), 100, 10, per), 0.1,
                         boundary_filter="none")
    assert len(raw.gaps) == 2


def test_default_resolution():
    est = S.approximate_spectrum(S.OperatorConfig(cos1(), [GOLDEN], 0.0), 100, 2)
    assert S.default_resolution(est) == pytest.approx(10 * est.width / 100)
    assert S.default_resolution(est, floor=5.0) == 5.0


def test_exports(tmp_path):
    cfg = S.OperatorConfig(cos1(), [GOLDEN], 5.0)
    est = S.analyze_gaps(S.approximate_spectrum(cfg, 60, 3), 0.1)
    S.write_spectrum_csv(est, tmp_path / "s.csv")
    S.write_gap_report(est, cfg, tmp_path / "g.json")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["phase_index", "eigenvalue_index", "eigenvalue"] and len(rows) == 181
    rep = json.loads((tmp_path / "g.json").read_text())
    for key in ("gaps", "is_interval", "L", "phases", "resolution", "lambda", "omega"):
        assert key in rep
