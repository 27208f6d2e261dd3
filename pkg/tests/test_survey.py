import csv
import io

import numpy as np
import pytest

from conftest import cos1, cos_cos, degenerate_1d
from qpgen.cartan import SweepGrids
from qpgen.potential import PotentialShape, TrigPolynomial
from qpgen import survey as S

FAST = S.ClassifyOptions(K_list=(2, 3, 4), grids=SweepGrids(9, 8, 8), samples=20_000)
SHAPE = PotentialShape(2, 2)


def test_sampling_is_deterministic():
    for dist in (S.Distribution("gaussian", 2.0), S.Distribution("uniform_ball", 1.5)):
        a = S.sample_coefficients(SHAPE, dist, 99)
        b = S.sample_coefficients(SHAPE, dist, 99)
        assert a.coefficients.tobytes() == b.coefficients.tobytes()


def test_gaussian_means():
    X = np.array([S.sample_coefficients(SHAPE, S.Distribution(), s).coefficients
                  for s in range(10_000)])
    assert np.abs(X.mean(axis=0)).max() <= 4 / np.sqrt(10_000)
    assert np.allclose(X.std(axis=0), 1.0, atol=0.05)


def test_uniform_ball_support_and_radius_law():
    R = 1.0
    norms = np.array([np.linalg.norm(S.sample_coefficients(SHAPE, S.Distribution("uniform_ball", R),
                                                           s).coefficients)
                      for s in range(2000)])
    assert norms.max() <= R
    # P(|c| <= r) = r^N
    assert np.mean(norms <= 0.9) == pytest.approx(0.9**13, abs=0.03)


def test_distribution_validation():
    with pytest.raises(ValueError):
        S.Distribution("gaussian", 0.0)
    with pytest.raises(ValueError):
        S.Distribution("cauchy", 1.0)


def test_combine():
    assert S.combine(["pass", "pass", "not_applicable"]) == "pass"
    assert S.combine(["pass", "inconclusive"]) == "inconclusive"
    assert S.combine(["inconclusive", "fail"]) == "fail"
    assert S.combine(["pass", "not_run"]) == "inconclusive"


def test_classify_cos_cos():
    # a 4x4 shift grid contains h = (1/2, 1/2)
    rep = S.classify_potential(cos_cos(), S.ClassifyOptions(
        K_list=(2, 3, 4), grids=SweepGrids(16, 8, 8), samples=20_000))
    assert rep.conditions["morse"] == "pass"
    assert rep.conditions["extrema"] == "pass"
    assert rep.conditions["cartan4"] == "pass"
    # h = (1/2, 1/2) maps V to -V, so the condition-3 determinant vanishes identically
    assert rep.conditions["cartan3"] == "fail"
    assert rep.in_class_G == "fail"


def test_classify_cos_4pi():
    rep = S.classify_potential(cos1(2), FAST)
    assert rep.conditions["extrema"] == "fail"
    assert rep.conditions["cartan3"] == "not_applicable"
    assert rep.in_class_G == "fail"


def test_classify_zero_vector():
    rep = S.classify_potential(TrigPolynomial(SHAPE, np.zeros(13)), FAST)
    assert rep.in_class_G == "fail" and "constant" in rep.reasons[0]


def test_classify_generic_sample_passes():
    V = S.sample_coefficients(SHAPE, S.Distribution(), 5)
    rep = S.classify_potential(V, FAST)
    assert rep.in_class_G in ("pass", "inconclusive")
    assert rep.to_dict()["coefficient_ref"] == rep.coefficient_ref


def test_classify_without_cartan_is_never_pass():
    rep = S.classify_potential(cos1(), S.ClassifyOptions(cartan=False))
    assert rep.conditions["morse"] == "pass" and rep.in_class_G == "inconclusive"


def test_survey_rejects_empty():
    with pytest.raises(ValueError):
        S.SurveyConfig(SHAPE, sample_count=0)


def test_survey_rows_and_aggregates():
    cfg = S.SurveyConfig(SHAPE, sample_count=12, master_seed=3, classify=FAST)
    res = S.run_survey(cfg)
    rows = list(csv.reader(io.StringIO(res.csv_text())))
    assert tuple(rows[0]) == S.CSV_COLUMNS and len(rows) == 13
    assert sum(res.counts.values()) == 12
    assert res.fraction_pass + res.fraction_fail <= 1
    assert res.manifest["master_seed"] == 3 and "start" in res.manifest


def test_survey_deterministic_and_thread_independent():
    cfg = S.SurveyConfig(SHAPE, sample_count=6, master_seed=11, classify=FAST)
    a = S.run_survey(cfg).csv_text()
    assert S.run_survey(cfg).csv_text() == a
    assert S.run_survey(cfg, threads=3).csv_text() == a


def test_survey_errors_are_recorded(monkeypatch):
    real = S.classify_potential

    def flaky(V, opts=None):
        if V.coefficients[0] > 0:
            raise RuntimeError("boom")
        return real(V, opts)

    monkeypatch.setattr(S, "classify_potential", flaky)
    cfg = S.SurveyConfig(SHAPE, sample_count=8, master_seed=1,
                         classify=S.ClassifyOptions(cartan=False))
    res = S.run_survey(cfg)
    errs = [r for r in res.rows if r["error"]]
    assert errs and all("boom" in r["error"] for r in errs)
    assert res.errors == len(errs) and sum(res.counts.values()) == 8


def test_survey_with_spectrum_column():
    cfg = S.SurveyConfig(PotentialShape(1, 2), sample_count=2, classify=S.ClassifyOptions(cartan=False),
                         spectrum=S.SpectrumOptions(lam=5.0, omega=(0.6180339887498949,), L=100,
                                                    phases=3, resolution=0.2))
    res = S.run_survey(cfg)
    assert "spectrum_is_interval" in res.columns
    assert all(r["spectrum_is_interval"] in (True, False) for r in res.rows)


def test_line_slice_preconditions():
    with pytest.raises(ValueError):
        S.line_slice(cos1(2), cos1(1, n=2), 5)
    with pytest.raises(ValueError):
        S.line_slice(cos1(2), cos_cos(), 20)


def test_line_slice_constant_path():
    r = S.line_slice(cos1(2), cos1(2), 10)
    assert r.failing.all()
    r = S.line_slice(cos1(1, n=2), cos1(1, n=2), 10)
    assert not r.failing.any() and r.refined == []


def test_symmetric_path_keeps_tied_minima():
    # (1-t) cos 4 pi x + t cos 2 pi x is even in x: its minima stay a tied
    # pair at x and 1-x until x = 1/2 becomes the minimum (t > 0.8)
    r = S.line_slice(cos1(2), cos1(1, n=2), 20)
    assert r.failing_parameters == [k / 20 for k in range(17)]


@pytest.mark.parametrize("start", [cos1(2), degenerate_1d()])
def test_line_slice_isolated_failure(start):
    end = S.sample_coefficients(start.shape, S.Distribution(), 77)
    r = S.line_slice(start, end, 100)
    assert r.failing_parameters == [0.0]
    assert r.failing_fraction <= 2 / 100
    for g, f in r.brackets:
        assert abs(g - f) <= 1e-6
    assert r.refined[0][0] == 0.0
