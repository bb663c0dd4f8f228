import pytest

from hmchisq.analysis import bounds_check, build_report, interval, run_methods, sensitivity, two_trials_result
from hmchisq.core import SignificanceSpec
from hmchisq.data_io import parse_csv


def test_methods_present(carvedilol):
    res = run_methods(carvedilol)
    assert set(res) == {
        "harmonic", "fisher", "stouffer", "two_trials", "harmonic_weighted", "stouffer_weighted", "fixed_effects_meta"
    }


def test_without_ses_no_weighted_variants():
    t = parse_csv("id,p_one_sided\na,0.01\nb,0.02\n")
    assert set(run_methods(t)) == {"harmonic", "fisher", "stouffer", "two_trials"}
    with pytest.raises(ValueError):
        run_methods(t, "bogus")


def test_explicit_weights():
    t = parse_csv("id,p_one_sided,weight\na,0.01,1\nb,0.02,4\n")
    res = run_methods(t, "explicit")
    assert res["harmonic_weighted"].p_overall != res["harmonic"].p_overall


def test_two_trials_result():
    r = two_trials_result([0.01, 0.02])
    assert r.p_overall == pytest.approx(0.0004)
    assert r.decide(0.025**2)
    assert not two_trials_result([0.03, 0.001]).decide(0.025**2)


def test_sensitivity_factor_one(carvedilol):
    rows = sensitivity(carvedilol, "223", 1.0)
    assert all(r["factor"] == pytest.approx(1.0) for r in rows.values())


def test_bounds_check(carvedilol):
    b = bounds_check(carvedilol)
    spec = SignificanceSpec(0.025**2, 5)
    assert b["c_H"] == pytest.approx(spec.c_H)
    assert b["necessary"] == pytest.approx(0.32, abs=0.005)
    assert b["studies"]["220"]["below_sufficient"]
    # 0.2575 sits between the sufficient (0.15) and necessary (0.32) bounds
    assert b["studies"]["239"]["below_necessary"] and not b["studies"]["239"]["below_sufficient"]


def test_interval_scales(carvedilol):
    log = interval(carvedilol, 0.95, "inverse_variance")
    hr = interval(carvedilol, 0.95, "inverse_variance", "hr")
    assert hr.lower == pytest.approx(2.718281828 ** log.lower)


def test_report(carvedilol):
    rep = build_report(carvedilol, weights="inverse_variance", perturb=("223", 2.0))
    assert rep.settings["perturb"] == {"study": "223", "factor": 2.0}
    assert "sensitivity" in rep.results
    assert rep.dataset["n"] == 5
