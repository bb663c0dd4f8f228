import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmchisq.core import Inequality
from hmchisq.data_io import (
    AnalysisReport,
    CsvFormatError,
    StudyRecord,
    StudyTable,
    canonical_json,
    carvedilol_dataset,
    dump_csv,
    load_csv,
    load_dataset,
    parse_csv,
    read_report,
    se_from_ci,
    wald_p_one_sided,
    write_csv,
    write_report,
)
from hmchisq.numerics import normal_quantile

CARVEDILOL_SHA256 = "a4e9e5233d71bf866881e143cd73b96d16ea8e928f845042c17edd04895b1261"


class TestCarvedilol:
    def test_contents(self, carvedilol):
        assert carvedilol.ids == ["220", "240", "223", "221", "239"]
        assert carvedilol.pvalues == [0.00025, 0.0245, 0.128, 0.1305, 0.2575]
        assert carvedilol.benefit_direction == "negative"

    def test_pinned_hash(self, carvedilol):
        assert carvedilol.sha256() == CARVEDILOL_SHA256

    def test_packaged_csv_matches(self):
        from importlib.resources import files

        path = files("hmchisq") / "data" / "carvedilol.csv"
        assert load_csv(path) == carvedilol_dataset()

    def test_load_dataset(self):
        assert load_dataset("carvedilol") == carvedilol_dataset()
        with pytest.raises(ValueError, match="available"):
            load_dataset("nope")

    def test_reconstructed_effects_follow_benefit(self, carvedilol):
        eff = carvedilol.reconstructed_effects()
        assert all(e < 0 for e in eff)
        # z * se for study 220
        assert eff[0] == pytest.approx(-normal_quantile(1 - 0.00025) * 0.41)


class TestReconstruction:
    def test_se_from_ci(self):
        assert se_from_ci(0.04, 1.14) == pytest.approx(0.85, abs=0.01)
        expected = (math.log(1.14) - math.log(0.04)) / (2 * normal_quantile(0.975))
        assert se_from_ci(0.04, 1.14) == pytest.approx(expected, rel=1e-12)

    def test_wald(self):
        assert wald_p_one_sided(-1.51, 0.85) == pytest.approx(0.038, abs=0.002)
        assert wald_p_one_sided(1.51, 0.85, "positive") == pytest.approx(wald_p_one_sided(-1.51, 0.85))

    @pytest.mark.parametrize("args", [(1.0, 0.5), (0.0, 1.0), (0.5, 1.0, 1.0)])
    def test_se_from_ci_validation(self, args):
        with pytest.raises(ValueError):
            se_from_ci(*args)

    def test_wald_validation(self):
        with pytest.raises(ValueError):
            wald_p_one_sided(1.0, 0.0)
        with pytest.raises(ValueError):
            wald_p_one_sided(1.0, 1.0, "up")

    def test_record_from_ci(self):
        r = StudyRecord("x", ci_lower=0.04, ci_upper=1.14)
        assert r.standard_error() == pytest.approx(se_from_ci(0.04, 1.14))
        assert r.point_effect() == pytest.approx(0.5 * (math.log(0.04) + math.log(1.14)))
        # a table can be built from a CI alone
        t = StudyTable((r,), benefit_direction="negative")
        assert 0 < t.pvalues[0] < 0.5


class TestCsv:
    def test_round_trip(self, carvedilol, tmp_path):
        path = tmp_path / "c.csv"
        write_csv(carvedilol, path)
        back = load_csv(path)
        assert back == carvedilol
        assert back.source == str(path)
        assert dump_csv(back) == dump_csv(carvedilol)

    def test_extra_columns_kept(self):
        t = parse_csv("id,p_one_sided,site\na,0.01,Basel\nb,0.2,Zurich\n")
        assert dict(t.row("a").extra) == {"site": "Basel"}
        assert "site" in dump_csv(t).splitlines()[0]
        assert parse_csv(dump_csv(t)) == t

    def test_missing_values(self):
        t = parse_csv("id,p_one_sided,se\na,0.01,NA\nb,0.2,\n")
        assert t.ses == [None, None]

    @pytest.mark.parametrize(
        "text, match",
        [
            ("", "empty"),
            ("p_one_sided\n0.1\n", "'id'"),
            ("id,p_one_sided\n", "no studies"),
            ("id,p_one_sided\na,0.1\na,0.2\n", "duplicate"),
            ("id,p_one_sided\na,abc\n", r":2: column 'p_one_sided'"),
            ("id,p_one_sided\na,0.1\nb,1.5\n", r":3: column 'p_one_sided'"),
            ("id,p_one_sided\na,0.1,3\n", "expected 2 fields"),
            ("id,p_one_sided,sample_size\na,0.1,x\n", "sample size"),
            ("id,p_one_sided,benefit_direction\na,0.1,up\n", "benefit_direction"),
            ("id,p_one_sided,benefit_direction\na,0.1,positive\nb,0.1,negative\n", "same for every row"),
            ("id,se\na,0.1\n", "need a p-value"),
            ("id,p_one_sided\n,0.1\n", "id is required"),
            ("id,p_one_sided\na,inf\n", "finite"),
        ],
    )
    def test_errors(self, text, match):
        with pytest.raises(CsvFormatError, match=match):
            parse_csv(text, source="t.csv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_csv(tmp_path / "missing.csv")

    @given(st.lists(st.floats(1e-9, 1 - 1e-9), min_size=1, max_size=6), st.lists(st.floats(0.01, 5), min_size=6, max_size=6))
    def test_round_trip_property(self, ps, ses):
        rows = tuple(StudyRecord(str(i), p_one_sided=p, se=s) for i, (p, s) in enumerate(zip(ps, ses)))
        t = StudyTable(rows)
        assert parse_csv(dump_csv(t)) == t


class TestTable:
    def test_perturb(self, carvedilol):
        t = carvedilol.perturb("223", 2.0)
        assert t.row("223").p_one_sided == pytest.approx(0.256)
        assert t.row("223").se == 0.29
        assert t.row("223").effect == pytest.approx(-normal_quantile(1 - 0.256) * 0.29)
        assert carvedilol.perturb("223", 1) is carvedilol
        with pytest.raises(ValueError):
            carvedilol.perturb("223", 10.0)
        with pytest.raises(KeyError):
            carvedilol.perturb("999", 2.0)

    def test_weight_modes(self, carvedilol):
        s = carvedilol.to_study_set("inverse_variance")
        assert s.weights[0] == pytest.approx(1 / 0.41**2)
        with pytest.raises(ValueError, match="explicit"):
            carvedilol.to_study_set("explicit")
        with pytest.raises(ValueError):
            carvedilol.to_study_set("bogus")
        with pytest.raises(ValueError):
            carvedilol.to_study_set(effects="bogus")

    def test_validation(self):
        with pytest.raises(ValueError):
            StudyTable(())
        with pytest.raises(ValueError):
            StudyTable((StudyRecord("a", 0.1),), benefit_direction="up")

    def test_equality_ignores_source(self, carvedilol):
        other = StudyTable(carvedilol.rows, "elsewhere", "negative")
        assert other == carvedilol and hash(other) == hash(carvedilol)


class TestReport:
    def test_round_trip(self, tmp_path):
        rep = AnalysisReport(
            dataset={"n": 2},
            settings={"alpha_H": 0.025**2},
            results={"harmonic": {"p": 0.000484123456789, "ineq": Inequality(0.25)}},
            ci={"0.95": {"hr": [0.2153, 0.7375]}},
        )
        assert rep.results["harmonic"]["p"] == 0.000484123
        path = tmp_path / "r.json"
        write_report(rep, path)
        back = read_report(path)
        assert back == rep
        assert back.results["harmonic"]["ineq"] == Inequality(0.25)
        assert json.loads(path.read_text())["results"]["harmonic"]["ineq"] == {"gt": 0.25}

    def test_canonical_text_is_stable(self):
        a = canonical_json({"b": 1.0, "a": [0.1 + 0.2]})
        b = canonical_json({"a": [0.3], "b": 1.0})
        assert a == b

    def test_unknown_keys(self):
        with pytest.raises(ValueError):
            AnalysisReport.from_dict({"bogus": 1})

    def test_non_finite(self):
        d = json.loads(canonical_json({"x": float("nan"), "y": float("inf")}))
        assert d == {"x": None, "y": "inf"}
