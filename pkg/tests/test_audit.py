import json

import pytest

from ewens_pitman.audit import audit_formulas


@pytest.fixture(scope="module")
def report():
    return audit_formulas(2, 0.0, 1.0)


def verdict(rep, location):
    return rep.find(location).verdict


def test_every_display_is_classified(report):
    assert report.findings
    assert {f.verdict for f in report.findings} <= {"MATCH", "MISMATCH"}
    for f in report.mismatches:
        assert f.location and f.abs_diff > 1e-8
    data = json.loads(report.to_json())
    assert data["counts"]["MISMATCH"] == len(report.mismatches)


def test_known_matches(report):
    assert verdict(report, "Gamma closed form (1,1)") == "MATCH"
    assert verdict(report, "integral identity, prefactor (lam+1)^(b+1)") == "MATCH"
    assert verdict(report, "integral identity at a=b=0, prefactor (lam+1)^(b+1)") == "MATCH"
    assert verdict(report, "quartic expansion coefficient B vanishes") == "MATCH"
    for r in (1, 2, 3):
        assert verdict(report, f"Sigma linear response ({r},{r})") == "MATCH"
    assert verdict(report, "Sigma scaling (2,2), exponent 2alpha+2-i-j") == "MATCH"


def test_known_mismatches(report):
    f = report.find("integral identity at a=b=0, prefactor (lam+1)^b")
    assert f.verdict == "MISMATCH" and f.closed_form_value == pytest.approx(0.5)
    assert verdict(report, "Sigma scaling (2,2), exponent i+j-2-2alpha") == "MISMATCH"
    assert verdict(report, "limit of a_0 along the path, typeset (lam/(lam+x))^(1+alpha)") == "MISMATCH"
    assert verdict(report, "limit of a_0 along the path, (lam/(lam+x))^alpha") == "MATCH"
    assert verdict(report, "Sigma conjugation vs linear response (2,3)") == "MISMATCH"


def test_conjugation_agrees_only_at_11_when_alpha_positive():
    rep = audit_formulas(1, 0.5, 1.0)
    assert verdict(rep, "Sigma conjugation vs linear response (1,1)") == "MATCH"
    assert verdict(rep, "Sigma conjugation vs linear response (1,2)") == "MISMATCH"
    assert verdict(rep, "Sigma conjugation vs linear response (2,2)") == "MISMATCH"
    assert verdict(rep, "Sigma linear response (2,2)") == "MATCH"


def test_text_lists_locations_and_magnitudes(report):
    text = report.to_text()
    for f in report.mismatches:
        assert f.location in text
    assert text.splitlines()[-1].endswith(f"out of {len(report.findings)} comparisons")
