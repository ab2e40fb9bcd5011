import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dirkstab.stability import (
    ConditionInapplicable,
    EnergyCoefficients,
    UnsupportedStageCount,
    analysis_report,
    certify,
    energy_coefficients,
    extrapolation_weights,
    extrapolation_weights_closed_form,
    format_report,
    kappa_analysis,
    quadratic_form,
    row_echelon_rank,
    sufficient_nonnegativity_check,
)
from dirkstab.tableau import CATALOG_IDS, ButcherTableau, catalog

from oracles import (
    ALEXANDER22_GAMMA,
    ALEXANDER22_Q,
    ALEXANDER22_SPECTRUM,
    ALEXANDER33,
    NORSETT1,
    NOT_REMARKABLE,
    REMARKABLE,
    TWO_STAGE,
    r2,
    r3,
)


# ---------------------------------------------------------------- strategies

_entry = st.floats(-2.0, 2.0, allow_nan=False)
_diag = st.floats(0.05, 2.0, allow_nan=False)


@st.composite
def dirk_tableaus(draw, stages=(2, 3)):
    s = draw(st.sampled_from(stages))
    A = np.zeros((s, s))
    for i in range(s):
        A[i, i] = draw(_diag)
        for j in range(i):
            A[i, j] = draw(_entry)
    b = np.array([draw(_entry) for _ in range(s)])
    # keep closed forms meaningful in double precision
    assume(np.linalg.cond(A) < 1e6)
    return ButcherTableau(A, b, A.sum(axis=1))


# ---------------------------------------------------------------- lambda

def test_alexander22_lambda():
    assert np.allclose(extrapolation_weights(catalog("alexander22")), [0.0, 1.0], atol=1e-15)


def test_crouzeix_lambda():
    lam = extrapolation_weights(catalog("crouzeix23"))
    assert np.allclose(lam, [3 * r3 / 2 - 1.5, 1.5 - r3 / 2], atol=1e-14)


def test_diagonal_lambda():
    a = 0.37
    t = ButcherTableau(np.diag([a, a]), [a, a], [a, a])
    assert np.allclose(extrapolation_weights(t), [1.0, 1.0], atol=1e-15)


@settings(max_examples=1000, deadline=None)
@given(dirk_tableaus())
def test_lambda_closed_form_agreement(t):
    lam = extrapolation_weights(t)
    assert np.max(np.abs(lam @ t.A - t.b)) < 1e-12 * max(1.0, np.max(np.abs(lam)))
    closed = extrapolation_weights_closed_form(t)
    assert np.max(np.abs(lam - closed)) <= 1e-13 * max(1.0, float(np.max(np.abs(lam))))


def test_lambda_for_larger_s():
    A = np.tril(np.full((4, 4), 0.1)) + np.diag([0.3, 0.4, 0.5, 0.6])
    t = ButcherTableau(A, [0.25] * 4, A.sum(axis=1))
    lam = extrapolation_weights(t)
    assert np.allclose(lam @ A, t.b, atol=1e-14)


# ---------------------------------------------------------------- coefficients

@pytest.mark.parametrize("sid", sorted(TWO_STAGE))
def test_two_stage_coefficients(sid):
    ref = TWO_STAGE[sid]
    t = catalog(sid)
    c = energy_coefficients(t)
    assert np.allclose(c.lam, ref["lam"], atol=1e-12, rtol=0)
    assert np.allclose(c.delta, ref["delta"], atol=1e-12, rtol=0)
    assert np.allclose(c.nu_diag, ref["nu_diag"], atol=1e-12, rtol=0)
    assert c.nu_offdiag[(1, 2)] == pytest.approx(ref["nu12"], abs=1e-12)
    assert np.allclose(c.nu, ref["nu"], atol=1e-12, rtol=0)
    if "nu12_over_a11" in ref:
        ratio = c.nu_offdiag[(1, 2)] / t.A[0, 0]
        assert ratio == pytest.approx(ref["nu12_over_a11"], abs=1e-12)
        assert 2 * math.sqrt(c.delta[0] * c.delta[1]) == pytest.approx(ref["two_sqrt_delta"], abs=1e-12)


def test_norsett1_twenty_digit_table():
    c = energy_coefficients(catalog("norsett34", 1))
    assert np.allclose(c.lam, NORSETT1["lam"], atol=1e-12, rtol=0)
    assert np.allclose(c.delta, NORSETT1["delta"], atol=1e-12, rtol=0)
    assert np.allclose(c.nu_diag, NORSETT1["nu_diag"], atol=1e-12, rtol=0)
    for key, val in NORSETT1["nu_offdiag"].items():
        assert c.nu_offdiag[key] == pytest.approx(val, abs=1e-12)
    # aggregated weights are printed truncated to five decimals
    assert np.allclose(c.nu, NORSETT1["nu_approx"], atol=1e-5)


def test_alexander33_coefficients():
    c = energy_coefficients(catalog("alexander33"))
    assert np.allclose(c.lam, ALEXANDER33["lam"], atol=1e-12)
    assert np.allclose(c.delta, ALEXANDER33["delta"], atol=1e-12)
    # printed to six decimals, truncated
    assert np.allclose(c.nu_diag, ALEXANDER33["nu_diag_approx"], atol=1e-6)
    for key, val in ALEXANDER33["nu_offdiag_approx"].items():
        assert c.nu_offdiag[key] == pytest.approx(val, abs=1e-6)
    assert np.allclose(c.nu, ALEXANDER33["nu_approx"], atol=1e-6)


@settings(max_examples=300, deadline=None)
@given(dirk_tableaus())
def test_nu_sum_equals_b_sum(t):
    c = energy_coefficients(t)
    scale = max(1.0, float(np.max(np.abs(c.nu_diag))), max(abs(v) for v in c.nu_offdiag.values()))
    assert abs(c.nu_total - t.b.sum()) <= 1e-11 * scale
    assert abs(c.nu.sum() - t.b.sum()) <= 1e-11 * scale


@pytest.mark.parametrize("sid", CATALOG_IDS)
def test_catalog_nu_sum(sid):
    t = catalog(sid)
    c = energy_coefficients(t)
    assert c.nu_total == pytest.approx(t.b.sum(), abs=1e-12)
    assert c.nu.sum() == pytest.approx(t.b.sum(), abs=1e-12)


def test_unsupported_stage_count():
    t = ButcherTableau(np.eye(4) * 0.5, [0.25] * 4, [0.5] * 4)
    for fn in (energy_coefficients, quadratic_form, certify, analysis_report):
        with pytest.raises(UnsupportedStageCount, match="unsupported stage count"):
            fn(t)
    with pytest.raises(UnsupportedStageCount):
        energy_coefficients(ButcherTableau([[1.0]], [1.0], [1.0]))


# ---------------------------------------------------------------- Q

def test_alexander22_gram_matrix_and_spectrum():
    qf = quadratic_form(catalog("alexander22"))
    assert np.allclose(qf.q, ALEXANDER22_Q, atol=1e-14)
    assert np.allclose(qf.eigenvalues, ALEXANDER22_SPECTRUM, atol=1e-10)
    assert not qf.nonnegative


def test_norsett1_rank_one():
    qf = quadratic_form(catalog("norsett34", 1))
    assert qf.rank_zero_count == 3
    assert qf.eigen_zero_count == 3
    assert qf.eigenvalues[-1] == pytest.approx(0.564309, abs=1e-5)
    assert qf.nonnegative


def test_zero_weights_give_zero_form():
    t = ButcherTableau([[0.5, 0.0], [0.2, 0.4]], [0.0, 0.0], [0.5, 0.6])
    qf = quadratic_form(t)
    assert np.all(qf.q == 0.0)
    assert qf.rank_zero_count == 3


@pytest.mark.parametrize("sid", CATALOG_IDS)
def test_q_symmetric_with_zero_row_sums(sid):
    qf = quadratic_form(catalog(sid))
    assert np.max(np.abs(qf.q - qf.q.T)) <= 1e-14
    assert np.max(np.abs(qf.q.sum(axis=1))) <= 1e-12
    assert np.all(np.diff(qf.eigenvalues) >= 0)


@settings(max_examples=300, deadline=None)
@given(dirk_tableaus(), st.integers(0, 2**32 - 1))
def test_q_difference_form(t, seed):
    qf = quadratic_form(t)
    X = np.random.default_rng(seed).standard_normal((t.s + 1, 5))
    direct = qf.evaluate(X)
    incr = qf.evaluate_increments(X)
    scale = max(1.0, float(np.max(np.abs(qf.q)))) * float(np.sum(X * X))
    assert abs(direct - incr) <= 1e-12 * scale
    # invariance under a common shift
    shifted = qf.evaluate(X + X[0])
    assert abs(shifted - direct) <= 1e-11 * scale * 4


@pytest.mark.parametrize("sid", sorted(REMARKABLE))
def test_remarkable_implies_dissipative(sid):
    qf = quadratic_form(catalog(sid))
    rng = np.random.default_rng(7)
    for _ in range(500):
        X = rng.standard_normal((qf.size, 6)) * 10 ** rng.uniform(-3, 3)
        scale = float(np.sum(X * X))
        assert qf.evaluate(X) >= -1e-10 * scale


def test_row_echelon_rank():
    assert row_echelon_rank(np.zeros((3, 3)), 1e-10) == 0
    assert row_echelon_rank(np.eye(3), 1e-10) == 3
    v = np.array([1.0, 2.0, -3.0])
    assert row_echelon_rank(np.outer(v, v), 1e-10) == 1


# ---------------------------------------------------------------- sufficient test

def test_sufficient_condition_equality_cases():
    for sid in ("butcher_burrage22-minus", "butcher_burrage22-plus", "crouzeix23"):
        t = catalog(sid)
        assert sufficient_nonnegativity_check(energy_coefficients(t), t)


def test_sufficient_condition_fails():
    t = catalog("crouzeix23")
    fake = EnergyCoefficients(2, np.zeros(2), np.array([1.0, 1.0]), np.zeros(2), {(1, 2): 3.0 * t.A[0, 0]}, np.zeros(2))
    assert not sufficient_nonnegativity_check(fake, t)


def test_sufficient_condition_inapplicable():
    t = catalog("norsett34", 1)
    with pytest.raises(ConditionInapplicable, match="condition inapplicable"):
        sufficient_nonnegativity_check(energy_coefficients(t), t)
    t2 = catalog("crouzeix23")
    neg = EnergyCoefficients(2, np.zeros(2), np.array([-1.0, 1.0]), np.zeros(2), {(1, 2): 0.0}, np.zeros(2))
    with pytest.raises(ConditionInapplicable):
        sufficient_nonnegativity_check(neg, t2)


# ---------------------------------------------------------------- verdicts

@pytest.mark.parametrize("sid", CATALOG_IDS)
def test_catalog_verdicts(sid):
    v = certify(catalog(sid))
    assert v.remarkable == (sid in REMARKABLE)
    assert sid in REMARKABLE | NOT_REMARKABLE


def test_alexander33_reason_names_nu2():
    v = certify(catalog("alexander33"))
    failed = [c.text for c in v.failed]
    assert any(t.startswith("ν2 = -0.644363") and "≤ 0" in t for t in failed)


@pytest.mark.parametrize("variant", [2, 3])
def test_norsett_negative_deltas(variant):
    v = certify(catalog("norsett34", variant))
    names = {c.name for c in v.failed}
    assert {"delta1", "delta2", "delta3"} <= names


def test_kraaijevanger_nu1_negative():
    v = certify(catalog("kraaijevanger_spijker22"))
    assert "nu1" in {c.name for c in v.failed}


def test_verdict_lists_every_check():
    v = certify(catalog("crouzeix23"))
    names = [c.name for c in v.reasons]
    assert names[:5] == ["delta1", "delta2", "nu1", "nu2", "Q_nonnegative"]
    assert "sufficient_condition" in names
    assert all(c.passed for c in v.reasons)


# ---------------------------------------------------------------- kappa

def test_kappa_zero_is_sum_of_squares():
    k = kappa_analysis(0.0)
    d1 = np.array([-1.0, 1.0, 0.0])
    d2 = np.array([0.0, -1.0, 1.0])
    assert np.allclose(k.q_kappa, 0.5 * np.outer(d1, d1) + 0.5 * np.outer(d2, d2), atol=1e-15)
    assert k.q_kappa_nonnegative


def test_kappa_gamma_weights():
    g = ALEXANDER22_GAMMA
    k = kappa_analysis(g)
    assert k.q_kappa_nonnegative
    assert k.absorbed_work_weights == pytest.approx((2 * g, g), abs=1e-15)
    assert k.cauchy_schwarz_weights == pytest.approx(((7 * g - 1) / 2, (5 * g - 1) / 2), abs=1e-15)


def test_kappa_full_absorption_is_indefinite():
    g = ALEXANDER22_GAMMA
    k = kappa_analysis(1 - 2 * g)
    assert not k.q_kappa_nonnegative
    assert k.kappa / g == pytest.approx(r2, abs=1e-14)
    assert k.residual_coefficient == pytest.approx(0.0, abs=1e-15)


def test_kappa_threshold():
    g = ALEXANDER22_GAMMA
    assert kappa_analysis(0.999 * g).q_kappa_nonnegative
    assert not kappa_analysis(1.01 * g).q_kappa_nonnegative
    assert kappa_analysis(-g).q_kappa_nonnegative


# ---------------------------------------------------------------- reports

def test_analysis_report_fields():
    rep = analysis_report(catalog("norsett34", 1))
    assert set(rep) >= {"scheme", "lambda", "delta", "nu_diag", "nu_offdiag", "nu", "Q", "verdict"}
    assert set(rep["nu_offdiag"]) == {"12", "13", "23"}
    assert rep["Q"]["rank_zero_count"] == 3
    assert rep["verdict"]["remarkable"] is True
    text = format_report(rep)
    assert "remarkably stable" in text and "NOT" not in text


def test_report_mentions_warning_for_c_outside():
    rep = analysis_report(catalog("kraaijevanger_spijker22"))
    assert rep["validation_warnings"]
    assert "NOT remarkably stable" in format_report(rep)
