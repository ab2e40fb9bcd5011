import json
import math

import numpy as np
import pytest

from dirkstab.tableau import (
    CATALOG_IDS,
    ButcherTableau,
    TableauFormatError,
    UnknownSchemeError,
    alexander33_gamma,
    catalog,
    dumps,
    from_dict,
    load,
    loads,
    norsett34_gamma,
    order_report,
    save,
    to_dict,
    validate,
)

from oracles import GAMMAS, r2


def test_alexander22_is_valid():
    assert validate(catalog("alexander22")).ok


def test_identity_tableau_is_valid():
    t = ButcherTableau(np.eye(2), [0.5, 0.5], [1.0, 1.0])
    res = validate(t)
    assert res.ok and bool(res)
    assert res.violations == ()


def test_negative_diagonal_is_named():
    t = ButcherTableau([[-0.5, 0.0], [-0.5, 2.0]], [-0.5, 1.5], [0.5, 1.5])
    res = validate(t)
    assert not res.ok
    assert any("a_11 ≤ 0" in v for v in res.violations)


def test_upper_entry_is_named():
    t = ButcherTableau([[0.5, 0.1], [0.0, 0.5]], [0.5, 0.5], [0.6, 0.5])
    res = validate(t)
    assert not res.ok
    assert any("a_12" in v for v in res.violations)


def test_nonfinite_entries_flagged():
    t = ButcherTableau([[np.nan, 0.0], [0.0, 0.5]], [0.5, 0.5], [0.5, 0.5])
    assert not validate(t).ok


def test_c_outside_unit_interval_only_warns():
    res = validate(catalog("kraaijevanger_spijker22"))
    assert res.ok
    assert any("c_2" in w for w in res.warnings)
    res = validate(catalog("butcher_burrage22-plus"))
    assert res.ok and any("c_1" in w for w in res.warnings)


def test_shape_mismatch_rejected():
    with pytest.raises(TableauFormatError):
        ButcherTableau(np.eye(2), [1.0], [0.0, 1.0])
    with pytest.raises(TableauFormatError):
        ButcherTableau([1.0, 2.0], [1.0], [0.0])


def test_arrays_are_read_only():
    t = catalog("crouzeix23")
    with pytest.raises(ValueError):
        t.A[0, 0] = 1.0
    assert t.s == 2


def test_crouzeix_certifies_order_three():
    assert order_report(catalog("crouzeix23")).certified_order == 3


def test_weight_vector_order_one():
    A = [[0.4, 0.0], [0.1, 0.6]]
    t = ButcherTableau(A, [1.0, 0.0], [0.4, 0.7])
    rep = order_report(t)
    assert rep.certified_order >= 1
    assert rep.order2_residual == pytest.approx(abs(0.4 - 0.5), abs=1e-15)


def test_norsett1_order_three_residual():
    assert order_report(catalog("norsett34", 1)).order3_residual < 1e-12


def test_order_report_residuals_nonnegative_and_consistent():
    for sid in CATALOG_IDS:
        r = order_report(catalog(sid))
        by_order = {
            1: [r.order1_row_sum_residual, r.order1_weight_residual],
            2: [r.order2_residual],
            3: [r.order3_residual],
        }
        assert all(v >= 0 for vals in by_order.values() for v in vals)
        for k in range(1, r.certified_order + 1):
            assert all(v < r.tol for v in by_order[k])


@pytest.mark.parametrize("sid", CATALOG_IDS)
def test_catalog_valid(sid):
    assert validate(catalog(sid)).ok


def test_alexander33_closed_forms():
    t = catalog("alexander33")
    g = t.A[0, 0]
    # printed values are truncated to 7 decimals
    assert g == pytest.approx(GAMMAS["alexander33"], abs=1e-7)
    assert t.b[0] == pytest.approx(1.2084966, abs=1e-7)
    assert t.b[1] == pytest.approx(-0.6443631, abs=1e-7)
    assert abs(6 * g**3 - 18 * g**2 + 9 * g - 1) < 1e-14
    assert 1 / 6 < alexander33_gamma() < 0.5


def test_norsett_gammas():
    for k in (1, 2, 3):
        g = norsett34_gamma(k)
        assert abs(g**3 - 1.5 * g**2 + 0.5 * g - 1 / 24) < 1e-14
        assert g == pytest.approx(GAMMAS[f"norsett{k}"], abs=5e-10)
    assert catalog("norsett34", 1).A[0, 0] == pytest.approx(1.068579021, abs=5e-10)


def test_butcher_burrage_minus_entries():
    t = catalog("butcher_burrage22", "minus")
    assert t.A[0, 0] == pytest.approx(1 - r2 / 2, abs=1e-15)
    assert t.A[1, 0] == pytest.approx(r2 - 1, abs=1e-15)


def test_catalog_aliases():
    assert catalog("norsett34_gamma2") == catalog("norsett34-2")
    assert catalog("Butcher_Burrage22_plus") == catalog("butcher_burrage22-plus")
    assert hash(catalog("crouzeix23")) == hash(catalog("crouzeix23"))


def test_unknown_scheme():
    with pytest.raises(UnknownSchemeError):
        catalog("heun")
    with pytest.raises(UnknownSchemeError):
        catalog("norsett34", 4)


@pytest.mark.parametrize("sid", CATALOG_IDS)
def test_json_round_trip_bit_exact(sid, tmp_path):
    t = catalog(sid)
    back = loads(dumps(t))
    assert np.array_equal(back.A, t.A) and np.array_equal(back.b, t.b) and np.array_equal(back.c, t.c)
    assert back.name == t.name
    path = tmp_path / f"{sid}.json"
    save(t, path)
    assert load(path) == t


def test_reader_rejects_nonfinite():
    doc = to_dict(catalog("alexander22"))
    text = json.dumps(doc).replace(str(doc["b"][0]), "NaN", 1)
    with pytest.raises(TableauFormatError):
        loads(text)
    with pytest.raises(TableauFormatError):
        loads('{"s": 1, "A": [[Infinity]], "b": [1], "c": [1]}')


def test_reader_requires_explicit_zeros():
    with pytest.raises(TableauFormatError):
        from_dict({"s": 2, "A": [[0.5], [0.5, 0.5]], "b": [0.5, 0.5], "c": [0.5, 1.0]})


@pytest.mark.parametrize("bad", [
    {"s": 2, "A": [[1, 0], [0, 1]], "b": [1, 0]},
    {"s": "2", "A": [[1, 0], [0, 1]], "b": [1, 0], "c": [1, 1]},
    {"s": 2, "A": [[1, 0], [0, "x"]], "b": [1, 0], "c": [1, 1]},
    {"s": 2, "A": [[1, 0], [0, 1]], "b": [1, True], "c": [1, 1]},
    [1, 2, 3],
])
def test_reader_rejects_malformed(bad):
    with pytest.raises(TableauFormatError):
        from_dict(bad)


def test_invalid_json():
    with pytest.raises(TableauFormatError):
        loads("{not json")


def test_equality_semantics():
    a = catalog("alexander22")
    b = ButcherTableau(a.A.copy(), a.b.copy(), a.c.copy(), name="alexander22")
    assert a == b
    assert a != catalog("crouzeix23")
    assert math.isfinite(float(a.A.sum()))
