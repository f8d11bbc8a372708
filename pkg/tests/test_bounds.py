import math

import pytest
import sympy as sp

from locinfo.bounds import (
    MODELS,
    TASKS,
    BoundRow,
    evaluate_formula,
    find_row,
    holder_consistent,
    lower_bound_table,
    parse_family,
)
from locinfo.channels import FamilyNorms

K, EPS, RHO, L = 1024, 0.1, 0.5, 3

# the three interactive-testing cells, written out by hand
EXPECTED = {
    "ldp:0.5": ("k/(eps^2*rho^2)", K / (EPS**2 * RHO**2)),
    "comm:3": ("k/(eps^2*2^(l/2))", K / (EPS**2 * 2 ** (L / 2))),
    "leaky": ("k^(3/4)/eps^2", K**0.75 / EPS**2),
}

k, eps, rho, l = sp.symbols("k eps rho l", positive=True)
NORMS = {
    "ldp:0.5": (rho**2, rho**2, rho**2),
    "comm:3": (sp.Integer(1), 2 ** (l / 2), 2**l),
    "leaky": (sp.Integer(1), sp.Integer(1), sp.sqrt(k)),
}


def _sym(formula):
    return sp.sympify(formula.replace("^", "**"), locals={"k": k, "eps": eps, "rho": rho, "l": l, "min": sp.Min})


def _expected_expr(task, model, op, frob, nuc):
    if task == "learning-TV":
        return k**2 / (eps**2 * nuc)
    if task == "learning-L2":
        return sp.Min(k / (eps**2 * nuc), 1 / (eps**4 * nuc))
    if model == "private-coin":
        return k ** sp.Rational(3, 2) / (eps**2 * nuc)
    if model == "public-coin":
        return k / (eps**2 * frob)
    return k / (eps**2 * sp.sqrt(op * nuc))


@pytest.mark.parametrize("family", sorted(EXPECTED))
def test_interactive_testing_rows(family):
    row = find_row(lower_bound_table(K, EPS, family), "testing", "interactive")
    formula, value = EXPECTED[family]
    assert row.formula == formula
    assert row.bound == pytest.approx(value, rel=1e-12)
    assert evaluate_formula(row.formula, k=K, eps=EPS, rho=RHO, l=L) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("family", sorted(NORMS))
def test_formulas_match_norm_expressions(family):
    op, frob, nuc = NORMS[family]
    for row in lower_bound_table(K, EPS, family):
        want = _expected_expr(row.task, row.model, op, frob, nuc)
        assert sp.simplify(_sym(row.formula) - want) == 0, row
        assert evaluate_formula(row.formula, k=K, eps=EPS, rho=RHO, l=L) == pytest.approx(row.bound, rel=1e-12)


def test_known_values():
    rows = lower_bound_table(K, EPS, "ldp:0.5")
    assert find_row(rows, "learning-TV", "private-coin").bound == pytest.approx(K**2 / (EPS**2 * RHO**2))
    rows = lower_bound_table(K, EPS, "comm:3")
    assert find_row(rows, "learning-L2", "interactive").bound == pytest.approx(min(K / (EPS**2 * 8), 1 / (EPS**4 * 8)))
    assert find_row(rows, "testing", "public-coin").bound == pytest.approx(K / (EPS**2 * 2**1.5))


def test_table_shape():
    rows = lower_bound_table(16, 0.2, "leaky")
    assert len(rows) == 9
    assert {(r.task, r.model) for r in rows} == {(t, m) for t in TASKS for m in MODELS}
    assert all(r.family == "leaky" for r in rows)


def test_family_parsing():
    assert parse_family("ldp(0.5)", 8) == parse_family("ldp:0.5", 8)
    assert parse_family({"type": "comm", "l": 2}, 8).norms == FamilyNorms(1.0, 4.0, 2.0)
    custom = parse_family({"type": "custom", "op": 1, "nuclear": 3, "frobenius": 2}, 8)
    assert custom.norms.nuclear == 3
    for bad in ("bogus", {"type": "x"}, "ldp:-1", "comm:0"):
        with pytest.raises(ValueError):
            parse_family(bad, 8)
    with pytest.raises(ValueError):
        lower_bound_table(8, 0.0, "leaky")


def test_erasure_family_uses_computed_norms():
    fam = parse_family("erasure", 16)
    assert 2 * math.sqrt(16) <= fam.norms.nuclear <= 2 * math.sqrt(16) + 2
    rows = lower_bound_table(16, 0.2, fam)
    assert holder_consistent(rows, 16, 0.2)


@pytest.mark.parametrize("family", ["ldp:0.5", "ldp:2", "comm:1", "comm:6", "leaky", "erasure"])
@pytest.mark.parametrize("kk", [4, 64, 1024])
def test_holder_consistency(family, kk):
    rows = lower_bound_table(kk, 0.1, family)
    floor = kk / (0.1**2 * parse_family(family, kk).norms.nuclear)
    assert holder_consistent(rows, kk, 0.1)
    assert find_row(rows, "testing", "interactive").bound >= floor * (1 - 1e-12)
    assert find_row(rows, "testing", "public-coin").bound >= floor * (1 - 1e-12)


def test_holder_violation_detected():
    rows = lower_bound_table(16, 0.1, {"type": "custom", "op": 9.0, "nuclear": 1.0, "frobenius": 9.0})
    assert not holder_consistent(rows, 16, 0.1)


def test_row_validation():
    with pytest.raises(ValueError):
        BoundRow("testing", "quantum", "x", 1.0, "1", "op")
    with pytest.raises(ValueError):
        BoundRow("testing", "interactive", "x", 0.0, "1", "op")
