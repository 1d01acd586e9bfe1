from fractions import Fraction

import pytest

from fockforge.anomaly import (
    Certificate,
    TensorExpr,
    anomaly_residual,
    canonicalize,
    drop_lambda,
    expand_correlator,
    nabla_p,
    nabla_rewrite,
    nabla_term,
    verify_anomaly,
    verify_curvature_condition,
    verify_holomorphic_anomaly,
)


def test_canonicalize_symmetry_and_renaming():
    # C_{ab} D^{ab} with swapped dummies and slots is one canonical term
    e1 = TensorExpr.single(1, (("C", 1, (1, 2)), ("Delta", (1, 2))))
    e2 = TensorExpr.single(1, (("C", 1, (2, 1)), ("Delta", (2, 1))))
    assert canonicalize(e1 - e2).terms == []
    # antisymmetric combination of a symmetric atom vanishes
    d1 = TensorExpr.single(1, (("Delta", (-1, -2)),))
    d2 = TensorExpr.single(1, (("Delta", (-2, -1)),))
    assert canonicalize(d1 - d2).terms == []


def test_canonicalize_distinct_contractions_stay_distinct():
    # C_{abg} D^{ab} vs C_{abg} D^{ag}: inequivalent pairings
    e1 = TensorExpr.single(1, (("C", 0, (1, 2, -1)), ("Delta", (1, 2))))
    e2 = TensorExpr.single(1, (("C", 0, (1, 2, -1)), ("Delta", (1, -1))))
    with pytest.raises(ValueError):
        canonicalize(e2)  # -1 appears twice, 2 appears once: unbalanced
    e3 = TensorExpr.single(1, (("C", 0, (1, 2, 3)), ("Delta", (1, 2)), ("Delta", (3, -1))))
    e4 = TensorExpr.single(1, (("C", 0, (1, 2, 3)), ("Delta", (1, 3)), ("Delta", (2, -1))))
    assert canonicalize(e3 - e4).terms == []  # same by symmetry of C


def test_index_balance_errors():
    bad = TensorExpr.single(1, (("Delta", (1, 1)), ("Delta", (1, 2)), ("Delta", (2, 3)), ("Delta", (3, 4)), ("Delta", (4, 5)), ("Delta", (5, 6)), ("Delta", (6, 7)), ("Delta", (7, 8)), ("Delta", (8, 9)), ("Delta", (9, 10)), ("Delta", (10, 11)), ("Delta", (11, 12)), ("Delta", (12, 13)), ("Delta", (13, 1))))
    with pytest.raises(ValueError):
        canonicalize(bad)


def test_nabla_rewrite_jetness():
    e = nabla_term(Fraction(1), (("C", 0, (-2, -3, -4)),), -1)
    out = canonicalize(nabla_rewrite(e))
    expect = canonicalize(TensorExpr.single(1, (("C", 0, (-4, -3, -2, -1)),)))
    assert canonicalize(out - expect).terms == []


def test_nabla_rewrite_propagator_sides():
    e = nabla_term(Fraction(1), (("Delta", (-2, -3)),), -1)
    # side 2 parallel: + Lam1 + Delta C Delta
    out = canonicalize(nabla_rewrite(e, parallel_side=2))
    lam1 = TensorExpr.single(1, (("Lam", 1, (-1,), (-3, -2)),))
    chain = TensorExpr.single(
        1,
        (
            ("Delta", (-2, 1)),
            ("C", 0, tuple(sorted((1, -1, 2)))),
            ("Delta", (2, -3)),
        ),
    )
    assert canonicalize(out - lam1 - chain).terms == []
    # both torsions kept when neither side is parallel
    both = canonicalize(nabla_rewrite(e, parallel_side=None))
    assert len(both.terms) == 3


def test_nabla_of_scalar_is_zero():
    e = nabla_term(Fraction(1), (), -1)
    assert canonicalize(e).terms == []


def test_nabla_of_torsion_is_opaque():
    e = nabla_term(Fraction(1), (("Lam", 2, (-2,), (1, 3)), ("Delta", (1, 3))), -1)
    out = nabla_rewrite(e)
    kinds = sorted(
        tuple(sorted(a[0] for a in atoms)) for _, atoms in out.terms
    )
    # one term carries the derivative atom Lam with two lower indices
    assert any(
        any(a[0] == "Lam" and len(a[2]) == 2 for a in atoms)
        for _, atoms in out.terms
    )


@pytest.mark.parametrize("g,n", [(0, 4), (0, 5), (1, 2), (1, 3), (2, 1)])
def test_anomaly_equation_certificates(g, n):
    cert = verify_anomaly(g, n)
    assert cert.ok, cert.residual
    assert "ZERO" in cert.text()


def test_anomaly_reduces_to_jetness_without_torsion():
    res = anomaly_residual(1, 2)
    assert canonicalize(drop_lambda(res)).terms == []


def test_anomaly_mutation_detected():
    cert = verify_anomaly(1, 2, coeff=Fraction(1, 3))
    assert not cert.ok
    assert cert.residual != "0"


def test_anomaly_preconditions():
    with pytest.raises(ValueError):
        verify_anomaly(1, 1)
    with pytest.raises(ValueError):
        verify_anomaly(0, 3)


def test_curvature_condition():
    cert = verify_curvature_condition()
    assert cert.ok, cert.residual
    bad = verify_curvature_condition(coeff=Fraction(1, 3))
    assert not bad.ok


@pytest.mark.parametrize("g,n", [(1, 2), (2, 0), (2, 1)])
def test_holomorphic_anomaly_shape(g, n):
    cert = verify_holomorphic_anomaly(g, n)
    assert cert.ok, cert.residual


def test_hae_mutation_detected():
    cert = verify_holomorphic_anomaly(1, 2, coeff=Fraction(2, 5))
    assert not cert.ok


def test_genus_one_rule_structure():
    # the curved genus-one one-point function is C^(1)_mu + 1/2 C^(0) Delta
    expr = canonicalize(expand_correlator(1, (-1,)))
    assert len(expr.terms) == 2
    coeffs = sorted(c for c, _ in expr.terms)
    assert coeffs == [Fraction(1, 2), Fraction(1)]
