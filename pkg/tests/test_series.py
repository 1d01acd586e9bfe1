import random
from fractions import Fraction

import pytest

from fockforge.fields import FE, FieldElem, rand_field_elem
from fockforge.series import (
    MatSeries,
    mat_from_rows,
    mat_identity,
    mat_inverse,
    mat_mul,
    scalar_exp_series,
    series_inverse,
    series_mul,
)


def test_series_mul_identity():
    i3 = MatSeries.identity(3, 4)
    assert series_mul(i3, i3).is_identity()


def test_series_mul_telescoping():
    # (I + Ez)(I - Ez) = I - E^2 z^2
    e = mat_from_rows([[FE(1), FE(2)], [FE(3), FE(-1)]])
    z2 = MatSeries([mat_identity(2), e, ((FieldElem.zero(),) * 2,) * 2])
    neg = MatSeries([mat_identity(2), tuple(tuple(-x for x in r) for r in e), ((FieldElem.zero(),) * 2,) * 2])
    prod = series_mul(z2, neg)
    assert prod.coeff(0) == mat_identity(2)
    assert prod.coeff(1) == tuple((FieldElem.zero(),) * 2 for _ in range(2))
    e2 = mat_mul(e, e)
    assert prod.coeff(2) == tuple(tuple(-x for x in row) for row in e2)


def test_series_mul_exponential_oracle():
    # e^z * e^{-z} = 1 through order 4: coefficients 1, 1, 1/2, 1/6, 1/24
    ez = scalar_exp_series(FE(1), 4)
    assert ez.coeff(3) == ((FE(Fraction(1, 6)),),)
    emz = scalar_exp_series(FE(-1), 4)
    assert series_mul(ez, emz).is_identity()


def test_series_inverse_geometric():
    # 1/(1+z) = 1 - z + z^2 - z^3
    one_plus_z = MatSeries.from_scalar_coeffs([FE(1), FE(1), FE(0), FE(0)])
    inv = series_inverse(one_plus_z)
    assert [inv.coeff(k)[0][0] for k in range(4)] == [FE(1), FE(-1), FE(1), FE(-1)]


def test_series_inverse_exp():
    a = FE(Fraction(2, 3))
    inv = series_inverse(scalar_exp_series(a, 3))
    expect = scalar_exp_series(-a, 3)
    assert inv.coeffs == expect.coeffs
    assert series_mul(scalar_exp_series(a, 3), inv).is_identity()


def test_series_inverse_randomized_property():
    rng = random.Random(99)
    for _ in range(20):
        dim = rng.choice([1, 2, 3])
        order = rng.choice([2, 3, 4])
        coeffs = []
        for k in range(order + 1):
            rows = [
                [rand_field_elem(rng, radicands=(2,) if rng.random() < 0.3 else ())
                 for _ in range(dim)]
                for _ in range(dim)
            ]
            if k == 0:
                for i in range(dim):
                    rows[i][i] = rows[i][i] + FE(1 + rng.randint(0, 2))
            coeffs.append(mat_from_rows(rows))
        a = MatSeries(coeffs)
        try:
            inv = series_inverse(a)
        except ZeroDivisionError:
            continue  # random constant term happened to be singular
        assert series_mul(a, inv).is_identity()
        assert series_mul(inv, a).is_identity()


def test_singular_constant_term_rejected():
    a = MatSeries([((FieldElem.zero(),),), ((FE(1),),)])
    with pytest.raises(ZeroDivisionError):
        series_inverse(a)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        series_mul(MatSeries.identity(2, 1), MatSeries.identity(3, 1))


def test_mat_inverse():
    m = mat_from_rows([[FE(0), FE(1)], [FE(1), FE(0)]])
    assert mat_inverse(m) == m
    with pytest.raises(ZeroDivisionError):
        mat_inverse(mat_from_rows([[FE(1), FE(1)], [FE(1), FE(1)]]))
