import random
from fractions import Fraction

import pytest

from fockforge.fields import (
    FE,
    FieldElem,
    rand_field_elem,
    squarefree_decompose,
)


def test_squarefree_decompose():
    assert squarefree_decompose(12) == (2, 3)
    assert squarefree_decompose(1) == (1, 1)
    assert squarefree_decompose(-8) == (2, -2)
    assert squarefree_decompose(49) == (7, 1)
    with pytest.raises(ValueError):
        squarefree_decompose(0)


def test_basic_radical_arithmetic():
    r2 = FieldElem.sqrt_int(2)
    assert r2 * r2 == FE(2)
    r8 = FieldElem.sqrt_int(8)
    assert r8 == r2 + r2  # sqrt(8) = 2 sqrt(2)
    i = FieldElem.sqrt_int(-1)
    assert i * i == FE(-1)
    im_r2 = FieldElem.sqrt_int(-2)
    assert im_r2 * im_r2 == FE(-2)
    # i * sqrt(2) = sqrt(-2)
    assert i * r2 == im_r2
    r6 = FieldElem.sqrt_int(6)
    assert FieldElem.sqrt_int(3) * r2 == r6


def test_division_in_tower():
    x = FE(1) + FieldElem.sqrt_int(2)
    assert x * x.inverse() == FE(1)
    y = FE(Fraction(3, 7)) + FieldElem.sqrt_int(-2) + FieldElem.sqrt_int(5)
    assert (y / y) == FE(1)
    with pytest.raises(ZeroDivisionError):
        FieldElem.zero().inverse()


def test_sqrt():
    assert FieldElem.sqrt_rational(Fraction(4, 9)) == FE(Fraction(2, 3))
    assert FieldElem.sqrt_rational(Fraction(-2)) == FieldElem.sqrt_int(-2)
    assert FieldElem.sqrt_rational(Fraction(18)) == FE(3) * FieldElem.sqrt_int(2)
    # (1 + sqrt(2))^2 = 3 + 2 sqrt(2)
    v = FE(3) + FE(2) * FieldElem.sqrt_int(2)
    s = v.sqrt()
    assert s * s == v
    with pytest.raises(ValueError):
        (FieldElem.sqrt_int(2) + FieldElem.sqrt_int(3)).sqrt()


def test_field_axioms_randomized():
    rng = random.Random(20240817)
    for _ in range(200):
        a = rand_field_elem(rng, radicands=(2, -1))
        b = rand_field_elem(rng, radicands=(2, -1))
        c = rand_field_elem(rng, radicands=(2, -1))
        assert (a + b) + c == a + (b + c)
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c
        assert a + (-a) == FieldElem.zero()
        if not a.is_zero():
            assert a * a.inverse() == FE(1)


def test_mixed_radicand_closure():
    rng = random.Random(7)
    for _ in range(50):
        a = rand_field_elem(rng, radicands=(2, 3))
        b = rand_field_elem(rng, radicands=(3, -1))
        p = a * b
        q = b * a
        assert p == q
        if not b.is_zero():
            assert (p / b) == a


def test_serialization_roundtrip():
    vals = [
        FE(Fraction(-3, 4)),
        FieldElem.sqrt_int(-2) + FE(1),
        FE(2) * FieldElem.sqrt_int(5) - FieldElem.sqrt_int(-1),
        FieldElem.zero(),
    ]
    for v in vals:
        assert FieldElem.from_json(v.to_json()) == v


def test_sort_key_is_total_on_samples():
    rng = random.Random(3)
    xs = [rand_field_elem(rng, radicands=(2,)) for _ in range(30)]
    keys = [x.sort_key() for x in xs]
    assert sorted(keys) == sorted(keys)  # comparable without error
    for x, k in zip(xs, keys):
        for y, l in zip(xs, keys):
            if x == y:
                assert k == l
