from fractions import Fraction

import pytest

from fockforge.fields import FE, FieldElem
from fockforge.poly import MultiPoly, RatFun, ratfun_shift


def minus_q1(nvars=1):
    # the designated denominator -q1 of the point target
    return MultiPoly.linear(nvars, [FE(-1)] + [FE(0)] * (nvars - 1))


def test_poly_arithmetic():
    x = MultiPoly.var(2, 0)
    y = MultiPoly.var(2, 1)
    p = (x + y) * (x - y)
    assert p == x * x - y * y
    assert p.derivative(0) == x + x
    assert p.evaluate([FE(3), FE(2)]) == FE(5)
    assert (x * y).total_degree() == 2


def test_poly_substitute_linear():
    x = MultiPoly.var(1, 0)
    p = x * x + x
    q = p.compose_linear([[FE(2)]])  # x -> 2y
    assert q.evaluate([FE(3)]) == FE(42)


def test_ratfun_basics():
    P = minus_q1()
    one = RatFun.const(FE(1), P)
    inv = RatFun(MultiPoly.const(1, FE(1)), P, 1)  # 1/(-q1)
    assert inv.evaluate([FE(-1)]) == FE(1)
    assert (inv + inv).evaluate([FE(-2)]) == FE(1)
    assert (inv * inv).evaluate([FE(-1)]) == FE(1)
    assert (one - one).is_zero()
    # derivative of 1/(-q1): d/dq1 (-q1)^(-1) = (-q1)^(-2)
    d = inv.derivative(0)
    assert d.evaluate([FE(-2)]) == FE(Fraction(1, 4))
    with pytest.raises(ZeroDivisionError):
        inv.evaluate([FE(0)])


def test_ratfun_cancel():
    P = minus_q1()
    # (-q1)^2 / (-q1)^1 cancels to -q1
    r = RatFun(P * P, P, 1)
    c = r.cancel()
    assert c.k == 0 and c.num == P


def test_ratfun_shift_identity():
    P = minus_q1()
    inv = RatFun(MultiPoly.const(1, FE(1)), P, 1)
    s = ratfun_shift(inv, [FE(0)])
    assert s.n_q0 == 0
    assert s.q0_coefficient(()) == inv


def test_ratfun_shift_constant():
    # 1/(-q1) with q1 -> q1 - 1, evaluated at q1 = 0 gives 1
    P = minus_q1()
    inv = RatFun(MultiPoly.const(1, FE(1)), P, 1)
    s = ratfun_shift(inv, [FE(-1)])
    coeff = s.q0_coefficient(())
    assert coeff.num.evaluate([FE(0)]) / coeff.base.evaluate([FE(0)]) == FE(1)


def test_ratfun_shift_geometric_q0():
    # 1/(-q1 - eps*q0) at q1 = -1: expanding in q0 gives 1 + eps q0 + eps^2 q0^2
    P = minus_q1()
    inv = RatFun(MultiPoly.const(1, FE(1)), P, 1)
    eps = Fraction(1, 3)
    s = ratfun_shift(inv, [FE(0)], q0_matrix=[[FE(eps)]], q0_order=2)
    for n in range(3):
        c = s.q0_coefficient((n,))
        got = c.evaluate([FE(-1)])
        assert got == FE(eps**n), (n, got)


def test_ratfun_shift_oracle_random_points():
    # exactness of the truncated geometric expansion at sample points:
    # evaluate 1/(-q1 - e q0)^2 directly and compare through order 3
    P = minus_q1()
    r = RatFun(MultiPoly.const(1, FE(1)), P, 2)
    e = Fraction(1, 5)
    s = ratfun_shift(r, [FE(0)], q0_matrix=[[FE(e)]], q0_order=3)
    q1 = Fraction(-2)
    # direct Taylor oracle: 1/(q1 + e q0)^2 = sum_n (n+1) (-e q0)^n / q1^(n+2)
    for n in range(4):
        expect = FE((n + 1) * (-e) ** n / q1 ** (n + 2))
        got = s.q0_coefficient((n,)).evaluate([FE(q1)])
        assert got == expect, n


def test_shifted_base_on_discriminant_rejected():
    P = minus_q1()
    inv = RatFun(MultiPoly.const(1, FE(1)), P, 1)
    s = ratfun_shift(inv, [FE(-1)])
    with pytest.raises(ZeroDivisionError):
        s.q0_coefficient(()).evaluate([FE(1)])  # shifted pole now at +1
