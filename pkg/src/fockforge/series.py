"""Truncated matrix power series in one formal variable z, over FieldElem.

A :class:`MatSeries` holds square coefficient matrices ``M_0, ..., M_K``; the
truncation order ``K`` is explicit and every operation states how it treats
it.  Multiplication truncates to the smaller order; inversion requires an
invertible constant term and keeps the order.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

from .fields import FE, FieldElem

Matrix = Tuple[Tuple[FieldElem, ...], ...]


def mat_identity(n: int) -> Matrix:
    one, zero = FieldElem.one(), FieldElem.zero()
    return tuple(
        tuple(one if i == j else zero for j in range(n)) for i in range(n)
    )


def mat_zero(n: int) -> Matrix:
    zero = FieldElem.zero()
    return tuple(tuple(zero for _ in range(n)) for _ in range(n))


def mat_from_rows(rows: Sequence[Sequence[FieldElem]]) -> Matrix:
    return tuple(tuple(row) for row in rows)


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return tuple(
        tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
    )


def mat_neg(a: Matrix) -> Matrix:
    return tuple(tuple(-x for x in row) for row in a)

def mat_scale(a: Matrix, c: FieldElem) -> Matrix:
    return tuple(tuple(x * c for x in row) for row in a)


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n = len(a)
    m = len(b[0])
    k = len(b)
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = FieldElem.zero()
            for t in range(k):
                x = a[i][t]
                if x:
                    y = b[t][j]
                    if y:
                        acc = acc + x * y
            row.append(acc)
        out.append(tuple(row))
    return tuple(out)


def mat_transpose(a: Matrix) -> Matrix:
    return tuple(tuple(a[j][i] for j in range(len(a))) for i in range(len(a[0])))


def mat_vec(a: Matrix, v: Sequence[FieldElem]) -> Tuple[FieldElem, ...]:
    return tuple(
        sum((a[i][j] * v[j] for j in range(len(v)) if v[j]), FieldElem.zero())
        for i in range(len(a))
    )


def mat_inverse(a: Matrix) -> Matrix:
    """Exact inverse by Gauss-Jordan elimination; raises on singular input."""
    n = len(a)
    aug = [list(a[i]) + list(mat_identity(n)[i]) for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col]), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = FieldElem.one() / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return tuple(tuple(aug[i][n:]) for i in range(n))


def mat_equal(a: Matrix, b: Matrix) -> bool:
    return a == b


class MatSeries:
    """Square-matrix power series ``M(z) = M_0 + M_1 z + ... + M_K z^K``."""

    __slots__ = ("coeffs", "dim", "order")

    def __init__(self, coeffs: Sequence[Matrix]):
        if not coeffs:
            raise ValueError("need at least the constant term")
        self.coeffs: Tuple[Matrix, ...] = tuple(coeffs)
        self.dim = len(coeffs[0])
        self.order = len(coeffs) - 1
        for m in coeffs:
            if len(m) != self.dim or any(len(r) != self.dim for r in m):
                raise ValueError("non-square or inconsistent coefficient matrices")

    @staticmethod
    def identity(dim: int, order: int) -> "MatSeries":
        return MatSeries([mat_identity(dim)] + [mat_zero(dim)] * order)

    @staticmethod
    def from_scalar_coeffs(vals: Sequence[FieldElem]) -> "MatSeries":
        return MatSeries([((v,),) for v in vals])

    def coeff(self, k: int) -> Matrix:
        return self.coeffs[k] if k <= self.order else mat_zero(self.dim)

    def truncate(self, order: int) -> "MatSeries":
        if order <= self.order:
            return MatSeries(self.coeffs[: order + 1])
        return MatSeries(list(self.coeffs) + [mat_zero(self.dim)] * (order - self.order))

    def __add__(self, other: "MatSeries") -> "MatSeries":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        k = min(self.order, other.order)
        return MatSeries([mat_add(self.coeffs[i], other.coeffs[i]) for i in range(k + 1)])

    def __neg__(self) -> "MatSeries":
        return MatSeries([mat_neg(m) for m in self.coeffs])

    def __sub__(self, other: "MatSeries") -> "MatSeries":
        return self + (-other)

    def transpose(self) -> "MatSeries":
        return MatSeries([mat_transpose(m) for m in self.coeffs])

    def negate_z(self) -> "MatSeries":
        """M(z) -> M(-z)."""
        out = []
        for k, m in enumerate(self.coeffs):
            out.append(m if k % 2 == 0 else mat_neg(m))
        return MatSeries(out)

    def is_identity(self) -> bool:
        if self.coeffs[0] != mat_identity(self.dim):
            return False
        z = mat_zero(self.dim)
        return all(m == z for m in self.coeffs[1:])


def series_mul(a: MatSeries, b: MatSeries) -> MatSeries:
    """Product truncated to ``min(order_a, order_b)``.

    Coefficient of ``z^k`` is ``sum_{i+j=k} A_i B_j``.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    k = min(a.order, b.order)
    out: List[Matrix] = []
    for n in range(k + 1):
        acc = mat_zero(a.dim)
        for i in range(n + 1):
            acc = mat_add(acc, mat_mul(a.coeffs[i], b.coeffs[n - i]))
        out.append(acc)
    return MatSeries(out)


def series_inverse(a: MatSeries) -> MatSeries:
    """Inverse to the same truncation order; requires invertible ``A_0``.

    With ``B_0 = A_0^{-1}``, the higher terms satisfy
    ``B_n = -B_0 * sum_{i=1..n} A_i B_{n-i}``.
    """
    b0 = mat_inverse(a.coeffs[0])
    out: List[Matrix] = [b0]
    for n in range(1, a.order + 1):
        acc = mat_zero(a.dim)
        for i in range(1, n + 1):
            acc = mat_add(acc, mat_mul(a.coeffs[i], out[n - i]))
        out.append(mat_neg(mat_mul(b0, acc)))
    return MatSeries(out)


def series_apply_vector(a: MatSeries, v: Sequence[Sequence[FieldElem]]) -> List[Tuple[FieldElem, ...]]:
    """Apply the series to a z-vector ``v(z) = sum v_n z^n`` (list of vectors),
    truncating at ``a.order``; returns the coefficient vectors of the image."""
    out = []
    dim = a.dim
    for n in range(a.order + 1):
        acc = [FieldElem.zero()] * dim
        for i in range(n + 1):
            if i <= a.order and n - i < len(v):
                img = mat_vec(a.coeffs[i], v[n - i])
                acc = [x + y for x, y in zip(acc, img)]
        out.append(tuple(acc))
    return out


def scalar_exp_series(a: FieldElem, order: int) -> MatSeries:
    """1x1 series exp(a z) truncated at ``order``: coefficient of z^k is a^k/k!."""
    from fractions import Fraction

    coeffs = []
    power = FieldElem.one()
    fact = 1
    for k in range(order + 1):
        if k:
            power = power * a
            fact *= k
        coeffs.append(((power * FE(Fraction(1, fact)),),))
    return MatSeries(coeffs)
