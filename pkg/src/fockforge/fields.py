"""Exact scalar arithmetic over Q and small real/imaginary quadratic towers.

A :class:`FieldElem` is a finite Q-linear combination of square roots of
square-free integers,

    x = sum_r  c_r * sqrt(r),      c_r in Q,  r square-free, r != 0,

stored as a dict ``{radicand: Fraction}``.  The radicand ``1`` carries the
rational part; a negative radicand ``r`` stands for ``i*sqrt(|r|)``.  Square
roots of distinct square-free integers are linearly independent over Q, so
equality of dicts is equality of values and zero testing is exact.

Examples::

    >>> two = FieldElem.from_int(2)
    >>> r2 = FieldElem.sqrt_int(2)
    >>> r2 * r2 == two
    True
    >>> (FieldElem.sqrt_int(-2) * FieldElem.sqrt_int(-2)).to_fraction()
    Fraction(-2, 1)
    >>> (FieldElem.one() / (FieldElem.one() + r2)) * (FieldElem.one() + r2)
    FieldElem(1)
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Tuple, Union

Rat = Union[int, Fraction]

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def squarefree_decompose(n: int) -> Tuple[int, int]:
    """Write ``n = f**2 * m`` with ``m`` square-free; return ``(f, m)``.

    The sign of ``n`` goes into ``m``.  ``n`` must be nonzero.
    """
    if n == 0:
        raise ValueError("cannot decompose 0")
    sign = -1 if n < 0 else 1
    n = abs(n)
    f = 1
    m = 1
    for p in _SMALL_PRIMES:
        if p * p > n:
            break
        while n % (p * p) == 0:
            n //= p * p
            f *= p
        if n % p == 0:
            n //= p
            m *= p
    # remaining cofactor: test perfect square, else treat as square-free
    if n > 1:
        r = _isqrt(n)
        if r * r == n:
            f *= r
        else:
            m *= n
    return f, sign * m


def _isqrt(n: int) -> int:
    import math

    return math.isqrt(n)


def _mul_radicands(r: int, s: int) -> Tuple[int, int]:
    """sqrt(r)*sqrt(s) = c*sqrt(m); return ``(c, m)`` with m square-free.

    Both radicands square-free and nonzero; negative radicand means
    ``i*sqrt(|r|)``, so sqrt(-a)*sqrt(-b) = -sqrt(a*b).
    """
    import math

    neg = (r < 0) + (s < 0)
    a, b = abs(r), abs(s)
    g = math.gcd(a, b)
    m = (a // g) * (b // g)
    c = g
    if neg == 2:
        return -c, m
    if neg == 1:
        return c, -m
    return c, m


class FieldElem:
    """Immutable exact scalar in Q(sqrt(d_1), ..., sqrt(d_k))."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Dict[int, Fraction]):
        # terms must already be reduced: square-free keys, no zero values
        self._terms = terms
        self._hash = None

    # ---------------------------------------------------------------- constructors

    @staticmethod
    def from_rational(q: Rat) -> "FieldElem":
        q = Fraction(q)
        return FieldElem({1: q} if q else {})

    @staticmethod
    def from_int(n: int) -> "FieldElem":
        return FieldElem.from_rational(n)

    @staticmethod
    def zero() -> "FieldElem":
        return _ZERO

    @staticmethod
    def one() -> "FieldElem":
        return _ONE

    @staticmethod
    def sqrt_int(n: int) -> "FieldElem":
        """Exact sqrt of a nonzero integer, e.g. sqrt_int(12) = 2*sqrt(3)."""
        f, m = squarefree_decompose(n)
        if m == 1:
            return FieldElem({1: Fraction(f)})
        return FieldElem({m: Fraction(f)})

    @staticmethod
    def sqrt_rational(q: Rat) -> "FieldElem":
        q = Fraction(q)
        if q == 0:
            return _ZERO
        # sqrt(a/b) = sqrt(a*b)/b
        f, m = squarefree_decompose(q.numerator * q.denominator)
        coef = Fraction(f, q.denominator)
        if m == 1:
            return FieldElem({1: coef})
        return FieldElem({m: coef})

    # ---------------------------------------------------------------- predicates

    def is_zero(self) -> bool:
        return not self._terms

    def is_rational(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and 1 in self._terms)

    def to_fraction(self) -> Fraction:
        if not self._terms:
            return Fraction(0)
        if len(self._terms) == 1 and 1 in self._terms:
            return self._terms[1]
        raise ValueError(f"not rational: {self}")

    def radicands(self) -> Tuple[int, ...]:
        return tuple(sorted(r for r in self._terms if r != 1))

    # ---------------------------------------------------------------- arithmetic

    def __add__(self, other: "FieldElem") -> "FieldElem":
        if not isinstance(other, FieldElem):
            return NotImplemented
        if not self._terms:
            return other
        if not other._terms:
            return self
        out = dict(self._terms)
        for r, c in other._terms.items():
            s = out.get(r)
            if s is None:
                out[r] = c
            else:
                s = s + c
                if s:
                    out[r] = s
                else:
                    del out[r]
        return FieldElem(out)

    def __neg__(self) -> "FieldElem":
        return FieldElem({r: -c for r, c in self._terms.items()})

    def __sub__(self, other: "FieldElem") -> "FieldElem":
        return self + (-other)

    def __mul__(self, other: "FieldElem") -> "FieldElem":
        if not isinstance(other, FieldElem):
            return NotImplemented
        a, b = self._terms, other._terms
        if not a or not b:
            return _ZERO
        # fast path: rational * anything
        if len(a) == 1 and 1 in a:
            q = a[1]
            return FieldElem({r: q * c for r, c in b.items()})
        if len(b) == 1 and 1 in b:
            q = b[1]
            return FieldElem({r: q * c for r, c in a.items()})
        out: Dict[int, Fraction] = {}
        for r, cr in a.items():
            for s, cs in b.items():
                if r == 1:
                    m, c = s, cr * cs
                elif s == 1:
                    m, c = r, cr * cs
                else:
                    k, m = _mul_radicands(r, s)
                    c = cr * cs * k
                acc = out.get(m)
                if acc is None:
                    out[m] = c
                else:
                    acc = acc + c
                    if acc:
                        out[m] = acc
                    else:
                        del out[m]
        return FieldElem(out)

    def inverse(self) -> "FieldElem":
        if not self._terms:
            raise ZeroDivisionError("division by zero FieldElem")
        if len(self._terms) == 1:
            ((r, c),) = self._terms.items()
            if r == 1:
                return FieldElem({1: 1 / c})
            # 1/(c*sqrt(r)) = sqrt(r)/(c*r)
            return FieldElem({r: Fraction(1, 1) / (c * Fraction(r))})
        basis = self._closure_basis()
        index = {r: i for i, r in enumerate(basis)}
        n = len(basis)
        # matrix of multiplication by self in the closure algebra
        mat = [[Fraction(0)] * n for _ in range(n)]
        for j, bj in enumerate(basis):
            col = self * FieldElem({bj: Fraction(1)})
            for r, c in col._terms.items():
                mat[index[r]][j] = c
        rhs = [Fraction(0)] * n
        rhs[index[1]] = Fraction(1)
        sol = _solve_fraction_system(mat, rhs)
        return FieldElem({basis[i]: sol[i] for i in range(n) if sol[i]})

    def _closure_basis(self) -> Tuple[int, ...]:
        rads = set(self._terms) | {1}
        changed = True
        while changed:
            changed = False
            for r in list(rads):
                for s in list(rads):
                    if r == 1 or s == 1:
                        continue
                    _, m = _mul_radicands(r, s)
                    if m not in rads:
                        rads.add(m)
                        changed = True
        return tuple(sorted(rads))

    def __truediv__(self, other: "FieldElem") -> "FieldElem":
        if not isinstance(other, FieldElem):
            return NotImplemented
        if len(other._terms) == 1 and 1 in other._terms:
            q = other._terms[1]
            return FieldElem({r: c / q for r, c in self._terms.items()})
        return self * other.inverse()

    def __pow__(self, n: int) -> "FieldElem":
        if n < 0:
            return self.inverse() ** (-n)
        out = _ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def sqrt(self) -> "FieldElem":
        """Principal square root, if it exists in a quadratic tower.

        Supports rational arguments and ``a + b*sqrt(r)`` whose norm is a
        rational square.  Raises ``ValueError`` otherwise.
        """
        if self.is_rational():
            return FieldElem.sqrt_rational(self.to_fraction())
        if len(self._terms) == 2 and 1 in self._terms:
            a = self._terms[1]
            ((r, b),) = [(r, c) for r, c in self._terms.items() if r != 1]
            # (c + d sqrt(r))^2 = c^2 + d^2 r + 2cd sqrt(r)
            disc = a * a - b * b * r
            if disc >= 0:
                droot = FieldElem.sqrt_rational(disc)
                if droot.is_rational():
                    d = droot.to_fraction()
                    for t in ((a + d) / 2, (a - d) / 2):
                        c2 = FieldElem.sqrt_rational(t)
                        if c2.is_rational() and c2.to_fraction() != 0:
                            c = c2.to_fraction()
                            cand = FieldElem({1: c, r: b / (2 * c)})
                            if cand * cand == self:
                                return cand
        raise ValueError(f"square root of {self} not found in quadratic tower")

    # ---------------------------------------------------------------- ordering / misc

    def sort_key(self) -> Tuple:
        """Deterministic total order on representations (not a field order)."""
        return tuple(sorted((r, c) for r, c in self._terms.items()))

    def __eq__(self, other) -> bool:
        if isinstance(other, FieldElem):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == ({1: Fraction(other)} if other else {})
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __repr__(self) -> str:
        return f"FieldElem({self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for r, c in sorted(self._terms.items()):
            if r == 1:
                parts.append(str(c))
            else:
                parts.append(f"{c}*sqrt({r})")
        return " + ".join(parts)

    # ---------------------------------------------------------------- serialization

    def to_json(self):
        if self.is_rational():
            return str(self.to_fraction())
        return [
            {"rad": r, "coef": str(c)} for r, c in sorted(self._terms.items())
        ]

    @staticmethod
    def from_json(data) -> "FieldElem":
        if isinstance(data, str):
            return FieldElem.from_rational(Fraction(data))
        if isinstance(data, int):
            return FieldElem.from_int(data)
        terms: Dict[int, Fraction] = {}
        for item in data:
            r = int(item["rad"])
            c = Fraction(item["coef"])
            if c:
                f, m = squarefree_decompose(r) if r != 1 else (1, 1)
                terms[m] = terms.get(m, Fraction(0)) + c * f
        return FieldElem({r: c for r, c in terms.items() if c})


def _solve_fraction_system(mat, rhs):
    """Solve ``mat @ x = rhs`` over Fraction by Gaussian elimination."""
    n = len(mat)
    a = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            raise ZeroDivisionError("singular multiplication matrix")
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[col])]
    return [a[i][n] for i in range(n)]


def rand_rational(rng, bound: int = 9) -> Fraction:
    num = rng.randint(-bound, bound)
    den = rng.randint(1, bound)
    return Fraction(num, den)


def rand_field_elem(rng, radicands: Iterable[int] = (), bound: int = 9) -> FieldElem:
    """Random element for property tests: rational part plus optional radical parts."""
    out = FieldElem.from_rational(rand_rational(rng, bound))
    for r in radicands:
        c = rand_rational(rng, bound)
        if c:
            out = out + FieldElem({squarefree_decompose(r)[1]: c})
    return out


_ZERO = FieldElem({})
_ONE = FieldElem({1: Fraction(1)})

FE = FieldElem.from_rational
