"""Sparse multivariate polynomials and rational functions with a designated
denominator polynomial.

``MultiPoly`` maps exponent tuples to :class:`~fockforge.fields.FieldElem`
coefficients; the zero polynomial is the empty dict.  ``RatFun`` is
``num / base**k`` where ``base`` is a fixed polynomial carried along
explicitly: no gcd cancellation is ever required, only exponent bookkeeping
(cancel() exists but is best-effort and optional).

In the quantization pipeline the variables of a ``RatFun`` are the level-one
coordinates ``q_1^0, ..., q_1^N`` and the designated base is the discriminant
polynomial.  ``ratfun_shift`` additionally supports substituting a linear
form involving auxiliary level-zero variables, re-expanding the shifted
denominator as a truncated geometric series in those variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from .fields import FE, FieldElem

Exponent = Tuple[int, ...]
PolyData = Dict[Exponent, FieldElem]


class MultiPoly:
    """Sparse polynomial in ``nvars`` variables over FieldElem."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: PolyData | None = None):
        self.nvars = nvars
        self.terms: PolyData = {}
        if terms:
            for e, c in terms.items():
                if c:
                    self.terms[e] = c

    # ------------------------------------------------------------ constructors

    @staticmethod
    def zero(nvars: int) -> "MultiPoly":
        return MultiPoly(nvars)

    @staticmethod
    def const(nvars: int, c: FieldElem) -> "MultiPoly":
        p = MultiPoly(nvars)
        if c:
            p.terms[(0,) * nvars] = c
        return p

    @staticmethod
    def var(nvars: int, idx: int) -> "MultiPoly":
        e = [0] * nvars
        e[idx] = 1
        return MultiPoly(nvars, {tuple(e): FieldElem.one()})

    @staticmethod
    def linear(nvars: int, coeffs: Sequence[FieldElem], const: FieldElem = None) -> "MultiPoly":
        p = MultiPoly(nvars)
        for i, c in enumerate(coeffs):
            if c:
                e = [0] * nvars
                e[i] = 1
                p.terms[tuple(e)] = c
        if const:
            p.terms[(0,) * nvars] = const
        return p

    # ------------------------------------------------------------ queries

    def is_zero(self) -> bool:
        return not self.terms

    def is_const(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and (0,) * self.nvars in self.terms)

    def const_value(self) -> FieldElem:
        return self.terms.get((0,) * self.nvars, FieldElem.zero())

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    # ------------------------------------------------------------ arithmetic

    def _check(self, other: "MultiPoly"):
        if self.nvars != other.nvars:
            raise ValueError("variable count mismatch")

    def __add__(self, other: "MultiPoly") -> "MultiPoly":
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s = s + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return MultiPoly(self.nvars, out)

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "MultiPoly") -> "MultiPoly":
        return self + (-other)

    def __mul__(self, other: "MultiPoly") -> "MultiPoly":
        self._check(other)
        out: PolyData = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                c = ca * cb
                acc = out.get(e)
                if acc is None:
                    out[e] = c
                else:
                    acc = acc + c
                    if acc:
                        out[e] = acc
                    else:
                        del out[e]
        return MultiPoly(self.nvars, out)

    def scale(self, c: FieldElem) -> "MultiPoly":
        if not c:
            return MultiPoly(self.nvars)
        return MultiPoly(self.nvars, {e: k * c for e, k in self.terms.items()})

    def __pow__(self, n: int) -> "MultiPoly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        out = MultiPoly.const(self.nvars, FieldElem.one())
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def derivative(self, idx: int) -> "MultiPoly":
        out: PolyData = {}
        for e, c in self.terms.items():
            k = e[idx]
            if k:
                e2 = list(e)
                e2[idx] = k - 1
                e2 = tuple(e2)
                add = c * FE(k)
                acc = out.get(e2)
                out[e2] = add if acc is None else acc + add
        return MultiPoly(self.nvars, {e: c for e, c in out.items() if c})

    def evaluate(self, point: Sequence[FieldElem]) -> FieldElem:
        if len(point) != self.nvars:
            raise ValueError("evaluation point has wrong length")
        total = FieldElem.zero()
        for e, c in self.terms.items():
            term = c
            for k, v in zip(e, point):
                if k:
                    term = term * v ** k
            total = total + term
        return total

    def substitute(self, images: Sequence["MultiPoly"]) -> "MultiPoly":
        """Substitute variable i -> images[i] (all in the same target ring)."""
        if len(images) != self.nvars:
            raise ValueError("need one image per variable")
        tgt = images[0].nvars if images else self.nvars
        out = MultiPoly.zero(tgt)
        for e, c in self.terms.items():
            term = MultiPoly.const(tgt, c)
            for k, img in zip(e, images):
                if k:
                    term = term * img ** k
            out = out + term
        return out

    def compose_linear(self, mat: Sequence[Sequence[FieldElem]]) -> "MultiPoly":
        """Substitute variables by the linear map x_i -> sum_j mat[i][j] y_j."""
        images = [
            MultiPoly.linear(len(mat[0]), list(mat[i])) for i in range(self.nvars)
        ]
        return self.substitute(images)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for e, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i}^{k}" for i, k in enumerate(e) if k)
            bits.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


@dataclass(frozen=True)
class RatFun:
    """``num / base**k`` with a designated base polynomial.

    The base is part of the type: sums and products align exponents on the
    shared base, no implicit cancellation happens.
    """

    num: MultiPoly
    base: MultiPoly
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("negative denominator exponent")
        if self.base.is_zero():
            raise ZeroDivisionError("zero designated denominator")

    @staticmethod
    def from_poly(p: MultiPoly, base: MultiPoly) -> "RatFun":
        return RatFun(p, base, 0)

    @staticmethod
    def const(c: FieldElem, base: MultiPoly) -> "RatFun":
        return RatFun(MultiPoly.const(base.nvars, c), base, 0)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def _align(self, other: "RatFun") -> Tuple[MultiPoly, MultiPoly, int]:
        if self.base != other.base:
            raise ValueError("rational functions over different designated bases")
        k = max(self.k, other.k)
        a = self.num * self.base ** (k - self.k) if k > self.k else self.num
        b = other.num * other.base ** (k - other.k) if k > other.k else other.num
        return a, b, k

    def __add__(self, other: "RatFun") -> "RatFun":
        a, b, k = self._align(other)
        return RatFun(a + b, self.base, k).normalized()

    def __sub__(self, other: "RatFun") -> "RatFun":
        a, b, k = self._align(other)
        return RatFun(a - b, self.base, k).normalized()

    def __neg__(self) -> "RatFun":
        return RatFun(-self.num, self.base, self.k)

    def __mul__(self, other: "RatFun") -> "RatFun":
        if self.base != other.base:
            raise ValueError("rational functions over different designated bases")
        return RatFun(self.num * other.num, self.base, self.k + other.k).normalized()

    def scale(self, c: FieldElem) -> "RatFun":
        return RatFun(self.num.scale(c), self.base, self.k).normalized()

    def normalized(self) -> "RatFun":
        if self.num.is_zero() and self.k:
            return RatFun(self.num, self.base, 0)
        return self

    def derivative(self, idx: int) -> "RatFun":
        # d/dx (f / P^k) = (f' P - k f P') / P^(k+1)
        if self.k == 0:
            return RatFun(self.num.derivative(idx), self.base, 0)
        fprime = self.num.derivative(idx) * self.base
        corr = self.num * self.base.derivative(idx)
        return RatFun(fprime - corr.scale(FE(self.k)), self.base, self.k + 1).normalized()

    def evaluate(self, point: Sequence[FieldElem]) -> FieldElem:
        p = self.base.evaluate(point)
        if not p and self.k:
            raise ZeroDivisionError("evaluation point lies on the designated denominator")
        val = self.num.evaluate(point)
        if self.k:
            val = val / p ** self.k
        return val

    def cancel(self) -> "RatFun":
        """Best-effort removal of full base factors from the numerator."""
        out = self
        while out.k > 0:
            q = _poly_divide_exact(out.num, out.base)
            if q is None:
                break
            out = RatFun(q, out.base, out.k - 1)
        return out

    def rescale_base(self, scalar: FieldElem) -> "RatFun":
        """Re-normalize the designated base: base -> base/scalar.

        Keeps the represented value: num/(base)^k = (num/scalar^k)/(base/scalar)^k.
        """
        if not scalar:
            raise ZeroDivisionError("base rescale by zero")
        new_base = self.base.scale(FieldElem.one() / scalar)
        new_num = self.num.scale((FieldElem.one() / scalar) ** self.k)
        return RatFun(new_num, new_base, self.k)

    def compose_linear(self, mat: Sequence[Sequence[FieldElem]]) -> "RatFun":
        """Substitute the linear change of variables into num and base alike."""
        return RatFun(self.num.compose_linear(mat), self.base.compose_linear(mat), self.k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatFun):
            return NotImplemented
        if self.base != other.base:
            return False
        a, b, _ = self._align(other)
        return a == b

    def __repr__(self) -> str:
        if self.k == 0:
            return f"({self.num!r})"
        return f"({self.num!r}) / ({self.base!r})^{self.k}"


def _poly_divide_exact(num: MultiPoly, den: MultiPoly) -> MultiPoly | None:
    """Return num/den if den divides num exactly (multivariate long division
    against the single divisor, lex order); otherwise None."""
    if num.is_zero():
        return MultiPoly.zero(num.nvars)
    den_terms = sorted(den.terms.items(), reverse=True)
    lead_e, lead_c = den_terms[0]
    rem = MultiPoly(num.nvars, dict(num.terms))
    quot: PolyData = {}
    while not rem.is_zero():
        e, c = max(rem.terms.items())
        qe = tuple(a - b for a, b in zip(e, lead_e))
        if any(x < 0 for x in qe):
            return None
        qc = c / lead_c
        quot[qe] = quot.get(qe, FieldElem.zero()) + qc
        piece = MultiPoly(num.nvars, {qe: qc})
        rem = rem - piece * den
    return MultiPoly(num.nvars, {e: c for e, c in quot.items() if c})


@dataclass(frozen=True)
class ShiftedRatFun:
    """Result of :func:`ratfun_shift` with level-zero variables present.

    Value is ``num / base**k`` where ``num`` lives in ``n_q1 + n_q0``
    variables (q1 block first) and is exact through total q0-degree
    ``q0_order``; ``base`` involves only the q1 block.
    """

    num: MultiPoly
    base: MultiPoly
    k: int
    n_q1: int
    n_q0: int
    q0_order: int

    def q0_coefficient(self, q0_exp: Tuple[int, ...]) -> RatFun:
        """Extract the coefficient of the q0-monomial as a RatFun in q1."""
        if sum(q0_exp) > self.q0_order:
            raise ValueError("beyond declared q0 truncation order")
        out: PolyData = {}
        for e, c in self.num.terms.items():
            if tuple(e[self.n_q1:]) == q0_exp:
                out[tuple(e[: self.n_q1])] = c
        return RatFun(MultiPoly(self.n_q1, out), self.base, self.k)


def ratfun_shift(
    r: RatFun,
    q1_shift: Sequence[FieldElem],
    q0_matrix: Sequence[Sequence[FieldElem]] | None = None,
    q0_order: int = 0,
) -> ShiftedRatFun:
    """Substitute ``q1 -> q1 + xi_1 + A q0`` into ``r`` exactly.

    ``q1_shift`` is the constant shift ``xi_1``; ``q0_matrix`` (rows indexed
    by q1 components, columns by q0 components) gives the linear dependence on
    auxiliary level-zero variables.  The shifted denominator is re-expanded as
    a geometric series in the q0 block through total degree ``q0_order``;
    the substitution must keep the base nonzero at the shifted origin.

    Returns a :class:`ShiftedRatFun` in ``n_q1 + n_q0`` variables; with no
    q0 dependence (``q0_matrix`` None) the result has ``n_q0 = 0`` and is
    exact with no truncation.
    """
    n1 = r.num.nvars
    if len(q1_shift) != n1:
        raise ValueError("shift vector has wrong length")
    n0 = len(q0_matrix[0]) if q0_matrix else 0
    nv = n1 + n0
    # images of the q1 variables in the extended ring
    images: List[MultiPoly] = []
    for i in range(n1):
        coeffs = [FieldElem.zero()] * nv
        coeffs[i] = FieldElem.one()
        if q0_matrix:
            for j in range(n0):
                coeffs[n1 + j] = q0_matrix[i][j]
        images.append(MultiPoly.linear(nv, coeffs, q1_shift[i]))
    num_sub = r.num.substitute(images)
    base_sub = r.base.substitute(images)
    if r.k == 0:
        return ShiftedRatFun(num_sub, r.base, 0, n1, n0, q0_order)
    # split base_sub = B(q1) + E(q1, q0) with E divisible by q0 variables
    b_terms: PolyData = {}
    e_terms: PolyData = {}
    for e, c in base_sub.terms.items():
        if any(e[n1:]):
            e_terms[e] = c
        else:
            b_terms[e] = c
    new_base_ext = MultiPoly(nv, b_terms)
    new_base = MultiPoly(n1, {tuple(e[:n1]): c for e, c in b_terms.items()})
    if new_base.is_zero():
        raise ZeroDivisionError("shifted base vanishes identically")
    err = MultiPoly(nv, e_terms)
    if err.is_zero():
        return ShiftedRatFun(num_sub, new_base, r.k, n1, n0, q0_order)
    # 1/(B+E)^k = (1/B^k) * sum_j binom(-k, j) (E/B)^j, truncated in q0 degree
    out = MultiPoly.zero(nv)
    coeff = Fraction(1)
    epow = MultiPoly.const(nv, FieldElem.one())
    max_j = q0_order  # each E factor carries at least one q0 variable
    for j in range(max_j + 1):
        term = num_sub * epow * new_base_ext ** (max_j - j)
        out = out + term.scale(FE(coeff))
        coeff = coeff * Fraction(-(r.k + j), j + 1)
        epow = _truncate_q0(epow * err, n1, q0_order)
    out = _truncate_q0(out, n1, q0_order)
    return ShiftedRatFun(out, new_base, r.k + max_j, n1, n0, q0_order)


def _truncate_q0(p: MultiPoly, n1: int, q0_order: int) -> MultiPoly:
    return MultiPoly(
        p.nvars, {e: c for e, c in p.terms.items() if sum(e[n1:]) <= q0_order}
    )
