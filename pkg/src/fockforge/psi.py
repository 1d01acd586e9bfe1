"""Intersection numbers of psi classes on the moduli of curves, and exact
jets of the resulting generating function for the point target.

``intersection_number`` evaluates <tau_{l_1} ... tau_{l_n}>_g by the
Dijkgraaf-Verlinde-Verlinde recursion, memoized, seeded with
<tau_0^3>_0 = 1 and <tau_1>_1 = 1/24.  The recursion is validated (in the
test suite) against the String and Dilaton equations and the dimension
constraint sum(l) = 3g - 3 + n, which also forces the value to vanish
off-dimension.

``wk_jet`` differentiates the closed-form potential of the point

    F^g = -1/24 log(-q_1) [g=1]  +  sum  <tau_L>_g / (-q_1)^(2g-2+n) * q_L / n!

at a base value of q_1, giving the vertex data used by the semisimple
pipeline.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence, Tuple

from .fields import FE, FieldElem


def _double_factorial_odd(k: int) -> int:
    """(2k+1)!! for k >= -1, with (-1)!! = 1."""
    out = 1
    for j in range(1, k + 1):
        out *= 2 * j + 1
    return out * (1 if k >= 0 else 1)


def dimension_ok(g: int, exps: Sequence[int]) -> bool:
    return sum(exps) == 3 * g - 3 + len(exps)


@lru_cache(maxsize=None)
def _correlator(g: int, exps: Tuple[int, ...]) -> Fraction:
    n = len(exps)
    if g < 0 or n == 0 or 2 * g - 2 + n <= 0:
        return Fraction(0)
    if not dimension_ok(g, exps):
        return Fraction(0)
    if g == 0 and exps == (0, 0, 0):
        return Fraction(1)
    if g == 1 and exps == (1,):
        return Fraction(1, 24)
    # recurse on the largest exponent tau_{k+1}
    idx = max(range(n), key=lambda i: exps[i])
    k = exps[idx] - 1
    if k < 0:
        return Fraction(0)  # all insertions tau_0 off the base cases
    rest = exps[:idx] + exps[idx + 1:]
    total = Fraction(0)
    # transfer onto one of the remaining insertions, grouped by distinct value
    groups = _multiplicities(rest)
    for d, m in groups:
        coef = m * Fraction(
            _double_factorial_odd(k + d), _double_factorial_odd(d - 1)
        )
        new = list(rest)
        new.remove(d)
        new.append(k + d)
        total += coef * _correlator(g, tuple(sorted(new)))
    # boundary terms: one handle less, or a separating split; the split sum
    # runs over distinct submultisets weighted by binomial choice factors
    for a in range(k):
        b = k - 1 - a
        coef = Fraction(_double_factorial_odd(a) * _double_factorial_odd(b), 2)
        total += coef * _correlator(g - 1, tuple(sorted(rest + (a, b))))
        for g1 in range(g + 1):
            g2 = g - g1
            for s1, s2, ways in _submultiset_splits(groups):
                t1 = tuple(sorted(s1 + (a,)))
                t2 = tuple(sorted(s2 + (b,)))
                if 2 * g1 - 2 + len(t1) <= 0 or 2 * g2 - 2 + len(t2) <= 0:
                    continue
                left = _correlator(g1, t1)
                if not left:
                    continue
                total += coef * ways * left * _correlator(g2, t2)
    return total / _double_factorial_odd(k + 1)


def _multiplicities(items: Tuple[int, ...]) -> Tuple[Tuple[int, int], ...]:
    out = []
    for x in sorted(set(items)):
        out.append((x, items.count(x)))
    return tuple(out)


@lru_cache(maxsize=None)
def _binom(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    out = 1
    for j in range(k):
        out = out * (n - j) // (j + 1)
    return out


def _submultiset_splits(groups):
    """Yield (part1, part2, ways) over distinct splits of a multiset given as
    (value, multiplicity) pairs; ``ways`` counts labelled-insertion choices."""
    if not groups:
        yield (), (), 1
        return
    (value, mult), tail = groups[0], groups[1:]
    for s1, s2, ways in _submultiset_splits(tail):
        for take in range(mult + 1):
            yield (
                (value,) * take + s1,
                (value,) * (mult - take) + s2,
                ways * _binom(mult, take),
            )


def intersection_number(g: int, exps: Sequence[int]) -> FieldElem:
    """<tau_{l_1} ... tau_{l_n}>_g as an exact rational.

    Returns 0 for dimension-off input; raises on negative exponents or an
    empty insertion list (there is nothing to integrate against).
    """
    exps = tuple(exps)
    if any(e < 0 for e in exps):
        raise ValueError("negative psi exponent")
    if g < 0:
        raise ValueError("negative genus")
    if len(exps) == 0:
        raise ValueError("need at least one insertion")
    return FE(_correlator(g, tuple(sorted(exps))))


def intersection_table(max_total: int):
    """All nonzero values with sum(l) <= max_total, as rows (g, exps, value)."""
    rows = []
    for g in range(0, max_total // 3 + 2):
        for n in range(1, max_total + 3):
            if 2 * g - 2 + n <= 0:
                continue
            target = 3 * g - 3 + n
            if target < 0 or target > max_total:
                continue
            for exps in _partitions_into(target, n):
                val = _correlator(g, exps)
                if val:
                    rows.append((g, exps, val))
    return rows


def _partitions_into(total: int, n: int, lo: int = 0) -> Iterable[Tuple[int, ...]]:
    if n == 1:
        if total >= lo:
            yield (total,)
        return
    for head in range(lo, total + 1):
        for rest in _partitions_into(total - head, n - 1, head):
            yield (head,) + rest


def wk_jet(
    g: int,
    levels: Sequence[int],
    base: FieldElem,
    q0_order: int | None = None,
) -> FieldElem:
    """Mixed partial of the point potential F^g at q_0 = 0, q_1 = base,
    q_{>=2} = 0, differentiating once per entry of ``levels``.

    The genus-one constant is normalized away, so the empty genus-one jet is
    0 by convention.  ``base`` must be nonzero (pole of the closed form).
    """
    if base.is_zero():
        raise ZeroDivisionError("base point on the discriminant -q1 = 0")
    if any(l < 0 for l in levels):
        raise ValueError("negative level")
    levels = tuple(levels)
    if q0_order is not None and sum(1 for l in levels if l == 0) > q0_order:
        raise ValueError("level-0 derivative count exceeds declared q0 order")
    r = sum(1 for l in levels if l == 1)
    rest = tuple(sorted(l for l in levels if l != 1))
    n = len(rest)
    if g == 1 and n == 0:
        if r == 0:
            return FieldElem.zero()  # constant dropped
        # d^r/dq1^r of -(1/24) log(-q1) = -(1/24) (-1)^(r-1) (r-1)! q1^(-r)
        coef = Fraction(-1, 24) * Fraction((-1) ** (r - 1)) * _fact(r - 1)
        return FE(coef) * base ** (-r)
    if 2 * g - 2 + n <= 0:
        return FieldElem.zero()  # below the truncation of the closed form
    val = _correlator(g, rest)
    if not val:
        return FieldElem.zero()
    # d^r/dq1^r of val * (-q1)^(-k) = val * k(k+1)...(k+r-1) (-1)^r (-q1)^(-k-r) * (-1)^r
    k = 2 * g - 2 + n
    rising = 1
    for j in range(r):
        rising *= k + j
    return FE(val * rising) * (-base) ** (-(k + r))


def _fact(n: int) -> int:
    out = 1
    for j in range(2, n + 1):
        out *= j
    return out
