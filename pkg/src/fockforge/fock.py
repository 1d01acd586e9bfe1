"""Tame rational potentials in two interchangeable forms.

A potential near the dilaton point ``q = -D`` is held either as

* a :class:`CorrelatorTable` -- exact jets at the base point, keyed by
  ``(genus, multiset of (level, color))``, the form consumed by the graph
  contraction; or
* a :class:`ClosedFormElement` -- jets along the slice ``q_0 = 0``,
  ``q_{>=2} = 0`` with the level-one variables kept symbolic, stored as
  rational functions over the designated discriminant polynomial.  This is
  the form that shifts and substitutions act on.

Entries are mixed partial derivatives (not monomial coefficients): the entry
at key ``K`` is d^|K| F / dq_K evaluated on the slice.  Keys never contain
level-one indices; a level-one derivative is a q1-derivative of the stored
rational function.  The genus-one potential is carried through its first
q1-derivatives only; the additive constant is never represented.

Validators: tameness (entries vanish when total level exceeds 3g-3+n),
degree-(2-2g) homogeneity in the dilaton-shifted variables, and the pole
bound 5g-5+2n-sum(l) on discriminant exponents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .fields import FE, FieldElem
from .poly import MultiPoly, RatFun
from .psi import intersection_number

Index = Tuple[int, int]  # (level, color)
Key = Tuple[Index, ...]  # sorted


def sort_key(key: Iterable[Index]) -> Key:
    return tuple(sorted(key))


def key_levels(key: Key) -> Tuple[int, ...]:
    return tuple(l for l, _ in key)


def tameness_bound(g: int, n: int) -> int:
    return 3 * g - 3 + n


def pole_bound(g: int, key: Key) -> int:
    n = len(key)
    return 5 * g - 5 + 2 * n - sum(key_levels(key))


def default_q0_order(g_max: int, n_legs: int) -> int:
    """Conservative level-0 budget closing the Feynman rule under truncation:
    legs plus two flags per possible edge."""
    return n_legs + 2 * (3 * g_max - 3 + n_legs)


def format_key(g: int, key: Key) -> str:
    return f"{g}|" + ";".join(f"{l},{c}" for l, c in key)


def parse_key(s: str) -> Tuple[int, Key]:
    head, _, tail = s.partition("|")
    g = int(head)
    if not tail:
        return g, ()
    key = tuple(
        (int(l), int(c))
        for l, c in (pair.split(",") for pair in tail.split(";"))
    )
    return g, sort_key(key)


@dataclass
class CorrelatorTable:
    """Exact jets of a tame potential at a base point."""

    ncolors: int
    d1: Tuple[FieldElem, ...]
    g_max: int
    n_max: int
    q0_order: int
    discriminant: Optional[MultiPoly] = None
    entries: Dict[Tuple[int, Key], FieldElem] = field(default_factory=dict)

    def get(self, g: int, key: Iterable[Index]) -> FieldElem:
        return self.entries.get((g, sort_key(key)), FieldElem.zero())

    def set(self, g: int, key: Iterable[Index], value: FieldElem) -> None:
        k = sort_key(key)
        if value:
            self.entries[(g, k)] = value
        else:
            self.entries.pop((g, k), None)

    def nonzero_items(self):
        return self.entries.items()

    def copy_shell(self) -> "CorrelatorTable":
        return CorrelatorTable(
            ncolors=self.ncolors,
            d1=self.d1,
            g_max=self.g_max,
            n_max=self.n_max,
            q0_order=self.q0_order,
            discriminant=self.discriminant,
        )

    # -------------------------------------------------------------- serialization

    def to_json_dict(self) -> Dict:
        return {
            "colors": self.ncolors,
            "d1": [v.to_json() for v in self.d1],
            "g_max": self.g_max,
            "n_max": self.n_max,
            "q0_order": self.q0_order,
            "entries": {
                format_key(g, key): val.to_json()
                for (g, key), val in sorted(
                    self.entries.items(), key=lambda kv: (kv[0][0], kv[0][1])
                )
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @staticmethod
    def from_json(text: str) -> "CorrelatorTable":
        data = json.loads(text)
        table = CorrelatorTable(
            ncolors=data["colors"],
            d1=tuple(FieldElem.from_json(v) for v in data["d1"]),
            g_max=data["g_max"],
            n_max=data["n_max"],
            q0_order=data["q0_order"],
        )
        for key_str, val in data["entries"].items():
            g, key = parse_key(key_str)
            table.set(g, key, FieldElem.from_json(val))
        return table

    def to_csv(self) -> str:
        lines = ["genus,key,value"]
        for (g, key), val in sorted(
            self.entries.items(), key=lambda kv: (kv[0][0], len(kv[0][1]), kv[0][1])
        ):
            keystr = ";".join(f"{l},{c}" for l, c in key)
            lines.append(f"{g},\"{keystr}\",{val}")
        return "\n".join(lines) + "\n"


def check_tameness(table: CorrelatorTable) -> List[Tuple[int, Key]]:
    """Keys whose entries violate the vanishing for sum(l) > 3g - 3 + n."""
    bad = []
    for (g, key), val in table.nonzero_items():
        if val and sum(key_levels(key)) > tameness_bound(g, len(key)):
            bad.append((g, key))
    return sorted(bad)


def check_homogeneity(table: CorrelatorTable) -> List[Tuple[int, Key]]:
    """Euler identity from degree-(2-2g) homogeneity in dilaton-shifted
    variables: for an entry C at (g, K) with k insertions,

        sum_i (-D_1^i) * C[K + (1, i)] = (2 - 2g - k) * C[K].

    Requires the table to contain the one-extra-level-one entries, so only
    keys with fewer than n_max insertions are checked; genus-one entries are
    checked for k >= 1 only.
    """
    bad = []
    checked_keys = {
        (g, key)
        for (g, key) in table.entries
        if len(key) < table.n_max and not (g == 1 and len(key) == 0)
    }
    # also check zero entries whose augmented row might not vanish
    for (g, key) in sorted(checked_keys):
        k = len(key)
        lhs = FieldElem.zero()
        for i in range(table.ncolors):
            lhs = lhs + (-table.d1[i]) * table.get(g, key + ((1, i),))
        rhs = FE(2 - 2 * g - k) * table.get(g, key)
        if lhs != rhs:
            bad.append((g, key))
    return bad


@dataclass
class ClosedFormElement:
    """Rational closed form of a tame potential along the q1-slice.

    ``entries[(g, key)]`` is the jet at ``key`` (levels 0 or >= 2) as a
    RatFun in the q1 variables over the designated ``discriminant``;
    ``genus1_dlog[i]`` is d(c^1)/dq1^i.  ``d1`` is the leading dilaton
    vector, so the base point is ``q1 = -d1`` and P(-d1) = 1.
    """

    ncolors: int
    d1: Tuple[FieldElem, ...]
    discriminant: MultiPoly
    g_max: int
    n_max: int
    q0_order: int
    entries: Dict[Tuple[int, Key], RatFun] = field(default_factory=dict)
    genus1_dlog: Tuple[RatFun, ...] = ()
    # nonzero dilaton components at levels >= 2 (empty for a pure dilaton
    # vector z*d1); the jets below are taken on the slice through -D
    dtail: Dict[int, Tuple[FieldElem, ...]] = field(default_factory=dict)
    _jet_cache: Dict[Tuple[int, Key], RatFun] = field(default_factory=dict, repr=False)

    def base_point(self) -> Tuple[FieldElem, ...]:
        return tuple(-v for v in self.d1)

    def zero_ratfun(self) -> RatFun:
        return RatFun(MultiPoly.zero(self.ncolors), self.discriminant, 0)

    def set(self, g: int, key: Iterable[Index], value: RatFun) -> None:
        k = sort_key(key)
        if any(l == 1 for l, _ in k):
            raise ValueError("closed-form keys may not contain level-one indices")
        self._jet_cache.clear()
        if value.is_zero():
            self.entries.pop((g, k), None)
        else:
            self.entries[(g, k)] = value

    def jet(self, g: int, key: Iterable[Index]) -> RatFun:
        """Jet at an arbitrary key; level-one indices differentiate in q1.

        Raises on keys beyond the declared insertion budget: entries there
        were never computed and silence would not be exactness.
        """
        key = sort_key(key)
        if len(key) > self.n_max:
            raise OverflowError(
                f"jet at {len(key)} insertions exceeds budget {self.n_max}"
            )
        cached = self._jet_cache.get((g, key))
        if cached is not None:
            return cached
        ones = [c for (l, c) in key if l == 1]
        rest = tuple((l, c) for (l, c) in key if l != 1)
        if g == 1 and not rest:
            if not ones:
                raise ValueError("genus-one constant is not represented")
            out = self.genus1_dlog[ones[0]]
            for c in ones[1:]:
                out = out.derivative(c)
        else:
            out = self.entries.get((g, rest))
            if out is None:
                out = self.zero_ratfun()
            for c in ones:
                out = out.derivative(c)
        self._jet_cache[(g, key)] = out
        return out

    def jet_at_base(self, g: int, key: Iterable[Index]) -> FieldElem:
        return self.jet(g, key).evaluate(list(self.base_point()))

    def genus_range(self) -> Iterable[int]:
        return range(0, self.g_max + 1)


def jets_of(
    element: ClosedFormElement,
    base: Sequence[FieldElem] | None = None,
    g_max: int | None = None,
    n_max: int | None = None,
    q0_order: int | None = None,
) -> CorrelatorTable:
    """Taylor-expand the element at a base point into a jet table.

    The table includes level-one keys (obtained by q1-differentiation) so
    downstream validators and contractions can consume it directly.  The
    base must keep the discriminant nonzero.
    """
    base = list(base) if base is not None else list(element.base_point())
    g_max = element.g_max if g_max is None else g_max
    n_max = element.n_max if n_max is None else n_max
    q0_order = element.q0_order if q0_order is None else q0_order
    if not element.discriminant.evaluate(base):
        raise ZeroDivisionError("expansion base lies on the discriminant")
    table = CorrelatorTable(
        ncolors=element.ncolors,
        d1=tuple(-b for b in base),
        g_max=g_max,
        n_max=n_max,
        q0_order=q0_order,
        discriminant=element.discriminant,
    )
    for g in range(0, g_max + 1):
        for key in _candidate_keys(element.ncolors, g, n_max, q0_order):
            if g == 1 and len(key) == 0:
                continue
            if 2 * g - 2 + len(key) <= 0:
                continue
            val = element.jet(g, key).evaluate(base)
            if val:
                table.set(g, key, val)
    return table


def candidate_keys_exact(ncolors: int, g: int, n: int, q0_order: int) -> Iterable[Key]:
    """Sorted keys with exactly n insertions whose nonzero jets are allowed
    by tameness: sum of levels <= 3g - 3 + n, with at most q0_order
    level-0 entries."""
    import itertools

    bound = tameness_bound(g, n)
    if bound < 0:
        return
    alphabet = [(l, c) for l in range(0, bound + 1) for c in range(ncolors)]
    for key in itertools.combinations_with_replacement(alphabet, n):
        levels = key_levels(key)
        if sum(levels) > bound:
            continue
        if sum(1 for l in levels if l == 0) > q0_order:
            continue
        yield sort_key(key)


def _candidate_keys(ncolors: int, g: int, n_max: int, q0_order: int) -> Iterable[Key]:
    for n in range(0, n_max + 1):
        yield from candidate_keys_exact(ncolors, g, n, q0_order)


def check_pole(element: ClosedFormElement) -> List[Tuple[int, Key]]:
    """Stored discriminant exponents must satisfy k <= 5g - 5 + 2n - sum(l)."""
    bad = []
    for (g, key), rf in element.entries.items():
        if rf.is_zero():
            continue
        if rf.cancel().k > pole_bound(g, key):
            bad.append((g, key))
    for i, rf in enumerate(element.genus1_dlog):
        if not rf.is_zero() and rf.cancel().k > pole_bound(1, ((1, i),)):
            bad.append((1, ((1, i),)))
    return sorted(bad)


def wk_element(
    ncolors: int,
    g_max: int,
    n_max: int,
    q0_order: int | None = None,
) -> ClosedFormElement:
    """The (N+1)-fold product of point potentials: the descendant potential
    of ncolors points, with dilaton vector (1, ..., 1) z and discriminant
    prod_i(-q_1^i).

    Jets mixing distinct colors vanish; the single-color jets are psi-class
    intersection numbers over powers of the matching linear factor.
    """
    if q0_order is None:
        q0_order = default_q0_order(g_max, n_max)
    P = MultiPoly.const(ncolors, FieldElem.one())
    for i in range(ncolors):
        P = P * MultiPoly.linear(ncolors, [FE(-1) if j == i else FE(0) for j in range(ncolors)])
    d1 = tuple(FieldElem.one() for _ in range(ncolors))
    elem = ClosedFormElement(
        ncolors=ncolors,
        d1=d1,
        discriminant=P,
        g_max=g_max,
        n_max=n_max,
        q0_order=q0_order,
    )
    # genus-1 log-derivative: d/dq1^i of -(1/24) sum_j log(-q1^j) = -1/(24 q1^i)
    dlog = []
    for i in range(ncolors):
        num = MultiPoly.const(ncolors, FE(Fraction(1, 24)))
        for j in range(ncolors):
            if j != i:
                num = num * MultiPoly.linear(
                    ncolors, [FE(-1) if t == j else FE(0) for t in range(ncolors)]
                )
        dlog.append(RatFun(num, P, 1))
    elem.genus1_dlog = tuple(dlog)
    for g in range(0, g_max + 1):
        for n in range(1 if g >= 1 else 3, n_max + 1):
            if 2 * g - 2 + n <= 0:
                continue
            bound = tameness_bound(g, n)
            if bound < 0:
                continue
            for color in range(ncolors):
                for levels in _level_multisets(n, bound, q0_order):
                    val = intersection_number(g, levels)
                    if not val:
                        continue
                    key = sort_key((l, color) for l in levels)
                    k = 2 * g - 2 + n
                    num = MultiPoly.const(ncolors, val)
                    for j in range(ncolors):
                        if j != color:
                            num = num * MultiPoly.linear(
                                ncolors,
                                [FE(-1) if t == j else FE(0) for t in range(ncolors)],
                            ) ** k
                    elem.set(g, key, RatFun(num, P, k))
    return elem


def _level_multisets(n: int, bound: int, q0_order: int) -> Iterable[Tuple[int, ...]]:
    """Multisets of n levels from {0} u {2,3,...} with total <= bound and at
    most q0_order zeros, generated directly (no filtering blowup)."""
    def tails(remaining_slots: int, budget: int, lo: int):
        yield ()
        if remaining_slots == 0:
            return
        for head in range(lo, budget + 1):
            for rest in tails(remaining_slots - 1, budget - head, head):
                yield (head,) + rest

    for tail in tails(n, bound, 2):
        zeros = n - len(tail)
        if 0 <= zeros <= q0_order:
            yield (0,) * zeros + tail


class WKFamily:
    """Lazy jets of the (N+1)-fold point potential: same contract as
    :func:`wk_element` but computing each jet on demand, so very wide
    insertion budgets cost nothing until queried."""

    def __init__(self, ncolors: int, g_max: int, n_max: int, q0_order: int | None = None):
        self.ncolors = ncolors
        self.g_max = g_max
        self.n_max = n_max
        self.q0_order = default_q0_order(g_max, n_max) if q0_order is None else q0_order
        self.d1 = tuple(FieldElem.one() for _ in range(ncolors))
        self.dtail: Dict[int, Tuple[FieldElem, ...]] = {}
        p = MultiPoly.const(ncolors, FieldElem.one())
        self._factors = []
        for i in range(ncolors):
            f = MultiPoly.linear(
                ncolors, [FE(-1) if j == i else FE(0) for j in range(ncolors)]
            )
            self._factors.append(f)
            p = p * f
        self.discriminant = p
        self._cache: Dict[Tuple[int, Key], RatFun] = {}

    def base_point(self) -> Tuple[FieldElem, ...]:
        return tuple(-v for v in self.d1)

    def zero_ratfun(self) -> RatFun:
        return RatFun(MultiPoly.zero(self.ncolors), self.discriminant, 0)

    def _cofactor(self, color: int, power: int) -> MultiPoly:
        out = MultiPoly.const(self.ncolors, FieldElem.one())
        for j in range(self.ncolors):
            if j != color:
                out = out * self._factors[j] ** power
        return out

    def jet(self, g: int, key: Iterable[Index]) -> RatFun:
        key = sort_key(key)
        if len(key) > self.n_max:
            raise OverflowError(
                f"jet at {len(key)} insertions exceeds budget {self.n_max}"
            )
        if sum(1 for l, _ in key if l == 0) > self.q0_order:
            raise OverflowError("level-0 insertions exceed declared q0 order")
        cached = self._cache.get((g, key))
        if cached is not None:
            return cached
        colors = {c for _, c in key}
        if len(colors) > 1:
            out = self.zero_ratfun()
        else:
            color = colors.pop() if colors else 0
            ones = sum(1 for l, _ in key if l == 1)
            rest = tuple(l for l, _ in key if l != 1)
            if g == 1 and not rest:
                if not ones:
                    raise ValueError("genus-one constant is not represented")
                # d/dq1^c of -(1/24) sum_j log(-q1^j) = -1/(24 q1^c)
                out = RatFun(
                    self._cofactor(color, 1).scale(FE(Fraction(1, 24))),
                    self.discriminant,
                    1,
                )
                for _ in range(ones - 1):
                    out = out.derivative(color)
            else:
                n = len(rest)
                if 2 * g - 2 + n <= 0 or n == 0:
                    # the pure-q1 part of F^g vanishes on the slice for g != 1:
                    # all-tau_1 correlators are off-dimension
                    out = self.zero_ratfun()
                else:
                    val = intersection_number(g, rest)
                    if val.is_zero():
                        out = self.zero_ratfun()
                    else:
                        k = 2 * g - 2 + n
                        out = RatFun(
                            self._cofactor(color, k).scale(val), self.discriminant, k
                        )
                        for _ in range(ones):
                            out = out.derivative(color)
        self._cache[(g, key)] = out
        return out
