"""Propagators, the Feynman-rule transformation, shifts, substitution by a
unitary series, and the assembly of abstract ancestor potentials.

The propagator of a unitary series R comes from the generating function

    sum (-1)^(n+m) V^{(n,i),(m,j)} w^n z^m
        = < e^i, [ (R(-w)^{-1} R(z) - id) / (z+w) ] e^j >,

whose numerator must be divisible by (z+w); ``propagator_crosscheck``
recomputes the same numbers by the truncation-and-projection formula
``-[R(z)^{-1}[R(z)(-z)^{-n-1} e^j]_+]^i_m`` and the two must agree exactly.

``feynman_transform`` contracts jets over connected stable graphs weighted
by 1/|Aut|; ``wick_transform`` is an independent brute-force oracle applying
exp(hbar/2 Delta d^2) to the truncated exponential directly.  A composite
``quantize_R`` = transform + variable substitution realizes the quantized
operator on closed forms; ``abstract_ancestor`` runs the whole semisimple
pipeline from Frobenius data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .fields import FE, FieldElem
from .fock import (
    ClosedFormElement,
    CorrelatorTable,
    Index,
    Key,
    _candidate_keys,
    candidate_keys_exact,
    default_q0_order,
    key_levels,
    sort_key,
    tameness_bound,
)
from .frobenius import FrobeniusPoint, canonical_data, solve_R, v_series_from_mu
from .graphs import enumerate_stable_graphs
from .poly import MultiPoly, RatFun
from .series import (
    MatSeries,
    Matrix,
    mat_identity,
    mat_inverse,
    mat_mul,
    mat_transpose as mat_transpose_local,
    mat_vec,
    mat_zero,
    series_inverse,
    series_mul,
)


@dataclass
class Propagator:
    """Symmetric table of edge weights indexed by pairs of (level, color)."""

    ncolors: int
    cutoff: int
    entries: Dict[Tuple[Index, Index], FieldElem] = field(default_factory=dict)

    def set(self, a: Index, b: Index, value: FieldElem) -> None:
        key = (a, b) if a <= b else (b, a)
        if value:
            self.entries[key] = value
        else:
            self.entries.pop(key, None)

    def get(self, a: Index, b: Index) -> FieldElem:
        key = (a, b) if a <= b else (b, a)
        return self.entries.get(key, FieldElem.zero())

    def oriented_support(self) -> List[Tuple[Index, Index, FieldElem]]:
        out = []
        for (a, b), v in self.entries.items():
            out.append((a, b, v))
            if a != b:
                out.append((b, a, v))
        return sorted(out, key=lambda t: (t[0], t[1]))

    def __neg__(self) -> "Propagator":
        return Propagator(
            self.ncolors,
            self.cutoff,
            {k: -v for k, v in self.entries.items()},
        )

    def __add__(self, other: "Propagator") -> "Propagator":
        if self.ncolors != other.ncolors:
            raise ValueError("color count mismatch")
        out = Propagator(self.ncolors, min(self.cutoff, other.cutoff), dict(self.entries))
        for (a, b), v in other.entries.items():
            out.set(a, b, out.get(a, b) + v)
        return out

    def max_level(self) -> int:
        return max((max(a[0], b[0]) for (a, b) in self.entries), default=0)


def givental_propagator(
    r: MatSeries,
    cutoff: int,
    gram: Matrix | None = None,
    gram_target: Matrix | None = None,
) -> Propagator:
    """Propagator of a unitary series from the generating-function formula.

    Needs ``r`` truncated at order >= 2*cutoff + 1.  The adjoint in the
    numerator R(w)^dagger R(z) - id is taken with respect to the pairings
    (identity by default), so failure of (z+w)-divisibility detects a
    non-unitary input; for unitary input the adjoint equals R(-w)^{-1}.
    """
    dim = r.dim
    if r.order < 2 * cutoff + 1:
        raise ValueError("series order too small for requested cutoff")
    gram_inv = mat_inverse(gram) if gram is not None else mat_identity(dim)
    gt = gram_target if gram_target is not None else (
        gram if gram is not None else mat_identity(dim)
    )

    # R(w)^dagger has w^n coefficient G^{-1} R_n^T Gt, so
    # Q_{n,m} = G^{-1} R_n^T Gt R_m - delta_{n0} delta_{m0} id
    def q_coeff(n: int, m: int) -> Matrix:
        out = mat_mul(
            mat_mul(gram_inv, mat_mul(mat_transpose_local(r.coeff(n)), gt)),
            r.coeff(m),
        )
        if n == 0 and m == 0:
            ident = mat_identity(dim)
            out = tuple(
                tuple(out[i][j] - ident[i][j] for j in range(dim))
                for i in range(dim)
            )
        return out

    # (z+w) M = Q  solves to  M_{n,m} = sum_t (-1)^t Q_{n-t, m+1+t};
    # divisibility requires Q_{0,0} = 0 and Q_{n,0} = M_{n-1,0} for n >= 1
    zero = mat_zero(dim)
    if q_coeff(0, 0) != zero:
        raise ValueError("numerator not divisible by (z+w): R is not unitary")

    def m_coeff(n: int, m: int) -> Matrix:
        acc = None
        for t in range(n + 1):
            q = q_coeff(n - t, m + 1 + t)
            if t % 2:
                q = tuple(tuple(-x for x in row) for row in q)
            acc = q if acc is None else tuple(
                tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(acc, q)
            )
        return acc

    for n in range(1, 2 * cutoff + 2):
        if q_coeff(n, 0) != m_coeff(n - 1, 0):
            raise ValueError("numerator not divisible by (z+w): R is not unitary")
    prop = Propagator(ncolors=dim, cutoff=cutoff)
    for n in range(cutoff + 1):
        for m in range(n, cutoff + 1):
            w = mat_mul(m_coeff(n, m), gram_inv)
            sign = FE(1) if (n + m) % 2 == 0 else FE(-1)
            for i in range(dim):
                for j in range(dim):
                    if w[i][j]:
                        val = sign * w[i][j]
                        a, b = (n, i), (m, j)
                        old = prop.get(a, b)
                        if old and old != val:
                            raise ArithmeticError("propagator not symmetric")
                        prop.set(a, b, val)
    return prop


def propagator_crosscheck(
    r: MatSeries,
    cutoff: int,
    gram: Matrix | None = None,
) -> Propagator:
    """Same propagator by -[R(z)^{-1} [R(z) (-z)^{-n-1} e^j]_+]^i_m.

    Needs ``r`` truncated at order >= 2*cutoff + 1 (the plus-truncation digs
    n+1 coefficients deep before re-expanding).
    """
    dim = r.dim
    if r.order < 2 * cutoff + 1:
        raise ValueError("series order too small for crosscheck at this cutoff")
    gram_inv = mat_inverse(gram) if gram is not None else mat_identity(dim)
    rinv = series_inverse(r)
    prop = Propagator(ncolors=dim, cutoff=cutoff)
    for n in range(cutoff + 1):
        sign = FE(1) if (n + 1) % 2 == 0 else FE(-1)
        for j in range(dim):
            ej = tuple(gram_inv[t][j] for t in range(dim))
            # T_m = (-1)^(n+1) R_{m+n+1} e^j  (the plus-part, re-indexed)
            tvec = [
                tuple(sign * x for x in mat_vec(r.coeff(m + n + 1), ej))
                for m in range(cutoff + 1)
            ]
            # apply R(z)^{-1}
            for m in range(cutoff + 1):
                acc = [FieldElem.zero()] * dim
                for k in range(m + 1):
                    img = mat_vec(rinv.coeff(k), tvec[m - k])
                    acc = [x + y for x, y in zip(acc, img)]
                for i in range(dim):
                    if acc[i]:
                        val = -acc[i]
                        a, b = (n, j), (m, i)
                        old = prop.get(a, b)
                        if old and old != val:
                            raise ArithmeticError("propagator not symmetric")
                        prop.set(a, b, val)
    return prop


# --------------------------------------------------------------------------
# Feynman-rule transformation on jet tables
# --------------------------------------------------------------------------


def _graph_leg_parts(graph, key: Key):
    """Assign the sorted output key to the labelled legs: leg i carries
    key[i]; return per-vertex leg multisets."""
    parts: List[List[Index]] = [[] for _ in range(graph.num_vertices)]
    for label, v in enumerate(graph.legs):
        parts[v].append(key[label])
    return [tuple(sorted(p)) for p in parts]


def _contract_graph(graph, aut, key: Key, vertex_jet, prop: Propagator, zero, add, scale):
    """Sum over internal edge flags of the decorated-graph contraction.

    ``vertex_jet(g_v, key_v)`` supplies vertex values in a commutative scalar
    type T (FieldElem or RatFun); T must support ``*`` with itself, and
    ``scale(t, fe)`` multiplies it by a FieldElem.  Includes 1/|Aut|.
    """
    nv = graph.num_vertices
    legs = _graph_leg_parts(graph, key)
    flags = graph.flag_counts()
    budgets = []
    for v in range(nv):
        b = tameness_bound(graph.genera[v], flags[v]) - sum(l for l, _ in legs[v])
        if b < 0:
            return zero
        budgets.append(b)
    support = prop.oriented_support()
    edges = graph.edges
    total = zero
    inv_aut = FE(Fraction(1, aut))

    def rec(idx, vertex_flags, budgets_left, weight):
        nonlocal total
        if idx == len(edges):
            val = None
            for v in range(nv):
                jet = vertex_jet(
                    graph.genera[v], sort_key(legs[v] + tuple(vertex_flags[v]))
                )
                if jet is None:
                    return
                val = jet if val is None else val * jet
            total = add(total, scale(val, weight))
            return
        a_v, b_v = edges[idx]
        for fa, fb, w in support:
            ba = budgets_left[a_v] - fa[0]
            if ba < 0:
                continue
            budgets_left[a_v] = ba
            bb = budgets_left[b_v] - fb[0]
            if bb < 0:
                budgets_left[a_v] += fa[0]
                continue
            budgets_left[b_v] = bb
            vertex_flags[a_v].append(fa)
            vertex_flags[b_v].append(fb)
            rec(idx + 1, vertex_flags, budgets_left, weight * w)
            vertex_flags[a_v].pop()
            vertex_flags[b_v].pop()
            budgets_left[a_v] += fa[0]
            budgets_left[b_v] += fb[0]

    rec(0, [[] for _ in range(nv)], budgets, inv_aut)
    return total


def vertex_sections(targets: Iterable[Tuple[int, int]]) -> set:
    """All (g_v, n_v) pairs occurring as vertices of stable graphs for the
    given target (g, n) pairs: the sections of an input table that a
    Feynman transform to those targets can query."""
    out = set()
    for g, n in targets:
        if 2 * g - 2 + n <= 0:
            continue
        for graph, _ in enumerate_stable_graphs(g, n):
            for gv, nv in zip(graph.genera, graph.flag_counts()):
                out.add((gv, nv))
    return out


def feynman_transform(
    table: CorrelatorTable,
    prop: Propagator,
    g_max: int | None = None,
    n_max: int | None = None,
    q0_order: int | None = None,
    sections: Iterable[Tuple[int, int]] | None = None,
) -> CorrelatorTable:
    """Transform a jet table by the stable-graph Feynman rule.

    For each (g, n) output key the sum runs over connected stable decorated
    graphs; vertices carry the input jets, edges the propagator, legs the
    fixed output indices, with weight 1/|Aut|.  Internal flag levels are
    finite by tameness (level <= 3 g_v - 2 per flag at each vertex).

    ``sections`` restricts the computed output to an explicit set of (g, n)
    pairs (e.g. just the sections another transform will query); the default
    is the full box g <= g_max, n <= n_max.
    """
    g_max = table.g_max if g_max is None else g_max
    n_max = table.n_max if n_max is None else n_max
    q0_order = table.q0_order if q0_order is None else q0_order
    if sections is None:
        sections = [
            (g, n) for g in range(0, g_max + 1) for n in range(0, n_max + 1)
        ]
    sections = sorted({(g, n) for g, n in sections if 2 * g - 2 + n > 0})
    top_genus = max((g for g, _ in sections), default=0)
    if prop.entries and prop.cutoff < 3 * top_genus - 2:
        raise ValueError(
            f"propagator cutoff {prop.cutoff} below required level {3 * top_genus - 2}"
        )
    out = CorrelatorTable(
        ncolors=table.ncolors,
        d1=table.d1,
        g_max=g_max,
        n_max=max(n_max, max((n for _, n in sections), default=0)),
        q0_order=q0_order,
        discriminant=table.discriminant,
    )
    zero = FieldElem.zero()

    def vertex_jet(gv, keyv):
        val = table.get(gv, keyv)
        return val if val else None

    add = lambda x, y: x + y
    scale = lambda t, fe: t * fe
    for g, n in sections:
        graphs = enumerate_stable_graphs(g, n)
        for key in candidate_keys_exact(table.ncolors, g, n, q0_order):
            acc = zero
            for graph, aut in graphs:
                acc = acc + _contract_graph(
                    graph, aut, key, vertex_jet, prop, zero, add, scale
                )
            if acc:
                out.set(g, key, acc)
    return out


# --------------------------------------------------------------------------
# Independent oracle: operator exp(hbar/2 Delta d^2) on truncated exponentials
# --------------------------------------------------------------------------


def wick_transform(
    table: CorrelatorTable,
    prop: Propagator,
    g_max: int,
    n_max: int,
    q0_order: int | None = None,
) -> CorrelatorTable:
    """Brute-force transform: exponentiate the potential as a truncated
    polynomial in the jet variables, apply exp(hbar/2 sum Delta d d)
    term by term, take the logarithm, and read off jets.

    Independent of the stable-graph machinery; exact on its truncation
    ranges.  Intended for small validation cases.
    """
    q0_order = table.q0_order if q0_order is None else q0_order
    # variable universe: all indices appearing in table keys or propagator
    vars_set = set()
    for (_, key) in table.entries:
        vars_set.update(key)
    for (a, b) in prop.entries:
        vars_set.update((a, b))
    variables = sorted(vars_set)
    vindex = {v: i for i, v in enumerate(variables)}
    # exact closure bound: a monomial of degree d at hbar^p contributes to an
    # output of degree <= n_max at genus <= g_max only if
    # d <= n_max + 2(g_max - 1 - p) and p >= -d/3, so d <= 3 n_max + 6(g_max-1)
    deg_cap = max(n_max, 3 * n_max + 6 * (g_max - 1))
    hbar_min = -(deg_cap // 3 + 1)
    hbar_max = g_max - 1

    # polynomial: dict {(hbar_power, monomial): FieldElem}; monomial is a
    # sorted tuple of variable ids
    def padd(p, q):
        for k, v in q.items():
            s = p.get(k)
            if s is None:
                p[k] = v
            else:
                s = s + v
                if s:
                    p[k] = s
                else:
                    del p[k]

    def pmul(p, q):
        out: Dict = {}
        for (h1, m1), v1 in p.items():
            for (h2, m2), v2 in q.items():
                h = h1 + h2
                if h > hbar_max or h < hbar_min:
                    continue
                if len(m1) + len(m2) > deg_cap:
                    continue
                key = (h, tuple(sorted(m1 + m2)))
                v = v1 * v2
                s = out.get(key)
                if s is None:
                    out[key] = v
                else:
                    s = s + v
                    if s:
                        out[key] = s
                    else:
                        del out[key]
        return out

    def aut_factor(key: Key) -> int:
        out = 1
        for _, group in itertools.groupby(key):
            out *= _fact(len(list(group)))
        return out

    w: Dict = {}
    for (g, key), val in table.entries.items():
        mono = tuple(sorted(vindex[ix] for ix in key))
        padd(w, {(g - 1, mono): val / FE(aut_factor(key))})
    # exp(W) truncated
    expw: Dict = {(0, ()): FieldElem.one()}
    term: Dict = {(0, ()): FieldElem.one()}
    k = 1
    while True:
        term = pmul(term, w)
        term = {key: v / FE(k) for key, v in term.items()}
        if not term:
            break
        padd(expw, term)
        k += 1
        if k > deg_cap + g_max + 5:
            break
    # operator: hbar/2 sum_{a,b oriented} Delta^{ab} d_a d_b
    support = prop.oriented_support()

    def apply_quad(p):
        out: Dict = {}
        for (h, mono), v in p.items():
            if h + 1 > hbar_max:
                continue
            counts: Dict[int, int] = {}
            for x in mono:
                counts[x] = counts.get(x, 0) + 1
            for a, b, wgt in support:
                ia, ib = vindex.get(a), vindex.get(b)
                if ia is None or ib is None:
                    continue
                ca = counts.get(ia, 0)
                if not ca:
                    continue
                cb = counts.get(ib, 0) - (1 if ib == ia else 0)
                if cb <= 0:
                    continue
                lst = list(mono)
                lst.remove(ia)
                lst.remove(ib)
                key = (h + 1, tuple(lst))
                add = v * wgt * FE(Fraction(ca * cb, 2))
                s = out.get(key)
                if s is None:
                    out[key] = add
                else:
                    s = s + add
                    if s:
                        out[key] = s
                    else:
                        del out[key]
        return out

    total: Dict = dict(expw)
    layer: Dict = expw
    k = 1
    while True:
        layer = apply_quad(layer)
        layer = {key: v / FE(k) for key, v in layer.items()}
        if not layer:
            break
        padd(total, layer)
        k += 1
    # log
    one_key = (0, ())
    c0 = total.get(one_key, FieldElem.zero())
    if c0 != FE(1):
        raise ArithmeticError("transformed exponential lost its unit term")
    rest = dict(total)
    del rest[one_key]
    logp: Dict = {}
    term = {one_key: FieldElem.one()}
    k = 1
    sign = 1
    while True:
        term = pmul(term, rest)
        if not term:
            break
        piece = {key: v * FE(Fraction(sign, k)) for key, v in term.items()}
        padd(logp, piece)
        k += 1
        sign = -sign
        if k > 2 * deg_cap + 8:
            break
    out = table.copy_shell()
    out.g_max, out.n_max, out.q0_order = g_max, n_max, q0_order
    out.entries = {}
    for (h, mono), v in logp.items():
        g = h + 1
        if g < 0 or g > g_max or len(mono) > n_max:
            continue
        key = sort_key(variables[i] for i in mono)
        if sum(1 for l, _ in key if l == 0) > q0_order:
            continue
        val = v * FE(aut_factor(key))
        if val:
            out.set(g, key, out.get(g, key) + val)
    return out


def _fact(n: int) -> int:
    out = 1
    for j in range(2, n + 1):
        out *= j
    return out


# --------------------------------------------------------------------------
# Closed-form transformation: family of transformed jets along the q1 slice
# --------------------------------------------------------------------------


class FeynmanFamily:
    """Jets of the Feynman-transformed potential as rational functions of q1.

    Vertex data comes from a closed-form element, so the transformed jets are
    exact rational functions on the whole q1 slice.  The family is not
    q1-jet-consistent in the naive sense (the transformed flat structure is
    twisted), so level-one keys are computed with explicit legs rather than
    by differentiating lower entries.
    """

    def __init__(self, src: ClosedFormElement, prop: Propagator, g_max: int | None = None):
        self.src = src
        self.prop = prop
        self.g_max = src.g_max if g_max is None else g_max
        if prop.entries and prop.cutoff < 3 * self.g_max - 2:
            raise ValueError(
                f"propagator cutoff {prop.cutoff} below required level {3 * self.g_max - 2}"
            )
        self.ncolors = src.ncolors
        self.d1 = src.d1
        self.dtail = dict(src.dtail)
        self.discriminant = src.discriminant
        self.n_max = src.n_max
        self.q0_order = src.q0_order
        self._cache: Dict[Tuple[int, Key], RatFun] = {}

    def zero_ratfun(self) -> RatFun:
        return RatFun(MultiPoly.zero(self.ncolors), self.discriminant, 0)

    def base_point(self):
        return tuple(-v for v in self.d1)

    def jet(self, g: int, key: Iterable[Index]) -> RatFun:
        key = sort_key(key)
        if not self.prop.entries:
            return self.src.jet(g, key)  # only edge-free graphs survive
        cached = self._cache.get((g, key))
        if cached is not None:
            return cached
        zero = self.zero_ratfun()

        def vertex_jet(gv, keyv):
            val = self.src.jet(gv, keyv)
            return None if val.is_zero() else val

        acc = zero
        for graph, aut in enumerate_stable_graphs(g, len(key)):
            acc = acc + _contract_graph(
                graph, aut, key, vertex_jet, self.prop, zero,
                lambda x, y: x + y,
                lambda t, fe: t.scale(fe),
            )
        self._cache[(g, key)] = acc
        return acc


def translate(
    elem: ClosedFormElement,
    xi: Dict[int, Sequence[FieldElem]],
    out_n_max: int | None = None,
) -> ClosedFormElement:
    """Shift isomorphism: re-center the element at dilaton vector D + xi.

    ``xi`` maps levels >= 1 to shift vectors (level 0 is not allowed).  The
    stored q1-jets are re-expanded in the level >= 2 directions; the
    designated discriminant is rescaled so that it is 1 at the new base.
    The genus-one constant is re-normalized away automatically since it is
    never stored.
    """
    if 0 in xi:
        raise ValueError("level-zero shifts are not part of the dilaton group")
    nc = elem.ncolors
    zero_vec = tuple(FieldElem.zero() for _ in range(nc))
    xi1 = tuple(xi.get(1, zero_vec))
    new_d1 = tuple(a + b for a, b in zip(elem.d1, xi1))
    scalar = elem.discriminant.evaluate([-v for v in new_d1])
    if not scalar:
        raise ZeroDivisionError("shifted base lies on the discriminant")
    out_n_max = elem.n_max if out_n_max is None else out_n_max
    # displacement of the expansion slice at level m >= 2 is -xi_m
    disp = {
        m: tuple(-v for v in vec)
        for m, vec in xi.items()
        if m >= 2 and any(vec)
    }
    new_dtail = dict(elem.dtail)
    for m, vec in xi.items():
        if m < 2:
            continue
        cur = new_dtail.get(m, zero_vec)
        new = tuple(a + b for a, b in zip(cur, vec))
        if any(new):
            new_dtail[m] = new
        else:
            new_dtail.pop(m, None)
    out = ClosedFormElement(
        ncolors=nc,
        d1=new_d1,
        discriminant=elem.discriminant.scale(FieldElem.one() / scalar),
        g_max=elem.g_max,
        n_max=out_n_max,
        q0_order=elem.q0_order,
        dtail=new_dtail,
    )

    def shifted_jet(g: int, key: Key) -> RatFun:
        acc = None
        for extra, weight in _extras(disp, g, key, elem.n_max - len(key)):
            jet = elem.jet(g, sort_key(key + extra))
            if jet.is_zero():
                continue
            term = jet.scale(weight)
            acc = term if acc is None else acc + term
        if acc is None:
            acc = elem.zero_ratfun()
        return acc.rescale_base(scalar)

    for g in range(0, elem.g_max + 1):
        for key in _candidate_keys(nc, g, out_n_max, elem.q0_order):
            if 2 * g - 2 + len(key) <= 0 or any(l == 1 for l, _ in key):
                continue
            val = shifted_jet(g, key)
            if not val.is_zero():
                out.set(g, key, val)
    dlog = []
    for i in range(nc):
        dlog.append(shifted_jet(1, ((1, i),)))
    out.genus1_dlog = tuple(dlog)
    return out


def _extras(disp, g: int, key: Key, budget: int):
    """Multisets of extra (level >= 2, color) insertions with their Taylor
    weights prod(disp^mult)/mult!, bounded by tameness slack.

    Raises OverflowError if the insertion budget runs out while slack-allowed
    extras remain: clipping them would silently truncate an exact series.
    """
    slack = tameness_bound(g, len(key)) - sum(key_levels(key))
    options = []
    for m, vec in sorted(disp.items()):
        for c, v in enumerate(vec):
            if v:
                options.append(((m, c), v))

    def rec(idx, slack_left, budget_left, current, weight):
        yield tuple(current), weight
        for k in range(idx, len(options)):
            (idx_pair, v) = options[k]
            m = idx_pair[0]
            # adding one more (m, c): slack decreases by m - 1
            if slack_left < m - 1:
                continue
            if budget_left < 1:
                raise OverflowError(
                    "insertion budget exhausted while shift re-expansion "
                    "still has tameness slack; enlarge the source budget"
                )
            mult = current.count(idx_pair) + 1
            current.append(idx_pair)
            for item, w in rec(
                k, slack_left - (m - 1), budget_left - 1, current, weight * v / FE(mult)
            ):
                yield item, w
            current.pop()

    yield from rec(0, slack, budget, [], FieldElem.one())


class SubstitutedFamily:
    """Jets of A(s^{-1} q) along the target q1 slice, computed lazily.

    The source must sit at a pure dilaton vector.  Each target derivative
    lifts through the lower-triangular tail of s^{-1}; the slice displacement
    at levels >= 2 re-expands through extra insertions evaluated at
    B_{d-1}(q1 + s_0 D_1).  All ranges are closed by tameness; insufficient
    series order raises rather than truncating silently.
    """

    def __init__(self, src, s: MatSeries, g_max: int | None = None):
        if src.dtail:
            raise ValueError("substitution requires a pure source dilaton vector")
        nc = src.ncolors
        if s.dim != nc:
            raise ValueError("series dimension does not match color count")
        self.src = src
        self.s = s
        self.ncolors = nc
        self.g_max = src.g_max if g_max is None else g_max
        self.n_max = src.n_max
        self.q0_order = src.q0_order
        self.b = series_inverse(s)
        self.b0 = self.b.coeff(0)
        s0d1 = mat_vec(s.coeff(0), src.d1)
        need_order = max(0, 3 * self.g_max - 3 + src.n_max)
        if s.order < need_order:
            raise OverflowError(
                f"series order {s.order} cannot cover tameness range {need_order}"
            )
        self.d1 = tuple(s0d1)
        self.dtail: Dict[int, Tuple[FieldElem, ...]] = {}
        for m in range(2, s.order + 2):
            vec = mat_vec(s.coeff(m - 1), src.d1)
            if any(vec):
                self.dtail[m] = tuple(vec)
        self.discriminant = src.discriminant.compose_linear(self.b0)
        # source slice displacement q'_d = B_{d-1}(q1 + s0 D1) for d >= 2
        self.disp_polys: Dict[int, List[MultiPoly]] = {}
        for d in range(2, s.order + 2):
            bd = self.b.coeff(d - 1)
            polys = []
            nonzero = False
            for i in range(nc):
                row = [bd[i][j] for j in range(nc)]
                const = sum(
                    (bd[i][j] * s0d1[j] for j in range(nc) if bd[i][j] and s0d1[j]),
                    FieldElem.zero(),
                )
                poly = MultiPoly.linear(nc, row, const)
                polys.append(poly)
                if not poly.is_zero():
                    nonzero = True
            if nonzero:
                self.disp_polys[d] = polys
        self._cache: Dict[Tuple[int, Key], RatFun] = {}

    def zero_ratfun(self) -> RatFun:
        return RatFun(MultiPoly.zero(self.ncolors), self.discriminant, 0)

    def base_point(self):
        return tuple(-v for v in self.d1)

    def jet(self, g: int, key: Iterable[Index]) -> RatFun:
        key = sort_key(key)
        cached = self._cache.get((g, key))
        if cached is not None:
            return cached
        acc = None
        budget = self.src.n_max - len(key)
        slack = tameness_bound(g, len(key)) - sum(key_levels(key))
        for extra, wpoly in _poly_extras(self.disp_polys, slack, budget, self.ncolors):
            lifted_key = key + extra
            for lift, factor in _lifts(
                self.b, lifted_key, tameness_bound(g, len(lifted_key)), len(extra)
            ):
                jet = self.src.jet(g, sort_key(lift))
                if jet.is_zero():
                    continue
                term = jet.compose_linear(self.b0).scale(factor)
                if not wpoly.is_const():
                    term = RatFun(term.num * wpoly, term.base, term.k)
                else:
                    term = term.scale(wpoly.const_value())
                acc = term if acc is None else acc + term
        if acc is None:
            acc = self.zero_ratfun()
        self._cache[(g, key)] = acc
        return acc


def substitute_R(
    src,
    s: MatSeries,
    out_g_max: int | None = None,
    out_n_max: int | None = None,
    out_q0_order: int | None = None,
) -> ClosedFormElement:
    """Materialized form of :class:`SubstitutedFamily` over the requested
    box: the quantized variable substitution (s-hat A)(q) = A(s^{-1} q) at
    the new dilaton vector s D with discriminant P o s_0^{-1}."""
    fam = SubstitutedFamily(src, s, g_max=out_g_max)
    g_max = fam.g_max
    n_max = src.n_max if out_n_max is None else out_n_max
    q0_order = src.q0_order if out_q0_order is None else out_q0_order
    out = ClosedFormElement(
        ncolors=fam.ncolors,
        d1=fam.d1,
        discriminant=fam.discriminant,
        g_max=g_max,
        n_max=n_max,
        q0_order=q0_order,
        dtail=dict(fam.dtail),
    )
    for g in range(0, g_max + 1):
        for key in _candidate_keys(fam.ncolors, g, n_max, q0_order):
            if 2 * g - 2 + len(key) <= 0 or any(l == 1 for l, _ in key):
                continue
            val = fam.jet(g, key)
            if not val.is_zero():
                out.set(g, key, val)
    out.genus1_dlog = tuple(fam.jet(1, ((1, i),)) for i in range(fam.ncolors))
    return out


def _poly_extras(disp_polys, slack: int, budget: int, nc: int):
    """Extra insertions for the substitution, weighted by polynomial slice
    values; yields (extra_key_tuple, weight_poly)."""
    options = []
    for d, polys in sorted(disp_polys.items()):
        for c in range(nc):
            if not polys[c].is_zero():
                options.append(((d, c), polys[c]))
    one = MultiPoly.const(nc, FieldElem.one())

    def rec(idx, slack_left, budget_left, current, weight):
        yield tuple(current), weight
        for k in range(idx, len(options)):
            (pair, poly) = options[k]
            d = pair[0]
            if slack_left < d - 1:
                continue
            if budget_left < 1:
                raise OverflowError(
                    "insertion budget exhausted while substitution "
                    "re-expansion still has tameness slack"
                )
            mult = current.count(pair) + 1
            current.append(pair)
            wnext = (weight * poly).scale(FieldElem.one() / FE(mult))
            yield from rec(k, slack_left - (d - 1), budget_left - 1, current, wnext)
            current.pop()

    yield from rec(0, slack, budget, [], one)


def _lifts(b: MatSeries, key: Tuple[Index, ...], level_budget: int, n_extra: int):
    """All lifts of the target key through the substitution tail.

    Each of the first ``len(key) - n_extra`` indices (m, j) becomes (l, i)
    with l >= m, weighted by (B_{l-m})_{ij}; the trailing ``n_extra`` indices
    are already source-side insertions and stay fixed.  The total lifted
    level is capped by ``level_budget`` (lifted jets beyond it vanish
    identically by tameness of the source family).
    """
    fixed = tuple(key[len(key) - n_extra:]) if n_extra else ()
    movable = key[: len(key) - n_extra]
    fixed_total = sum(lv for lv, _ in fixed)
    if fixed_total + sum(lv for lv, _ in movable) > level_budget:
        return

    def rec(pos, acc, total, factor):
        if pos == len(movable):
            yield tuple(acc) + fixed, factor
            return
        m, j = movable[pos]
        rest_min = sum(lv for lv, _ in movable[pos + 1:])
        l_cap = level_budget - total - rest_min - fixed_total
        for l in range(m, l_cap + 1):
            k = l - m
            if k > b.order:
                break  # unreachable under the entry guard in substitute_R
            bk = b.coeff(k)
            for i in range(b.dim):
                f = bk[i][j]
                if not f:
                    continue
                acc.append((l, i))
                yield from rec(pos + 1, acc, total + l, factor * f)
                acc.pop()

    yield from rec(0, [], 0, FieldElem.one())


def quantize_R(
    elem: ClosedFormElement,
    s: MatSeries,
    out_g_max: int | None = None,
    out_n_max: int | None = None,
    out_q0_order: int | None = None,
    prop_cutoff: int | None = None,
) -> ClosedFormElement:
    """Quantized operator of a unitary series on a closed form: Feynman
    transform with the Givental propagator of ``s`` followed by the variable
    substitution q -> s^{-1} q.  Output lives at dilaton vector s D with
    discriminant P o s_0^{-1}."""
    g_max = elem.g_max if out_g_max is None else out_g_max
    cutoff = prop_cutoff if prop_cutoff is not None else max(0, 3 * g_max - 2) + 1
    prop = givental_propagator(s, cutoff)
    fam = FeynmanFamily(elem, prop, g_max=g_max)
    return substitute_R(fam, s, out_g_max=g_max, out_n_max=out_n_max, out_q0_order=out_q0_order)


def pipeline_budgets(g_max: int, n_max: int) -> Dict[str, int]:
    """Insertion budgets closing the ancestor pipeline under truncation.

    Every extra insertion anywhere in the chain (shift re-expansion or
    substitution re-expansion) consumes at least one unit of the same
    tameness slack, so the query width grows additively by the slack once;
    Feynman vertices then add two flags per possible edge.
    """
    slack = max(0, 3 * g_max - 3 + n_max)
    n_query = n_max + slack      # widest jet queried on family objects
    n_src = n_query + 2 * max(0, 3 * g_max - 3 + n_query)  # vertex keys
    return {"n_query": n_query, "n_src": n_src, "slack": slack}


def abstract_ancestor(
    point: FrobeniusPoint,
    g_max: int,
    n_max: int,
    q0_order: int | None = None,
    z_order: int | None = None,
    reorder: Sequence[int] | None = None,
    signs: Sequence[int] | None = None,
) -> ClosedFormElement:
    """Abstract ancestor potential of a tame semisimple Frobenius point.

    Pipeline: (1) the product of point potentials in the normalized
    canonical frame; (2) the R-matrix from the semisimple recursion;
    (3) quantization by Psi R (the constant unitary part acts through the
    substitution); (4) re-centering at the flat-frame dilaton vector z*e.
    ``reorder``/``signs`` pick a different semisimple gauge; the output is
    independent of them.
    """
    from .fock import WKFamily

    nc = point.dim
    data = canonical_data(point, reorder=reorder, signs=signs)
    budgets = pipeline_budgets(g_max, n_max)
    n_src = budgets["n_src"]
    cutoff_for_order = max(0, 3 * g_max - 2) + 1
    if q0_order is None:
        q0_order = n_src
    if z_order is None:
        z_order = max(3 * g_max - 3 + n_src, 2 * cutoff_for_order + 1, 4)
    v = v_series_from_mu(point, data, z_order)
    r = solve_R(data.u, v, z_order)
    s_coeffs = [mat_mul(data.psi, r.coeff(k)) for k in range(z_order + 1)]
    s = MatSeries(s_coeffs)
    src = WKFamily(nc, g_max, n_src, q0_order=q0_order)
    cutoff = max(0, 3 * g_max - 2) + 1
    prop = givental_propagator(r, cutoff)
    fam = FeynmanFamily(src, prop, g_max=g_max)
    mid = SubstitutedFamily(fam, s, g_max=g_max)
    # shift to the flat dilaton vector z*e: xi = z e - S (z (1,...,1))
    e_flat = _unit_vector_field(point)
    xi: Dict[int, Tuple[FieldElem, ...]] = {}
    ones = tuple(FieldElem.one() for _ in range(nc))
    xi1 = tuple(a - b for a, b in zip(e_flat, mat_vec(s.coeff(0), ones)))
    if any(xi1):
        xi[1] = xi1
    for m in range(2, z_order + 2):
        vec = tuple(-x for x in mat_vec(s.coeff(m - 1), ones))
        if any(vec):
            xi[m] = vec
    out = translate(mid, xi, out_n_max=n_max)
    out.g_max = g_max
    if out.dtail:
        raise ArithmeticError("ancestor potential failed to land on a pure dilaton vector")
    return out


def _unit_vector_field(point: FrobeniusPoint) -> Tuple[FieldElem, ...]:
    """Coordinates of the unit of the Frobenius algebra in the flat basis."""
    nc = point.dim
    # solve e * phi_j = phi_j for all j
    rows = []
    rhs = []
    for j in range(nc):
        for k in range(nc):
            rows.append([point.structure[i][j][k] for i in range(nc)])
            rhs.append(FieldElem.one() if k == j else FieldElem.zero())
    # least-structure exact solve: use the first nc independent equations
    sol = _solve_overdetermined(rows, rhs)
    # verify
    for j in range(nc):
        if point.multiply(sol, point.basis(j)) != point.basis(j):
            raise ArithmeticError("unit vector verification failed")
    return tuple(sol)


def _solve_overdetermined(rows, rhs):
    n = len(rows[0])
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivots = []
    row = 0
    for col in range(n):
        piv = next((r for r in range(row, len(aug)) if aug[r][col]), None)
        if piv is None:
            continue
        aug[row], aug[piv] = aug[piv], aug[row]
        inv = aug[row][col].inverse()
        aug[row] = [x * inv for x in aug[row]]
        for r in range(len(aug)):
            if r != row and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[row])]
        pivots.append(col)
        row += 1
    if len(pivots) < n:
        raise ZeroDivisionError("degenerate unit system")
    sol = [FieldElem.zero()] * n
    for r, col in enumerate(pivots):
        sol[col] = aug[r][n]
    return sol


# --------------------------------------------------------------------------
# Oracles anchored to closed formulas
# --------------------------------------------------------------------------


def quantum_det_poly(point: FrobeniusPoint) -> MultiPoly:
    """det(-q1 *) as a polynomial in the flat coordinates of q1."""
    nc = point.dim
    grid = [[MultiPoly.zero(nc) for _ in range(nc)] for _ in range(nc)]
    for v in range(nc):
        mm = point.mult_matrix(point.basis(v))
        for i in range(nc):
            for j in range(nc):
                if mm[i][j]:
                    grid[i][j] = grid[i][j] + MultiPoly.linear(
                        nc, [(-mm[i][j]) if t == v else FieldElem.zero() for t in range(nc)]
                    )
    return _det_grid(grid)


def _det_grid(grid) -> MultiPoly:
    n = len(grid)
    if n == 1:
        return grid[0][0]
    nvars = grid[0][0].nvars
    out = MultiPoly.zero(nvars)
    sign = 1
    for j in range(n):
        minor = [[grid[i][k] for k in range(n) if k != j] for i in range(1, n)]
        term = grid[0][j] * _det_grid(minor)
        out = out + (term if sign > 0 else -term)
        sign = -sign
    return out


def genus1_superdet_jets(point: FrobeniusPoint) -> Tuple[RatFun, ...]:
    """d/dq1^i of -(1/24) log det(-q1 *), the closed genus-one formula for an
    even-only target, as rational functions over the normalized determinant."""
    nc = point.dim
    det = quantum_det_poly(point)
    e_flat = _unit_vector_field(point)
    norm = det.evaluate([-x for x in e_flat])
    if not norm:
        raise ZeroDivisionError("determinant vanishes at the unit base point")
    base = det.scale(FieldElem.one() / norm)
    out = []
    for i in range(nc):
        num = base.derivative(i).scale(FE(Fraction(-1, 24)))
        out.append(RatFun(num, base, 1))
    return tuple(out)


def yukawa_values(point: FrobeniusPoint):
    """g(phi_i * phi_j, phi_k): the genus-zero three-point jets at the unit
    base point; invariant under the transformation rule."""
    nc = point.dim
    out = {}
    for i in range(nc):
        for j in range(nc):
            prod = point.structure[i][j]
            for k in range(nc):
                out[(i, j, k)] = point.pair(prod, point.basis(k))
    return out


def genus2_hand_formula(table: CorrelatorTable, prop: Propagator) -> FieldElem:
    """The seven-term genus-two combination coded independently of the graph
    machinery: C2 + 1/2 C1_ab D^ab + 1/2 C1_a D^ab C1_b
    + 1/2 C1_a D^ab C0_bcd D^cd + 1/8 C0_abcd D^ab D^cd
    + 1/8 D^ab C0_abc D^cd C0_def D^ef ... + 1/12 C0 D D D C0."""
    idxs = sorted(
        {ix for (_, key) in table.entries for ix in key}
        | {a for (a, _) in prop.entries}
        | {b for (_, b) in prop.entries}
    )
    zero = FieldElem.zero()

    def c(g, *key):
        return table.get(g, key)

    def d(a, b):
        return prop.get(a, b)

    total = c(2)
    for a in idxs:
        for b in idxs:
            dab = d(a, b)
            if not dab:
                continue
            total = total + FE(Fraction(1, 2)) * c(1, a, b) * dab
            total = total + FE(Fraction(1, 2)) * c(1, a) * dab * c(1, b)
            for cc in idxs:
                for dd in idxs:
                    dcd = d(cc, dd)
                    if not dcd:
                        continue
                    total = total + FE(Fraction(1, 2)) * c(1, a) * dab * c(0, b, cc, dd) * dcd
                    total = total + FE(Fraction(1, 8)) * c(0, a, b, cc, dd) * dab * dcd
                    for e in idxs:
                        for f in idxs:
                            def_ = d(e, f)
                            if not def_:
                                continue
                            total = total + FE(Fraction(1, 8)) * dab * c(0, a, b, cc) * dcd * c(0, dd, e, f) * def_
                            total = total + FE(Fraction(1, 12)) * c(0, a, cc, e) * dab * dcd * def_ * c(0, b, dd, f)
    return total


def random_tame_table(
    rng,
    ncolors: int,
    g_max: int,
    n_max: int,
    q0_order: int,
    level_cap: int | None = None,
    density: float = 0.5,
) -> CorrelatorTable:
    """Random symmetric tame table for property suites (exact rationals)."""
    table = CorrelatorTable(
        ncolors=ncolors,
        d1=tuple(FieldElem.one() for _ in range(ncolors)),
        g_max=g_max,
        n_max=n_max,
        q0_order=q0_order,
    )
    for g in range(0, g_max + 1):
        for key in _candidate_keys(ncolors, g, n_max, q0_order):
            if 2 * g - 2 + len(key) <= 0:
                continue
            if level_cap is not None and any(l > level_cap for l, _ in key):
                continue
            if rng.random() < density:
                table.set(g, key, FE(Fraction(rng.randint(-6, 6), rng.randint(1, 3))))
    return table


def random_propagator(
    rng,
    ncolors: int,
    cutoff: int,
    support: int = 5,
) -> Propagator:
    """Random sparse symmetric propagator with the given level cutoff."""
    prop = Propagator(ncolors=ncolors, cutoff=cutoff)
    alphabet = [(l, c) for l in range(cutoff + 1) for c in range(ncolors)]
    for _ in range(support):
        a = rng.choice(alphabet)
        b = rng.choice(alphabet)
        prop.set(a, b, FE(Fraction(rng.randint(-4, 4), rng.randint(1, 3))))
    return prop
