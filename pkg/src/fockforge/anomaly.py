"""Formal tensor identities for curved polarizations, verified as exact
canonical zeros.

Atoms are symbolic: the symmetric correlator jets C^(g), the symmetric
propagator Delta, the background torsion Lam with symmetric upper pair (two
sides, one per polarization; derivatives of Lam stay opaque).  Expressions
are sums of index-contracted products with rational prefactors; dummy
indices are positive integers, free indices negative.

The verifier expands curved correlators by the same stable-graph Feynman
rule as the numeric engine, differentiates with the rewrite axioms

    nabla C^(g)_I        -> C^(g)_{I + mu}                     (jetness)
    nabla_mu Delta^{ab}  -> Lam1_mu^{ab} - Lam2_mu^{ab}
                            + Delta^{as} C^(0)_{s mu t} Delta^{tb}
    nabla Lam            -> opaque derivative atom

and checks the anomaly equation, the genus-one curvature condition, and the
holomorphic-anomaly rearrangement, emitting the residual as a replayable
certificate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .graphs import enumerate_stable_graphs

# Atom encodings (kind tags sort the canonical ordering):
#   ("C", g, indices)                 fully symmetric
#   ("Delta", (a, b))                 symmetric pair
#   ("Lam", side, lowers, uppers)     uppers symmetric; lowers ordered,
#                                     len(lowers) > 1 means nabla-derivatives
#   ("Nabla", idx, atom)              formal unexpanded derivative
Atom = Tuple
Term = Tuple[Fraction, Tuple[Atom, ...]]


class TensorExpr:
    """Sum of index-contracted atom products with rational prefactors."""

    def __init__(self, terms: Iterable[Term] = ()):
        self.terms: List[Term] = [
            (Fraction(c), tuple(atoms)) for c, atoms in terms if c
        ]

    @staticmethod
    def zero() -> "TensorExpr":
        return TensorExpr()

    @staticmethod
    def single(coeff, atoms) -> "TensorExpr":
        return TensorExpr([(Fraction(coeff), tuple(atoms))])

    def __add__(self, other: "TensorExpr") -> "TensorExpr":
        return TensorExpr(self.terms + other.terms)

    def __sub__(self, other: "TensorExpr") -> "TensorExpr":
        return self + other.scale(-1)

    def scale(self, c) -> "TensorExpr":
        c = Fraction(c)
        return TensorExpr([(c * k, atoms) for k, atoms in self.terms])

    def __mul__(self, other: "TensorExpr") -> "TensorExpr":
        out = []
        for c1, a1 in self.terms:
            for c2, a2 in other.terms:
                out.append((c1 * c2, a1 + a2))
        return TensorExpr(out)

    def is_zero_canonical(self) -> bool:
        return not canonicalize(self).terms

    def pretty(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for c, atoms in self.terms:
            body = " ".join(_atom_str(a) for a in atoms) or "1"
            bits.append(f"({c}) {body}")
        return "\n + ".join(bits)


def _atom_str(atom: Atom) -> str:
    kind = atom[0]
    if kind == "C":
        return f"C{atom[1]}[{','.join(map(_idx_str, atom[2]))}]"
    if kind == "Delta":
        return f"D[{_idx_str(atom[1][0])},{_idx_str(atom[1][1])}]"
    if kind == "Lam":
        lows = ",".join(map(_idx_str, atom[2]))
        ups = ",".join(map(_idx_str, atom[3]))
        return f"L{atom[1]}[{lows};{ups}]"
    if kind == "Nabla":
        return f"(nabla_{_idx_str(atom[1])} {_atom_str(atom[2])})"
    return repr(atom)


def _idx_str(i: int) -> str:
    return f"m{-i}" if i < 0 else f"d{i}"


def _term_indices(atoms: Sequence[Atom]) -> List[int]:
    out: List[int] = []
    for atom in atoms:
        kind = atom[0]
        if kind == "C":
            out.extend(atom[2])
        elif kind == "Delta":
            out.extend(atom[1])
        elif kind == "Lam":
            out.extend(atom[2])
            out.extend(atom[3])
        elif kind == "Nabla":
            out.append(atom[1])
            out.extend(_term_indices([atom[2]]))
    return out


def check_index_balance(atoms: Sequence[Atom]) -> None:
    counts: Dict[int, int] = {}
    for i in _term_indices(atoms):
        counts[i] = counts.get(i, 0) + 1
    for i, c in counts.items():
        if i >= 0 and c != 2:
            raise ValueError(f"dummy index {i} appears {c} times")
        if i < 0 and c != 1:
            raise ValueError(f"free index {_idx_str(i)} appears {c} times")


# ---------------------------------------------------------------- canonical form


def _atom_shape(atom: Atom) -> Tuple:
    """Ordering-invariant skeleton of an atom: kind, parameters, arity, and
    the pattern of free indices (free labels are not renamed)."""
    kind = atom[0]
    if kind == "C":
        frees = tuple(sorted(i for i in atom[2] if i < 0))
        return ("C", atom[1], len(atom[2]), frees)
    if kind == "Delta":
        frees = tuple(sorted(i for i in atom[1] if i < 0))
        return ("Delta", 0, 2, frees)
    if kind == "Lam":
        frees_l = tuple(i for i in atom[2] if i < 0)
        frees_u = tuple(sorted(i for i in atom[3] if i < 0))
        return ("Lam", atom[1], len(atom[2]), frees_l, frees_u)
    raise ValueError(f"cannot canonicalize formal atom {atom!r}")


def _slot_groups(atom: Atom) -> Tuple[Tuple[Tuple[int, ...], bool], ...]:
    """Index groups of an atom with a symmetric? flag (order inside a
    symmetric group is free; ordered groups are fixed)."""
    kind = atom[0]
    if kind == "C":
        return ((tuple(atom[2]), True),)
    if kind == "Delta":
        return ((tuple(atom[1]), True),)
    if kind == "Lam":
        return ((tuple(atom[2]), False), (tuple(atom[3]), True))
    raise ValueError(f"no slots for atom {atom!r}")


def _rebuild(atom: Atom, groups: Sequence[Tuple[int, ...]]) -> Atom:
    kind = atom[0]
    if kind == "C":
        return ("C", atom[1], tuple(groups[0]))
    if kind == "Delta":
        return ("Delta", tuple(groups[0]))
    if kind == "Lam":
        return ("Lam", atom[1], tuple(groups[0]), tuple(groups[1]))
    raise ValueError


def _canonical_term(atoms: Tuple[Atom, ...]) -> Tuple[Tuple[Atom, ...], Fraction]:
    """Canonical atom tuple under dummy renaming and declared symmetries.

    Brute-force minimum over block-respecting atom orderings and symmetric
    slot arrangements; desk-scale terms keep this tiny.
    """
    check_index_balance(atoms)
    shapes = [_atom_shape(a) for a in atoms]
    order = sorted(range(len(atoms)), key=lambda i: shapes[i])
    blocks: List[List[int]] = []
    for i in order:
        if blocks and shapes[blocks[-1][-1]] == shapes[i]:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    best = None
    for perm_combo in itertools.product(
        *[itertools.permutations(b) for b in blocks]
    ):
        ordering = [i for block in perm_combo for i in block]
        for arranged in _slot_arrangements([atoms[i] for i in ordering]):
            enc = _encode(arranged)
            if best is None or enc < best:
                best = enc
    return best, Fraction(1)


def _slot_arrangements(atoms: List[Atom]) -> Iterable[Tuple[Atom, ...]]:
    pools = []
    for atom in atoms:
        choices = []
        groups = _slot_groups(atom)
        group_perms = []
        for idxs, symmetric in groups:
            if symmetric and len(idxs) > 1:
                group_perms.append(sorted(set(itertools.permutations(idxs))))
            else:
                group_perms.append([tuple(idxs)])
        for combo in itertools.product(*group_perms):
            choices.append(_rebuild(atom, combo))
        pools.append(choices)
    for combo in itertools.product(*pools):
        yield tuple(combo)


def _encode(atoms: Tuple[Atom, ...]) -> Tuple:
    """Relabel dummies by first appearance and emit a comparable encoding."""
    mapping: Dict[int, int] = {}

    def rel(i: int) -> int:
        if i < 0:
            return i
        if i not in mapping:
            mapping[i] = len(mapping) + 1
        return mapping[i]

    out = []
    for atom in atoms:
        kind = atom[0]
        if kind == "C":
            out.append(("C", atom[1], tuple(rel(i) for i in atom[2])))
        elif kind == "Delta":
            out.append(("Delta", tuple(rel(i) for i in atom[1])))
        elif kind == "Lam":
            out.append(
                (
                    "Lam",
                    atom[1],
                    tuple(rel(i) for i in atom[2]),
                    tuple(rel(i) for i in atom[3]),
                )
            )
    return tuple(out)


def canonicalize(expr: TensorExpr) -> TensorExpr:
    """Combine terms modulo dummy renaming and atom symmetries; exact zero
    detection."""
    acc: Dict[Tuple, Fraction] = {}
    for coeff, atoms in expr.terms:
        enc, sign = _canonical_term(atoms)
        acc[enc] = acc.get(enc, Fraction(0)) + coeff * sign
    out = []
    for enc, coeff in sorted(acc.items()):
        if coeff:
            out.append((coeff, tuple(enc)))
    return TensorExpr(out)


# ---------------------------------------------------------------- rewrites


def nabla_rewrite(expr: TensorExpr, parallel_side: int | None = 1) -> TensorExpr:
    """Push formal Nabla nodes onto atoms.

    jetness on C; the curved-propagator rule on Delta (with the torsion of
    ``parallel_side`` dropped when that polarization is parallel; pass None
    to keep both); opaque derivative on Lam; zero on empty products.
    """
    out = TensorExpr()
    for coeff, atoms in expr.terms:
        pending = [(Fraction(coeff), tuple(atoms))]
        while pending:
            c, ats = pending.pop()
            idx = next((k for k, a in enumerate(ats) if a[0] == "Nabla"), None)
            if idx is None:
                out = out + TensorExpr.single(c, ats)
                continue
            head, wrapped = ats[idx][1], ats[idx][2]
            rest = ats[:idx] + ats[idx + 1:]
            kind = wrapped[0]
            if kind == "C":
                new_atom = ("C", wrapped[1], tuple(sorted(wrapped[2] + (head,))))
                pending.append((c, rest + (new_atom,)))
            elif kind == "Delta":
                a, b = wrapped[1]
                s, t = _fresh(2)
                if parallel_side != 1:
                    pending.append((c, rest + (("Lam", 1, (head,), (a, b)),)))
                if parallel_side != 2:
                    pending.append((-c, rest + (("Lam", 2, (head,), (a, b)),)))
                pending.append(
                    (
                        c,
                        rest
                        + (
                            ("Delta", (a, s)),
                            ("C", 0, tuple(sorted((s, head, t)))),
                            ("Delta", (t, b)),
                        ),
                    )
                )
            elif kind == "Lam":
                new_atom = ("Lam", wrapped[1], (head,) + wrapped[2], wrapped[3])
                pending.append((c, rest + (new_atom,)))
            else:
                raise ValueError(f"unknown atom under nabla: {wrapped!r}")
    return out


_COUNTER = itertools.count(1000)


def _fresh(k: int) -> Tuple[int, ...]:
    return tuple(next(_COUNTER) for _ in range(k))


def nabla_term(coeff: Fraction, atoms: Tuple[Atom, ...], idx: int) -> TensorExpr:
    """Leibniz derivative of a product: one Nabla-wrapped atom per summand."""
    if not atoms:
        return TensorExpr.zero()  # derivative of a constant
    out = []
    for k in range(len(atoms)):
        out.append(
            (coeff, atoms[:k] + (("Nabla", idx, atoms[k]),) + atoms[k + 1:])
        )
    return TensorExpr(out)


def nabla_p(expr: TensorExpr, idx: int, parallel_side: int | None = 1) -> TensorExpr:
    """Flat covariant derivative of a sum of products, fully rewritten."""
    out = TensorExpr()
    for coeff, atoms in expr.terms:
        out = out + nabla_term(coeff, atoms, idx)
    return nabla_rewrite(out, parallel_side)


def leg_correction(expr: TensorExpr, legs: Sequence[int], idx: int) -> TensorExpr:
    """(nabla^Q - nabla^P) on a tensor with the given free legs:
    each leg mu picks up  Delta^{s r} C^(0)_{r mu idx} at a fresh dummy."""
    out = TensorExpr()
    for leg in legs:
        for coeff, atoms in expr.terms:
            s, r = _fresh(2)
            replaced = tuple(_replace_index(a, leg, s) for a in atoms)
            extra = (
                ("Delta", (s, r)),
                ("C", 0, tuple(sorted((r, leg, idx)))),
            )
            out = out + TensorExpr.single(coeff, replaced + extra)
    return out


def _replace_index(atom: Atom, old: int, new: int) -> Atom:
    kind = atom[0]
    if kind == "C":
        if old in atom[2]:
            idxs = list(atom[2])
            idxs[idxs.index(old)] = new
            return ("C", atom[1], tuple(sorted(idxs)))
        return atom
    if kind == "Delta":
        if old in atom[1]:
            pair = list(atom[1])
            pair[pair.index(old)] = new
            return ("Delta", tuple(pair))
        return atom
    if kind == "Lam":
        lows, ups = list(atom[2]), list(atom[3])
        if old in lows:
            lows[lows.index(old)] = new
        elif old in ups:
            ups[ups.index(old)] = new
        return ("Lam", atom[1], tuple(lows), tuple(ups))
    raise ValueError


def nabla_q(expr: TensorExpr, legs: Sequence[int], idx: int) -> TensorExpr:
    """Curved covariant derivative: flat part plus leg corrections."""
    return nabla_p(expr, idx) + leg_correction(expr, legs, idx)


# ---------------------------------------------------------------- Feynman rule


def expand_correlator(g: int, legs: Sequence[int]) -> TensorExpr:
    """Curved correlator C^(g)_{legs} as the stable-graph contraction of
    flat jets with symbolic propagators."""
    n = len(legs)
    if 2 * g - 2 + n <= 0:
        return TensorExpr.zero()
    out = []
    for graph, aut in enumerate_stable_graphs(g, n):
        atoms: List[Atom] = []
        vertex_idxs: List[List[int]] = [[] for _ in range(graph.num_vertices)]
        for label, v in enumerate(graph.legs):
            vertex_idxs[v].append(legs[label])
        for a, b in graph.edges:
            x, y = _fresh(2)
            atoms.append(("Delta", (x, y)))
            vertex_idxs[a].append(x)
            vertex_idxs[b].append(y)
        for v in range(graph.num_vertices):
            atoms.append(("C", graph.genera[v], tuple(sorted(vertex_idxs[v]))))
        out.append((Fraction(1, aut), tuple(atoms)))
    return TensorExpr(out)


def drop_lambda(expr: TensorExpr) -> TensorExpr:
    """Substitute all torsion atoms by zero."""
    return TensorExpr(
        [(c, ats) for c, ats in expr.terms if not any(a[0] == "Lam" for a in ats)]
    )


# ---------------------------------------------------------------- verifications


@dataclass
class Certificate:
    name: str
    ok: bool
    lhs_terms: int
    rhs_terms: int
    residual: str

    def text(self) -> str:
        status = "ZERO" if self.ok else "NONZERO"
        return (
            f"[{self.name}] residual {status}\n"
            f"  lhs terms: {self.lhs_terms}, rhs terms: {self.rhs_terms}\n"
            f"  residual: {self.residual}\n"
        )


def anomaly_residual(g: int, n: int, coeff: Fraction = Fraction(1, 2)) -> TensorExpr:
    """LHS - RHS of the anomaly equation at (g, n); ``coeff`` scales the
    torsion terms (1/2 is the theorem; anything else is a mutation)."""
    if n < 1 or 2 * g - 2 + n <= 0:
        raise ValueError("need a stable (g, n) with at least one leg")
    if 2 * g - 2 + (n - 1) <= 0:
        raise ValueError(
            "the differentiated correlator must be stable: 2g - 2 + n > 1"
        )
    legs = tuple(-(i + 1) for i in range(n))
    mu1, rest = legs[0], legs[1:]
    lhs = expand_correlator(g, legs)
    rhs = nabla_q(expand_correlator(g, rest), rest, mu1)
    alpha, beta = _fresh(2)
    # separating splits sum over ordered (k, S1), torsion in the middle
    for k in range(0, g + 1):
        for bits in itertools.product((0, 1), repeat=len(rest)):
            s1 = tuple(x for x, b in zip(rest, bits) if b == 0)
            s2 = tuple(x for x, b in zip(rest, bits) if b == 1)
            if 2 * k - 2 + len(s1) + 1 <= 0 or 2 * (g - k) - 2 + len(s2) + 1 <= 0:
                continue
            a, b = _fresh(2)
            left = expand_correlator(k, s1 + (a,))
            right = expand_correlator(g - k, s2 + (b,))
            lam = TensorExpr.single(1, (("Lam", 2, (mu1,), tuple(sorted((a, b)))),))
            rhs = rhs + (left * lam * right).scale(coeff)
    if g >= 1 and 2 * (g - 1) - 2 + (n - 1) + 2 > 0:
        a, b = _fresh(2)
        nonsep = expand_correlator(g - 1, rest + (a, b))
        lam = TensorExpr.single(1, (("Lam", 2, (mu1,), tuple(sorted((a, b)))),))
        rhs = rhs + (nonsep * lam).scale(coeff)
    return lhs - rhs


def verify_anomaly(g: int, n: int, coeff: Fraction = Fraction(1, 2)) -> Certificate:
    """Certify the anomaly equation at (g, n) as a canonical zero."""
    res = anomaly_residual(g, n, coeff)
    canon = canonicalize(res)
    return Certificate(
        name=f"anomaly (g={g}, n={n}, coeff={coeff})",
        ok=not canon.terms,
        lhs_terms=len(expand_correlator(g, tuple(-(i + 1) for i in range(n))).terms),
        rhs_terms=len(res.terms),
        residual=canon.pretty(),
    )


def curvature_residual(coeff: Fraction = Fraction(1, 2)) -> TensorExpr:
    """d(C^(1)_{Q;mu} dx^mu) minus the curvature two-form, evaluated on the
    antisymmetric pair of free indices."""
    mu, nu = -1, -2
    one_form_mu = expand_correlator(1, (mu,))
    one_form_nu = expand_correlator(1, (nu,))
    lhs = nabla_p(one_form_mu, nu) - nabla_p(one_form_nu, mu)
    a, b = _fresh(2)
    theta = TensorExpr.single(
        coeff, (("C", 0, tuple(sorted((nu, a, b)))), ("Lam", 2, (mu,), tuple(sorted((a, b)))))
    )
    c, d = _fresh(2)
    theta = theta - TensorExpr.single(
        coeff, (("C", 0, tuple(sorted((mu, c, d)))), ("Lam", 2, (nu,), tuple(sorted((c, d)))))
    )
    return lhs - theta


def verify_curvature_condition(coeff: Fraction = Fraction(1, 2)) -> Certificate:
    res = canonicalize(curvature_residual(coeff))
    return Certificate(
        name=f"curvature condition (coeff={coeff})",
        ok=not res.terms,
        lhs_terms=2,
        rhs_terms=2,
        residual=res.pretty(),
    )


def dbar_of_expansion(expr: TensorExpr, idx: int) -> TensorExpr:
    """Anti-holomorphic derivative of a graph expansion: vertices are
    holomorphic, each propagator differentiates to minus the torsion."""
    out = TensorExpr()
    for coeff, atoms in expr.terms:
        for k, atom in enumerate(atoms):
            if atom[0] != "Delta":
                continue
            a, b = atom[1]
            lam = ("Lam", 2, (idx,), tuple(sorted((a, b))))
            out = out + TensorExpr.single(
                -coeff, atoms[:k] + (lam,) + atoms[k + 1:]
            )
    return out


def hae_residual(g: int, n: int, coeff: Fraction = Fraction(1, 2)) -> TensorExpr:
    """The holomorphic-anomaly arrangement: 0 = dbar C + 1/2 sum C Lam C
    + 1/2 C Lam, with every curved correlator expanded by graphs."""
    legs = tuple(-(i + 1) for i in range(n))
    w = -(n + 1)  # anti-holomorphic index
    res = dbar_of_expansion(expand_correlator(g, legs), w)
    for k in range(0, g + 1):
        for bits in itertools.product((0, 1), repeat=n):
            s1 = tuple(x for x, b in zip(legs, bits) if b == 0)
            s2 = tuple(x for x, b in zip(legs, bits) if b == 1)
            if 2 * k - 2 + len(s1) + 1 <= 0 or 2 * (g - k) - 2 + len(s2) + 1 <= 0:
                continue
            a, b = _fresh(2)
            lam = TensorExpr.single(1, (("Lam", 2, (w,), tuple(sorted((a, b)))),))
            res = res + (
                expand_correlator(k, s1 + (a,)) * lam * expand_correlator(g - k, s2 + (b,))
            ).scale(coeff)
    if g >= 1 and 2 * (g - 1) - 2 + n + 2 > 0:
        a, b = _fresh(2)
        lam = TensorExpr.single(1, (("Lam", 2, (w,), tuple(sorted((a, b)))),))
        res = res + (expand_correlator(g - 1, legs + (a, b)) * lam).scale(coeff)
    return res


def verify_holomorphic_anomaly(g: int, n: int, coeff: Fraction = Fraction(1, 2)) -> Certificate:
    res = canonicalize(hae_residual(g, n, coeff))
    return Certificate(
        name=f"holomorphic anomaly (g={g}, n={n}, coeff={coeff})",
        ok=not res.terms,
        lhs_terms=len(expand_correlator(g, tuple(-(i + 1) for i in range(n))).terms),
        rhs_terms=0,
        residual=res.pretty(),
    )
