"""Connected decorated stable graphs and their automorphism factors.

A stable graph has genus-labelled vertices, an edge multiset (loops and
parallel edges allowed) and labelled legs; every vertex satisfies
``2 g_v - 2 + n_v > 0`` where ``n_v`` counts incident flags, and the total
genus is ``sum g_v + 1 - chi``.  These graphs index the Feynman-rule
expansion of the transformation between Fock-space presentations, each
weighted by ``1 / |Aut|`` where automorphisms fix legs pointwise and include
loop flips and permutations of parallel edges.

Enumeration is brute force with pruning, deduplicated by a canonical form;
sizes at desk scale (g <= 3, small n) stay tiny.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple

Edge = Tuple[int, int]  # (a, b) with a <= b; a == b is a loop


@dataclass(frozen=True)
class StableGraph:
    """Connected stable graph with labelled legs.

    genera: genus of each vertex, indexed 0..V-1.
    edges:  sorted tuple of vertex pairs (a, b), a <= b.
    legs:   legs[i] is the vertex carrying leg label i (labels are 0-based).
    """

    genera: Tuple[int, ...]
    edges: Tuple[Edge, ...]
    legs: Tuple[int, ...]

    @property
    def num_vertices(self) -> int:
        return len(self.genera)

    def flag_counts(self) -> Tuple[int, ...]:
        n = [0] * self.num_vertices
        for a, b in self.edges:
            n[a] += 1
            n[b] += 1
        for v in self.legs:
            n[v] += 1
        return tuple(n)

    def vertex_legs(self) -> Tuple[Tuple[int, ...], ...]:
        out: List[List[int]] = [[] for _ in range(self.num_vertices)]
        for label, v in enumerate(self.legs):
            out[v].append(label)
        return tuple(tuple(sorted(ls)) for ls in out)

    def total_genus(self) -> int:
        chi = self.num_vertices - len(self.edges)
        return sum(self.genera) + 1 - chi

    def is_connected(self) -> bool:
        v = self.num_vertices
        parent = list(range(v))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in self.edges:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        return len({find(x) for x in range(v)}) == 1

    def is_stable(self) -> bool:
        return all(2 * g - 2 + n > 0 for g, n in zip(self.genera, self.flag_counts()))

    def to_json(self) -> Dict:
        return {
            "genera": list(self.genera),
            "edges": [list(e) for e in self.edges],
            "legs": list(self.legs),
            "aut_order": automorphism_order(self),
        }


def canonical_form(graph: StableGraph) -> Tuple:
    """Deterministic encoding, equal iff graphs are isomorphic as decorated
    leg-labelled graphs (automorphisms fix legs pointwise)."""
    v = graph.num_vertices
    vlegs = graph.vertex_legs()
    inv = [(graph.genera[i], vlegs[i]) for i in range(v)]
    # vertices may only map to vertices with identical (genus, leg set)
    blocks: Dict[Tuple, List[int]] = {}
    for i in range(v):
        blocks.setdefault(inv[i], []).append(i)
    block_items = sorted(blocks.items())
    best = None
    for perm in _block_permutations(block_items):
        # perm maps old vertex index -> new index
        enc_edges = tuple(
            sorted(tuple(sorted((perm[a], perm[b]))) for a, b in graph.edges)
        )
        order = sorted(range(v), key=lambda i: perm[i])
        enc = (
            tuple(inv[i] for i in order),
            enc_edges,
            tuple(perm[x] for x in graph.legs),
        )
        if best is None or enc < best:
            best = enc
    return best


def _block_permutations(block_items) -> Iterable[Dict[int, int]]:
    """All vertex relabelings that respect invariant blocks (new indices are
    contiguous per sorted block)."""
    starts = []
    pos = 0
    for key, members in block_items:
        starts.append((members, pos))
        pos += len(members)
    pools = []
    for members, start in starts:
        pools.append(
            [
                {old: start + i for i, old in enumerate(p)}
                for p in itertools.permutations(members)
            ]
        )
    for combo in itertools.product(*pools):
        perm: Dict[int, int] = {}
        for d in combo:
            perm.update(d)
        yield perm


def automorphism_order(graph: StableGraph) -> int:
    """Order of the decoration-preserving, leg-fixing automorphism group.

    For each admissible vertex permutation the flag-level extensions
    contribute ``prod m_ab!`` over parallel classes and ``prod m_aa! 2^m_aa``
    over loop classes (loop flips).
    """
    v = graph.num_vertices
    mult: Dict[Edge, int] = {}
    for e in graph.edges:
        mult[e] = mult.get(e, 0) + 1
    vlegs = graph.vertex_legs()
    # legs are fixed pointwise: a vertex with legs can only map to itself
    blocks: Dict[Tuple, List[int]] = {}
    for i in range(v):
        key = ("fixed", i) if vlegs[i] else ("free", graph.genera[i])
        blocks.setdefault(key, []).append(i)

    def edge_factor() -> int:
        f = 1
        for (a, b), m in mult.items():
            if a == b:
                f *= _factorial(m) * 2**m
            else:
                f *= _factorial(m)
        return f

    base = edge_factor()
    total = 0
    pools = [list(itertools.permutations(members)) for _, members in sorted(blocks.items())]
    keys = [members for _, members in sorted(blocks.items())]
    for combo in itertools.product(*pools):
        perm = {}
        for members, image in zip(keys, combo):
            for old, new in zip(members, image):
                perm[old] = new
        ok = True
        for (a, b), m in mult.items():
            ia, ib = perm[a], perm[b]
            key = (ia, ib) if ia <= ib else (ib, ia)
            if mult.get(key, 0) != m:
                ok = False
                break
        if ok:
            total += base
    return total


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


@lru_cache(maxsize=None)
def enumerate_stable_graphs(g: int, n: int) -> Tuple[Tuple[StableGraph, int], ...]:
    """All isomorphism classes of connected stable graphs of genus ``g`` with
    ``n`` labelled legs, paired with their automorphism orders.

    Requires ``2g - 2 + n > 0``.  Every returned graph satisfies the per-vertex
    stability bound and ``|E| <= 3g - 3 + n``.
    """
    if 2 * g - 2 + n <= 0:
        raise ValueError(f"unstable pair (g, n) = ({g}, {n})")
    max_edges = 3 * g - 3 + n
    max_vertices = max(1, 2 * g - 2 + n)
    seen: Dict[Tuple, StableGraph] = {}
    for v in range(1, max_vertices + 1):
        pairs = [(a, b) for a in range(v) for b in range(a, v)]
        for e_count in range(max(0, v - 1), max_edges + 1):
            gsum = g - 1 - e_count + v
            if gsum < 0:
                continue
            for edges in itertools.combinations_with_replacement(pairs, e_count):
                skeleton = StableGraph(genera=(0,) * v, edges=edges, legs=())
                if not skeleton.is_connected():
                    continue
                deg = [0] * v
                for a, b in edges:
                    deg[a] += 1
                    deg[b] += 1
                for genera in _genus_assignments(v, gsum):
                    # minimum legs needed at each vertex for stability
                    need = [
                        max(0, 3 - 2 * gv - d) if gv == 0 else max(0, 1 - d) if gv == 1 else 0
                        for gv, d in zip(genera, deg)
                    ]
                    if sum(need) > n:
                        continue
                    for counts in _leg_count_vectors(v, n, need):
                        for legs in _distinct_label_assignments(counts):
                            cand = StableGraph(genera=genera, edges=edges, legs=legs)
                            if not cand.is_stable():
                                continue
                            key = canonical_form(cand)
                            if key not in seen:
                                seen[key] = cand
    out = []
    for key in sorted(seen):
        graph = seen[key]
        assert graph.total_genus() == g
        assert len(graph.edges) <= max_edges
        out.append((graph, automorphism_order(graph)))
    return tuple(out)


def _genus_assignments(v: int, total: int) -> Iterable[Tuple[int, ...]]:
    if v == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _genus_assignments(v - 1, total - head):
            yield (head,) + rest


def _leg_count_vectors(v: int, n: int, need: Sequence[int]) -> Iterable[Tuple[int, ...]]:
    if v == 1:
        if n >= need[0]:
            yield (n,)
        return
    for head in range(need[0], n - sum(need[1:]) + 1):
        for rest in _leg_count_vectors(v - 1, n - head, need[1:]):
            yield (head,) + rest


def _distinct_label_assignments(counts: Sequence[int]) -> Iterable[Tuple[int, ...]]:
    slots: List[int] = []
    for vtx, c in enumerate(counts):
        slots.extend([vtx] * c)
    seen = set()
    for p in itertools.permutations(slots):
        if p not in seen:
            seen.add(p)
            yield p


def graphs_to_json(g: int, n: int) -> str:
    data = [graph.to_json() for graph, _ in enumerate_stable_graphs(g, n)]
    return json.dumps({"genus": g, "legs": n, "count": len(data), "graphs": data}, indent=2)
