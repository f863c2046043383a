"""Stable graphs: validation, canonical forms, automorphism counts and enumeration.

A graph is a set of half-edges with an incidence map to vertices and an
involution; fixed points of the involution are tails.  Vertices carry genus
labels and tails may carry integer labels (harmonic-form labels in the
partition-function setting).
"""

from __future__ import annotations

import itertools
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence


class GraphError(ValueError):
    pass


AUT_VERTEX_BOUND = 12
ENUM_VERTEX_BOUND = 8


@dataclass(frozen=True)
class StableGraph:
    genera: tuple
    incidence: tuple      # half-edge -> vertex
    involution: tuple     # half-edge -> half-edge, an involution
    labels: tuple = ()    # half-edge -> tail label (None if unlabeled / not a tail)

    def __post_init__(self):
        nh = len(self.incidence)
        if len(self.involution) != nh:
            raise GraphError("incidence and involution disagree on the half-edge count")
        for h, s in enumerate(self.involution):
            if not 0 <= s < nh or self.involution[s] != h:
                raise GraphError(f"involution is not an involution at half-edge {h}")
        for h, v in enumerate(self.incidence):
            if not 0 <= v < len(self.genera):
                raise GraphError(f"half-edge {h} attached to missing vertex {v}")
        if any(g < 0 for g in self.genera):
            raise GraphError("vertex genus labels must be nonnegative")
        if not self.labels:
            object.__setattr__(self, "labels", (None,) * nh)
        elif len(self.labels) != nh:
            raise GraphError("labels must have one entry per half-edge")
        for h, lab in enumerate(self.labels):
            if lab is not None and self.involution[h] != h:
                raise GraphError(f"half-edge {h} is internal but carries a tail label")

    # -- construction -------------------------------------------------------
    @classmethod
    def from_edges(cls, num_vertices: int, edges: Iterable, tails: Iterable = (),
                   genera: Sequence | None = None) -> "StableGraph":
        """Edges are vertex pairs; tails are vertices or (vertex, label) pairs."""
        inc, inv, labs = [], [], []
        for a, b in edges:
            h = len(inc)
            inc += [a, b]
            inv += [h + 1, h]
            labs += [None, None]
        for t in tails:
            v, lab = (t if isinstance(t, tuple) else (t, None))
            h = len(inc)
            inc.append(v)
            inv.append(h)
            labs.append(lab)
        genera = tuple(genera) if genera is not None else (0,) * num_vertices
        if len(genera) != num_vertices:
            raise GraphError("one genus label per vertex required")
        return cls(genera, tuple(inc), tuple(inv), tuple(labs))

    # -- basic data ---------------------------------------------------------
    @property
    def num_vertices(self) -> int:
        return len(self.genera)

    @property
    def num_half_edges(self) -> int:
        return len(self.incidence)

    def tails(self) -> list:
        return [h for h, s in enumerate(self.involution) if s == h]

    def edges(self) -> list:
        return [(h, s) for h, s in enumerate(self.involution) if h < s]

    def edge_vertices(self) -> list:
        return [(self.incidence[h], self.incidence[s]) for h, s in self.edges()]

    def valency(self, v: int) -> int:
        return sum(1 for x in self.incidence if x == v)

    def valencies(self) -> list:
        c = Counter(self.incidence)
        return [c.get(v, 0) for v in range(self.num_vertices)]

    def half_edges_at(self, v: int) -> list:
        return [h for h, x in enumerate(self.incidence) if x == v]

    def tail_labels_at(self, v: int) -> list:
        return [self.labels[h] for h in self.tails() if self.incidence[h] == v]

    def multiplicity_matrix(self) -> list:
        """M[u][v] = number of edges between u and v (loops counted once on the diagonal)."""
        V = self.num_vertices
        M = [[0] * V for _ in range(V)]
        for a, b in self.edge_vertices():
            if a == b:
                M[a][a] += 1
            else:
                M[a][b] += 1
                M[b][a] += 1
        return M

    def components(self) -> list:
        parent = list(range(self.num_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x
        for a, b in self.edge_vertices():
            parent[find(a)] = find(b)
        groups: dict = {}
        for v in range(self.num_vertices):
            groups.setdefault(find(v), []).append(v)
        return sorted(groups.values())

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def induced(self, vertices: Sequence) -> "StableGraph":
        """Subgraph on ``vertices``; edges leaving the set become unlabeled tails."""
        pos = {v: i for i, v in enumerate(vertices)}
        edges, tails = [], []
        for h, s in self.edges():
            a, b = self.incidence[h], self.incidence[s]
            if a in pos and b in pos:
                edges.append((pos[a], pos[b]))
            elif a in pos:
                tails.append((pos[a], None))
            elif b in pos:
                tails.append((pos[b], None))
        for h in self.tails():
            v = self.incidence[h]
            if v in pos:
                tails.append((pos[v], self.labels[h]))
        return StableGraph.from_edges(len(vertices), edges, tails,
                                      [self.genera[v] for v in vertices])

    def relabeled(self, vperm: Sequence, hperm: Sequence | None = None) -> "StableGraph":
        """Image under vertex map v -> vperm[v] and half-edge map h -> hperm[h]."""
        nh = self.num_half_edges
        hperm = list(hperm) if hperm is not None else list(range(nh))
        inc = [0] * nh
        inv = [0] * nh
        labs = [None] * nh
        for h in range(nh):
            inc[hperm[h]] = vperm[self.incidence[h]]
            inv[hperm[h]] = hperm[self.involution[h]]
            labs[hperm[h]] = self.labels[h]
        gen = [0] * self.num_vertices
        for v, g in enumerate(self.genera):
            gen[vperm[v]] = g
        return StableGraph(tuple(gen), tuple(inc), tuple(inv), tuple(labs))

    # -- text exchange ------------------------------------------------------
    def to_text(self, sep: str = " / ") -> str:
        parts = [f"V {self.num_vertices}"]
        if any(self.genera):
            parts.append("G: " + " ".join(map(str, self.genera)))
        tl = self.tails()
        parts.append(f"T {len(tl)}")
        if any(self.labels[h] is not None for h in tl) or not self._tails_fill_trivalence():
            parts.append("T: " + " ".join(
                f"{self.incidence[h]}" + ("" if self.labels[h] is None else f":{self.labels[h]}")
                for h in tl))
        parts.append("E:" + "".join(f" ({a},{b})" for a, b in self.edge_vertices()))
        return sep.join(parts)

    def _tails_fill_trivalence(self) -> bool:
        deg = Counter(v for pair in self.edge_vertices() for v in pair)
        want = Counter(self.incidence[h] for h in self.tails())
        return all(3 - deg.get(v, 0) == want.get(v, 0) for v in range(self.num_vertices))

    @classmethod
    def from_text(cls, text: str) -> "StableGraph":
        lines = [s.strip() for chunk in text.splitlines() for s in chunk.split("/")]
        lines = [s for s in lines if s and not s.startswith("#")]
        nv = None
        genera = None
        ntails = None
        tail_list = None
        edges = []
        for line in lines:
            if m := re.fullmatch(r"V\s+(\d+)", line):
                nv = int(m.group(1))
            elif m := re.fullmatch(r"T\s+(\d+)", line):
                ntails = int(m.group(1))
            elif line.startswith("G:"):
                genera = [int(x) for x in line[2:].split()]
            elif line.startswith("T:"):
                tail_list = []
                for tok in line[2:].split():
                    v, _, lab = tok.partition(":")
                    tail_list.append((int(v), int(lab) if lab else None))
            elif line.startswith("E:"):
                body = line[2:]
                pairs = re.findall(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)", body)
                if re.sub(r"\(\s*\d+\s*,\s*\d+\s*\)", "", body).strip():
                    raise GraphError(f"malformed edge list: {line!r}")
                edges = [(int(a), int(b)) for a, b in pairs]
            else:
                raise GraphError(f"unrecognized graph line: {line!r}")
        if nv is None:
            raise GraphError("missing 'V k' line")
        for a, b in edges:
            if not (0 <= a < nv and 0 <= b < nv):
                raise GraphError(f"edge ({a},{b}) refers to a missing vertex")
        if tail_list is None:
            # tails fill each vertex up to valency three
            deg = Counter(v for e in edges for v in e)
            tail_list = [(v, None) for v in range(nv) for _ in range(3 - deg.get(v, 0))]
            if any(deg.get(v, 0) > 3 for v in range(nv)):
                raise GraphError("implicit tails need every vertex to have degree <= 3")
        if ntails is not None and ntails != len(tail_list):
            raise GraphError(f"declared {ntails} tails but found {len(tail_list)}")
        return cls.from_edges(nv, edges, tail_list, genera)


def genus(g: StableGraph) -> int:
    """b1 + sum of vertex genera, with b1 = |E| - |V| + #components."""
    b1 = len(g.edges()) - g.num_vertices + len(g.components())
    return b1 + sum(g.genera)


def is_stable(g: StableGraph) -> bool:
    """2 g(v) - 2 + n(v) > 0 at every vertex."""
    return all(2 * gv - 2 + nv > 0 for gv, nv in zip(g.genera, g.valencies()))


def has_self_loop(g: StableGraph) -> bool:
    return any(a == b for a, b in g.edge_vertices())


# ---------------------------------------------------------------------------
# canonical form by partition refinement and individualization
# ---------------------------------------------------------------------------

def _vertex_colors(g: StableGraph, M) -> list:
    cols = []
    for v in range(g.num_vertices):
        labs = g.tail_labels_at(v)
        cols.append((g.genera[v], M[v][v], len(labs),
                     tuple(sorted(labs, key=lambda x: (x is not None, x or 0)))))
    return cols


def _refine(cells: list, M) -> list:
    while True:
        index = {v: i for i, c in enumerate(cells) for v in c}
        new = []
        for c in cells:
            if len(c) == 1:
                new.append(c)
                continue
            sigs = {}
            for v in c:
                sig = [0] * len(cells)
                for w, cnt in enumerate(M[v]):
                    if cnt and w != v:
                        sig[index[w]] += cnt
                sigs.setdefault(tuple(sig), []).append(v)
            new.extend(sigs[s] for s in sorted(sigs))
        if len(new) == len(cells):
            return new
        cells = new


def _component_canon(vertices: list, colors: list, M) -> tuple:
    """Minimal code over search-tree leaves and the number of leaves attaining it."""
    groups: dict = {}
    for v in vertices:
        groups.setdefault(colors[v], []).append(v)
    start = [groups[c] for c in sorted(groups)]
    best = [None, 0, None]

    def code(order):
        return (tuple(colors[v] for v in order),
                tuple(M[order[i]][order[j]] for i in range(len(order))
                      for j in range(i + 1, len(order))))

    def search(cells):
        cells = _refine(cells, M)
        idx = next((i for i, c in enumerate(cells) if len(c) > 1), None)
        if idx is None:
            order = [c[0] for c in cells]
            cd = code(order)
            if best[0] is None or cd < best[0]:
                best[0], best[1], best[2] = cd, 1, order
            elif cd == best[0]:
                best[1] += 1
            return
        for v in cells[idx]:
            rest = [w for w in cells[idx] if w != v]
            search(cells[:idx] + [[v], rest] + cells[idx + 1:])

    search(start)
    return best[0], best[1], best[2]


def _half_edge_factor(g: StableGraph, M) -> int:
    f = 1
    V = g.num_vertices
    for u in range(V):
        f *= math.factorial(M[u][u]) * 2 ** M[u][u]
        for v in range(u + 1, V):
            f *= math.factorial(M[u][v])
        for cnt in Counter(g.tail_labels_at(u)).values():
            f *= math.factorial(cnt)
    return f


@dataclass(frozen=True)
class GraphClass:
    """Isomorphism class: canonical representative, key string and |Aut|."""

    graph: StableGraph
    key: str
    aut: int
    components: tuple   # ((component key, multiplicity), ...)

    def __str__(self):
        return f"{self.key} aut={self.aut}"


def canonical_class(g: StableGraph) -> GraphClass:
    """Canonical representative and automorphism order of ``g``."""
    M = g.multiplicity_matrix()
    colors = _vertex_colors(g, M)
    comps = []
    vertex_aut = 1
    for comp in g.components():
        cd, count, order = _component_canon(comp, colors, M)
        comps.append((cd, order))
    comps.sort(key=lambda x: x[0])
    order = [v for _, o in comps for v in o]
    mult = Counter(cd for cd, _ in comps)
    auts = {}
    for cd, o in comps:
        if cd not in auts:
            auts[cd] = _component_canon(o, colors, M)[1]
    for cd, m in mult.items():
        vertex_aut *= auts[cd] ** m * math.factorial(m)
    aut = vertex_aut * _half_edge_factor(g, M)
    rep = _rebuild(g, order)
    comp_keys = []
    seen = []
    for cd, o in comps:
        if cd in seen:
            continue
        seen.append(cd)
        comp_keys.append((_rebuild(g.induced(o), list(range(len(o)))).to_text(), mult[cd]))
    return GraphClass(rep, rep.to_text(), aut, tuple(comp_keys))


def _rebuild(g: StableGraph, order) -> StableGraph:
    """Relabel vertices by ``order`` and renumber half-edges canonically."""
    pos = {v: i for i, v in enumerate(order)}
    edges = sorted(tuple(sorted((pos[a], pos[b]))) for a, b in g.edge_vertices())
    tails = sorted(((pos[g.incidence[h]], g.labels[h]) for h in g.tails()),
                   key=lambda t: (t[0], t[1] is not None, t[1] or 0))
    genera = [g.genera[v] for v in order]
    return StableGraph.from_edges(g.num_vertices, edges, tails, genera)


def canonical_key(g: StableGraph) -> str:
    return canonical_class(g).key


def automorphism_order(g: StableGraph) -> int:
    if g.num_vertices > AUT_VERTEX_BOUND:
        raise GraphError(f"automorphism count limited to {AUT_VERTEX_BOUND} vertices")
    return canonical_class(g).aut


def are_isomorphic(g1: StableGraph, g2: StableGraph) -> bool:
    return canonical_key(g1) == canonical_key(g2)


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _adjacency_matrices(resid: list, allow_loops: bool):
    """Symmetric nonnegative integer matrices with 2*M[i][i] + sum_{j!=i} M[i][j] = resid[i]."""
    V = len(resid)
    M = [[0] * V for _ in range(V)]
    r = list(resid)

    def rec(i, j):
        if i == V:
            yield [row[:] for row in M]
            return
        if j == V:
            if r[i] == 0:
                yield from rec(i + 1, i + 1)
            return
        if j == i:
            top = r[i] // 2 if allow_loops else 0
            for lp in range(top + 1):
                M[i][i] = lp
                r[i] -= 2 * lp
                yield from rec(i, i + 1)
                r[i] += 2 * lp
            M[i][i] = 0
            return
        if r[i] > sum(r[j:]):
            return
        for m in range(min(r[i], r[j]) + 1):
            M[i][j] = M[j][i] = m
            r[i] -= m
            r[j] -= m
            yield from rec(i, j + 1)
            r[i] += m
            r[j] += m
        M[i][j] = M[j][i] = 0

    yield from rec(0, 0)


def _tail_distributions(caps: list, blocks: list, total: int):
    """Tail counts per vertex, nonincreasing inside blocks of interchangeable vertices."""
    V = len(caps)
    t = [0] * V

    def rec(v, left):
        if v == V:
            if left == 0:
                yield list(t)
            return
        hi = min(caps[v], left)
        if v > 0 and blocks[v] == blocks[v - 1]:
            hi = min(hi, t[v - 1])
        for k in range(hi, -1, -1):
            t[v] = k
            yield from rec(v + 1, left - k)
        t[v] = 0

    yield from rec(0, total)


def enumerate_graphs(valencies: Sequence, num_tails: int, *, genera: Sequence | None = None,
                     connected: bool = True, allow_loops: bool = True) -> list:
    """All isomorphism classes with the given vertex valencies/genera and tail count."""
    V = len(valencies)
    genera = list(genera) if genera is not None else [0] * V
    if not connected and len(set(zip(genera, valencies))) <= 1 and V > 0:
        return _disconnected_uniform(valencies[0], genera[0], V, num_tails, allow_loops)
    order = sorted(range(V), key=lambda v: (genera[v], valencies[v]))
    vals = [valencies[v] for v in order]
    gens = [genera[v] for v in order]
    blocks = [(gens[i], vals[i]) for i in range(V)]
    if (sum(vals) - num_tails) % 2 or num_tails > sum(vals):
        return []
    seen: dict = {}
    for tails in _tail_distributions(vals, blocks, num_tails):
        resid = [vals[i] - tails[i] for i in range(V)]
        for M in _adjacency_matrices(resid, allow_loops):
            edges = [(i, j) for i in range(V) for j in range(i, V)
                     for _ in range(M[i][j])]
            tl = [i for i in range(V) for _ in range(tails[i])]
            g = StableGraph.from_edges(V, edges, tl, gens)
            if connected and not g.is_connected():
                continue
            cls = canonical_class(g)
            seen.setdefault(cls.key, cls)
    return [seen[k] for k in sorted(seen)]


def _partitions(total: int, largest: int | None = None):
    largest = total if largest is None else largest
    if total == 0:
        yield []
        return
    for k in range(min(total, largest), 0, -1):
        for rest in _partitions(total - k, k):
            yield [k] + rest


def disjoint_union(graphs: Sequence) -> StableGraph:
    edges, tails, genera = [], [], []
    off = 0
    for g in graphs:
        edges += [(a + off, b + off) for a, b in g.edge_vertices()]
        tails += [(g.incidence[h] + off, g.labels[h]) for h in g.tails()]
        genera += list(g.genera)
        off += g.num_vertices
    return StableGraph.from_edges(off, edges, tails, genera)


def _disconnected_uniform(val: int, gen: int, V: int, T: int, allow_loops: bool) -> list:
    """All classes (connected or not) with V identical vertices, built from components."""
    cache: dict = {}

    def connected_classes(v, t):
        if (v, t) not in cache:
            cache[(v, t)] = enumerate_graphs([val] * v, t, genera=[gen] * v,
                                             connected=True, allow_loops=allow_loops)
        return cache[(v, t)]

    out: dict = {}
    for sizes in _partitions(V):
        # choose a tail count for each component, nonincreasing among equal sizes
        def tail_splits(i, left, prev):
            if i == len(sizes):
                if left == 0:
                    yield []
                return
            hi = min(left, val * sizes[i])
            if i and sizes[i] == sizes[i - 1]:
                hi = min(hi, prev)
            for t in range(hi, -1, -1):
                for rest in tail_splits(i + 1, left - t, t):
                    yield [t] + rest
        for ts in tail_splits(0, T, None):
            pools = [connected_classes(v, t) for v, t in zip(sizes, ts)]
            if any(not p for p in pools):
                continue
            for combo in itertools.product(*pools):
                cls = canonical_class(disjoint_union([c.graph for c in combo]))
                out.setdefault(cls.key, cls)
    return [out[k] for k in sorted(out)]


def enumerate_trivalent(num_vertices: int, num_tails: int,
                        allow_disconnected: bool = False) -> list:
    """Trivalent genus-0 graphs without self-loops (parallel edges allowed)."""
    if num_vertices > ENUM_VERTEX_BOUND:
        raise GraphError(f"enumeration limited to {ENUM_VERTEX_BOUND} vertices")
    if num_vertices < 0 or num_tails < 0 or (3 * num_vertices - num_tails) % 2 \
            or num_tails > 3 * num_vertices:
        raise GraphError(f"no trivalent graph with V={num_vertices}, T={num_tails}: "
                         "3V = 2E + T has no solution")
    return enumerate_graphs([3] * num_vertices, num_tails,
                            connected=not allow_disconnected, allow_loops=False)


def admissible_partition_graphs(n: int, b1: int) -> list:
    """Graph classes contributing to the partition function for dim_C X = 2n, b1(M) = b1.

    Each vertex carries exactly one tail per harmonic label 1..b1 (labels at a
    vertex must be distinct and there are b1 of them), leaving 3 - b1 edge
    slots per vertex.
    """
    if n < 1 or b1 < 0:
        raise GraphError("need n >= 1 and b1 >= 0")
    if 2 * n > ENUM_VERTEX_BOUND:
        raise GraphError(f"enumeration limited to {ENUM_VERTEX_BOUND} vertices")
    if b1 > 3:
        return []
    V = 2 * n
    classes = {}
    for cls in enumerate_graphs([3 - b1] * V, 0, connected=False, allow_loops=False):
        base = cls.graph
        tails = [(v, a) for v in range(V) for a in range(1, b1 + 1)]
        g = StableGraph.from_edges(V, base.edge_vertices(), tails)
        c = canonical_class(g)
        classes[c.key] = c
    return [classes[k] for k in sorted(classes)]


# ---------------------------------------------------------------------------
# boundary strata
# ---------------------------------------------------------------------------

def _induced_connected(g: StableGraph, S) -> bool:
    S = set(S)
    if not S:
        return False
    adj = {v: set() for v in S}
    for a, b in g.edge_vertices():
        if a in S and b in S and a != b:
            adj[a].add(b)
            adj[b].add(a)
    start = next(iter(S))
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == S


def boundary_strata(g: StableGraph) -> list:
    """Vertex subsets of size >= 2 whose induced subgraph is connected."""
    V = g.num_vertices
    out = []
    for size in range(2, V + 1):
        for S in itertools.combinations(range(V), size):
            if _induced_connected(g, S):
                out.append(S)
    return out


@dataclass(frozen=True)
class StratumClass:
    tag: str
    split: tuple | None = None


def classify_stratum(g: StableGraph, S) -> StratumClass:
    S = tuple(sorted(set(S)))
    if len(S) < 2 or any(not 0 <= v < g.num_vertices for v in S) \
            or not _induced_connected(g, S):
        raise GraphError(f"{S} is not a boundary stratum (needs >= 2 vertices, connected)")
    if len(S) >= 3:
        return StratumClass("vanishes_kontsevich")
    u, v = S
    shared = sum(1 for a, b in g.edge_vertices() if {a, b} == {u, v})
    if shared >= 2:
        return StratumClass("two_vertex_multi_edge")
    return StratumClass("two_vertex_single_edge", (g.valency(u) - 1, g.valency(v) - 1))


# ---------------------------------------------------------------------------
# cohomology tables
# ---------------------------------------------------------------------------

def handlebody_cohomology(genus: int) -> tuple:
    """Compactly supported Betti numbers (H^0..H^3) of the genus-g handlebody."""
    if genus < 0:
        raise GraphError("genus must be nonnegative")
    return (0, 0, genus, 1)


def observable_fiber_character(n: int, genus: int) -> list:
    """Coefficients of (1 + s)^{2 n g}, the graded dimension of (wedge C^{2n})^{(x) g}."""
    if n < 0 or genus < 0:
        raise GraphError("n and genus must be nonnegative")
    N = 2 * n * genus
    return [math.comb(N, k) for k in range(N + 1)]
