"""Rozansky-Witten weights of graphs from vertex tensors of a holomorphic symplectic target.

Each vertex of valency k carries a tensor Phi^{(k)}_{abar; i_1..i_k}, totally
symmetric in the fiber indices; edges contract fiber indices with omega^{ij};
the antiholomorphic slots abar of the 2n vertices are closed with the top
epsilon symbol taken in vertex order.  Tails are closed either by concrete
fiber vectors or by an epsilon contraction over all tails with a given label.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .graph_kit import StableGraph, canonical_class
from .weyl_algebra import WeylError, invert_matrix


class TargetError(ValueError):
    pass


def perm_sign(seq) -> int:
    """Sign of a sequence of distinct integers relative to sorted order (0 if repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    seen = [False] * len(seq)
    ranks = {v: i for i, v in enumerate(sorted(seq))}
    perm = [ranks[v] for v in seq]
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def symmetrize_tensor(raw: dict, valency: int) -> dict:
    """Full symmetrization in the fiber indices with 1/k! normalization.

    ``raw`` maps (abar, (i_1..i_k)) to values; the result lists every ordered
    index tuple with a nonzero symmetrized value.
    """
    fact = math.factorial(valency)
    out: dict = {}
    for (abar, idx), val in raw.items():
        if len(idx) != valency:
            raise TargetError(f"entry {idx} does not have {valency} fiber indices")
        val = Fraction(val)
        for perm in itertools.permutations(idx):
            key = (abar, tuple(perm))
            out[key] = out.get(key, 0) + val / fact
    return {k: v for k, v in out.items() if v}


@dataclass
class TargetData:
    n: int
    omega: tuple
    vertex_tensors: dict                     # valency -> {(abar, idx tuple): Fraction}
    omega_inv: tuple = field(default=None)

    def __post_init__(self):
        m = 2 * self.n
        self.omega = tuple(tuple(Fraction(x) for x in row) for row in self.omega)
        if len(self.omega) != m or any(len(r) != m for r in self.omega):
            raise TargetError(f"omega must be {m}x{m} for n={self.n}")
        for i in range(m):
            for j in range(m):
                if self.omega[i][j] != -self.omega[j][i]:
                    raise TargetError(f"omega is not antisymmetric at ({i},{j})")
        if m:
            try:
                self.omega_inv = invert_matrix(self.omega)
            except WeylError:
                raise TargetError("omega is not invertible") from None
        else:
            self.omega_inv = ()
        tensors = {}
        for k, entries in self.vertex_tensors.items():
            k = int(k)
            if k < 3:
                raise TargetError(f"vertex tensors need valency >= 3, got {k}")
            clean = {}
            for (abar, idx), v in entries.items():
                idx = tuple(idx)
                if len(idx) != k or not 0 <= abar < m or any(not 0 <= i < m for i in idx):
                    raise TargetError(f"valency-{k} entry ({abar}, {idx}) out of range")
                if Fraction(v):
                    clean[(abar, idx)] = Fraction(v)
            for (abar, idx), v in clean.items():
                for p in set(itertools.permutations(idx)):
                    if clean.get((abar, p), 0) != v:
                        raise TargetError(
                            f"valency-{k} tensor is not symmetric in its fiber indices at "
                            f"abar={abar}, idx={list(idx)} vs {list(p)}; "
                            "run symmetrize_tensor on the raw entries first")
            tensors[k] = clean
        self.vertex_tensors = tensors

    def scaled_omega(self, lam) -> "TargetData":
        lam = Fraction(lam)
        return TargetData(self.n, [[lam * x for x in r] for r in self.omega],
                          self.vertex_tensors)

    def by_prefix(self, k: int) -> dict:
        """Nonzero entries grouped by abar, for the contraction search."""
        out: dict = {}
        for (abar, idx), v in self.vertex_tensors.get(k, {}).items():
            out.setdefault(abar, []).append((idx, v))
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "omega": [[str(x) for x in r] for r in self.omega],
            "vertex_tensors": [
                {"valency": k,
                 "entries": [{"abar": a, "idx": list(i), "value": str(v)}
                             for (a, i), v in sorted(t.items())]}
                for k, t in sorted(self.vertex_tensors.items())],
        }


def parse_rational(x) -> Fraction:
    if isinstance(x, bool):
        raise TargetError(f"not a rational: {x!r}")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise TargetError(f"not a rational string: {x!r}") from None
    raise TargetError(f"rationals must be given as 'p/q' strings or integers, got {x!r}")


def target_from_json(data: dict) -> TargetData:
    try:
        n = int(data["n"])
        omega = [[parse_rational(x) for x in row] for row in data["omega"]]
        tensors: dict = {}
        for block in data.get("vertex_tensors", []):
            k = int(block["valency"])
            entries = tensors.setdefault(k, {})
            for e in block["entries"]:
                key = (int(e["abar"]), tuple(int(i) for i in e["idx"]))
                if key in entries:
                    raise TargetError(f"duplicate entry {key} in valency-{k} tensor")
                entries[key] = parse_rational(e["value"])
    except (KeyError, TypeError) as exc:
        raise TargetError(f"malformed target data: missing or bad field {exc}") from None
    return TargetData(n, omega, tensors)


def load_target(path) -> TargetData:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise TargetError(f"{path}: invalid JSON ({exc})") from None
    return target_from_json(data)


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------

@dataclass
class TailAssignment:
    """Labels for tails plus optional concrete fiber vectors per label.

    ``labels`` maps tail half-edge -> label.  Labels listed in ``vectors`` are
    closed by contracting with that fiber vector; every other label is closed
    by the epsilon symbol over its tails taken in vertex order.
    """

    labels: dict = field(default_factory=dict)
    vectors: dict = field(default_factory=dict)

    @classmethod
    def from_graph(cls, g: StableGraph, vectors: dict | None = None) -> "TailAssignment":
        return cls({h: g.labels[h] for h in g.tails()}, dict(vectors or {}))


def _check_tails(g: StableGraph, tails: TailAssignment):
    tl = set(g.tails())
    if set(tails.labels) != tl:
        raise TargetError("tail assignment must label exactly the tails of the graph")
    for v in range(g.num_vertices):
        labs = [tails.labels[h] for h in g.tails() if g.incidence[h] == v]
        if len(labs) != len(set(labs)):
            raise TargetError(f"vertex {v} carries a repeated tail label")


def _vertex_order_edges(g: StableGraph, order_pos):
    """Edges oriented from the half-edge at the earlier vertex (ties: lower half-edge)."""
    out = []
    for h, s in g.edges():
        a, b = g.incidence[h], g.incidence[s]
        if (order_pos[a], h) <= (order_pos[b], s):
            out.append((h, s))
        else:
            out.append((s, h))
    return out


def oriented_weight(g: StableGraph, target: TargetData, tails: TailAssignment) -> Fraction:
    """The contraction for the labeling as given (vertex order = vertex index).

    Not invariant by itself: relabeling the vertices multiplies it by the
    orientation sign of ``orientation_sign``.
    """
    _check_tails(g, tails)
    m = 2 * target.n
    V = g.num_vertices
    if V != m:
        return Fraction(0)
    vals = g.valencies()
    for k in set(vals):
        if k not in target.vertex_tensors:
            raise TargetError(f"no vertex tensor supplied for valency {k}")
    order_pos = list(range(V))
    edges = _vertex_order_edges(g, order_pos)
    winv = target.omega_inv
    at = [g.half_edges_at(v) for v in range(V)]
    # the half-edges that close an edge once vertex v is assigned
    closing = [[] for _ in range(V)]
    for h, s in edges:
        closing[max(g.incidence[h], g.incidence[s])].append((h, s))
    eps_labels = sorted({lab for lab in tails.labels.values() if lab not in tails.vectors},
                        key=repr)
    eps_tails = {lab: sorted((h for h, x in tails.labels.items() if x == lab),
                             key=lambda h: (g.incidence[h], h)) for lab in eps_labels}
    if any(len(t) != m for t in eps_tails.values()):
        return Fraction(0)
    tail_vec = {h: tails.vectors[lab] for h, lab in tails.labels.items()
                if lab in tails.vectors}
    tables = [target.by_prefix(vals[v]) for v in range(V)]
    # Entries are indexed by their values on constrained slots so that only
    # compatible ones are visited: a slot whose edge partner sits at an earlier
    # vertex must pair nontrivially through omega, and an epsilon-closed tail
    # must avoid the values its label already used.
    eps_of = {h: lab for lab, hs in eps_tails.items() for h in hs}
    fixed = []
    for v in range(V):
        pos = []
        for p, h in enumerate(at[v]):
            s = g.involution[h]
            if s != h and g.incidence[s] < v:
                pos.append((p, "edge", s))
            elif h in eps_of:
                pos.append((p, "eps", eps_of[h]))
        fixed.append(pos)
        grouped = {}
        for abar, entries in tables[v].items():
            bucket = grouped.setdefault(abar, {})
            for tup, val in entries:
                bucket.setdefault(tuple(tup[p] for p, _, _ in pos), []).append((tup, val))
        tables[v] = grouped
    partners = [[j for j in range(m) if winv[i][j] or winv[j][i]] for i in range(m)]
    eps_used = {lab: set() for lab in eps_labels}
    idx = [None] * g.num_half_edges
    used_abar: list = []
    total = Fraction(0)

    def rec(v, coeff):
        nonlocal total
        if v == V:
            sign = perm_sign(used_abar)
            for lab in eps_labels:
                sign *= perm_sign([idx[h] for h in eps_tails[lab]])
                if not sign:
                    return
            total += sign * coeff
            return
        choices = [partners[idx[x]] if kind == "edge"
                   else [j for j in range(m) if j not in eps_used[x]]
                   for _, kind, x in fixed[v]]
        mine = [(lab, at[v][p]) for p, kind, lab in fixed[v] if kind == "eps"]
        for abar, buckets in tables[v].items():
            if abar in used_abar:
                continue
            used_abar.append(abar)
            for want in itertools.product(*choices):
                for tup, val in buckets.get(want, ()):
                    for h, i in zip(at[v], tup):
                        idx[h] = i
                    c = coeff * val
                    for h, s in closing[v]:
                        w = winv[idx[h]][idx[s]]
                        if not w:
                            c = 0
                            break
                        c *= w
                    if c:
                        for h in at[v]:
                            if h in tail_vec:
                                c *= Fraction(tail_vec[h][idx[h]])
                                if not c:
                                    break
                    if c:
                        for lab, h in mine:
                            eps_used[lab].add(idx[h])
                        rec(v + 1, c)
                        for lab, h in mine:
                            eps_used[lab].discard(idx[h])
            used_abar.pop()

    rec(0, Fraction(1))
    return total


def orientation_sign(g: StableGraph, vperm, tails: TailAssignment) -> int:
    """Sign relating oriented weights of g and its relabeling by vperm.

    Vertex reordering permutes the abar slots and every epsilon-closed tail
    label (one sign each), and flips the orientation of each edge whose
    endpoints change order.
    """
    eps = {lab for lab in tails.labels.values() if lab not in tails.vectors}
    s = perm_sign([vperm[v] for v in range(g.num_vertices)]) ** (1 + len(eps))
    for a, b in g.edge_vertices():
        if a != b and (a < b) != (vperm[a] < vperm[b]):
            s = -s
    return s


def rw_class(g: StableGraph, target: TargetData, tails: TailAssignment | None = None) -> Fraction:
    """Weight evaluated on the canonical representative of the graph's class."""
    if g.num_vertices != 2 * target.n:
        return Fraction(0)
    if tails is None:
        tails = TailAssignment.from_graph(g)
    _check_tails(g, tails)
    labs = tuple(tails.labels.get(h) for h in range(g.num_half_edges))
    g = StableGraph(g.genera, g.incidence, g.involution, labs)
    canon, vperm, hperm = canonical_relabeling(g)
    moved = TailAssignment({hperm[h]: lab for h, lab in tails.labels.items()}, tails.vectors)
    return oriented_weight(canon, target, moved)


def canonical_relabeling(g: StableGraph):
    """(canonical graph, vertex map, half-edge map) carrying g onto its representative."""
    rep = canonical_class(g).graph
    vperm = _find_isomorphism(g, rep)
    hperm = _match_half_edges(g, rep, vperm)
    return g.relabeled(vperm, hperm), vperm, hperm


def _find_isomorphism(g: StableGraph, rep: StableGraph):
    """A vertex bijection g -> rep preserving all data (search with pruning)."""
    from .graph_kit import _vertex_colors
    Mg, Mr = g.multiplicity_matrix(), rep.multiplicity_matrix()
    cg, cr = _vertex_colors(g, Mg), _vertex_colors(rep, Mr)
    V = g.num_vertices
    img = [None] * V
    used = [False] * V

    def rec(v):
        if v == V:
            return True
        for w in range(V):
            if used[w] or cg[v] != cr[w]:
                continue
            if any(Mg[v][u] != Mr[w][img[u]] for u in range(v)):
                continue
            img[v], used[w] = w, True
            if rec(v + 1):
                return True
            used[w] = False
        img[v] = None
        return False

    if not rec(0):
        raise TargetError("graph does not match its canonical representative")
    return img


def _match_half_edges(g: StableGraph, rep: StableGraph, vperm):
    pool: dict = {}
    for h, s in rep.edges():
        key = tuple(sorted((rep.incidence[h], rep.incidence[s])))
        pool.setdefault(("e", key), []).append((h, s))
    for h in rep.tails():
        pool.setdefault(("t", rep.incidence[h], rep.labels[h]), []).append(h)
    hperm = [None] * g.num_half_edges
    for h, s in g.edges():
        a, b = vperm[g.incidence[h]], vperm[g.incidence[s]]
        rh, rs = pool[("e", tuple(sorted((a, b))))].pop()
        if rep.incidence[rh] != a:
            rh, rs = rs, rh
        hperm[h], hperm[s] = rh, rs
    for h in g.tails():
        hperm[h] = pool[("t", vperm[g.incidence[h]], g.labels[h])].pop()
    return hperm


def relabel_invariance_check(g: StableGraph, target: TargetData, tails: TailAssignment,
                             vperm, hperm=None) -> bool:
    """True iff the weight is unchanged by relabeling and the raw contraction
    transforms by exactly the orientation sign."""
    nh = g.num_half_edges
    hperm = list(hperm) if hperm is not None else list(range(nh))
    g2 = g.relabeled(vperm, hperm)
    t2 = TailAssignment({hperm[h]: lab for h, lab in tails.labels.items()}, tails.vectors)
    if rw_class(g, target, tails) != rw_class(g2, target, t2):
        return False
    raw1 = oriented_weight(g, target, tails)
    raw2 = oriented_weight(g2, target, t2)
    return raw2 == orientation_sign(g, vperm, tails) * raw1
