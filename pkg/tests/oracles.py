"""Slow, direct implementations used to cross-check the library."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from rwk.graph_kit import StableGraph
from rwk.weight_system import perm_sign


def aut_by_half_edges(g: StableGraph) -> int:
    """Count pairs (vertex perm, half-edge perm) preserving every structure map."""
    V, H = g.num_vertices, g.num_half_edges
    count = 0
    for sigma in itertools.permutations(range(V)):
        if any(g.genera[v] != g.genera[sigma[v]] for v in range(V)):
            continue
        img = [None] * H
        used = [False] * H

        def rec(h):
            if h == H:
                return 1
            if img[h] is not None:
                return rec(h + 1)
            hp = g.involution[h]
            total = 0
            for t in range(H):
                if used[t] or g.incidence[t] != sigma[g.incidence[h]] \
                        or g.labels[t] != g.labels[h]:
                    continue
                tp = g.involution[t]
                if (hp == h) != (tp == t):
                    continue
                if hp == h:
                    img[h], used[t] = t, True
                    total += rec(h + 1)
                    img[h], used[t] = None, False
                    continue
                if used[tp] or g.incidence[tp] != sigma[g.incidence[hp]]:
                    continue
                img[h], used[t], img[hp], used[tp] = t, True, tp, True
                total += rec(h + 1)
                img[h], used[t], img[hp], used[tp] = None, False, None, False
            return total

        count += rec(0)
    return count


def aut_by_vertex_perms(g: StableGraph) -> int:
    """Vertex permutations preserving the multiplicity matrix, times edge/tail factors."""
    V = g.num_vertices
    M = g.multiplicity_matrix()
    tl = [sorted(map(repr, g.tail_labels_at(v))) for v in range(V)]
    count = 0
    for sigma in itertools.permutations(range(V)):
        if all(M[a][b] == M[sigma[a]][sigma[b]] for a in range(V) for b in range(V)) \
                and all(tl[v] == tl[sigma[v]] and g.genera[v] == g.genera[sigma[v]]
                        for v in range(V)):
            count += 1
    factor = 1
    for a in range(V):
        factor *= math.factorial(M[a][a]) * 2 ** M[a][a]
        for b in range(a + 1, V):
            factor *= math.factorial(M[a][b])
        labs = g.tail_labels_at(a)
        for lab in set(labs):
            factor *= math.factorial(labs.count(lab))
    return count * factor


def multigraph_canon(M: list) -> tuple:
    V = len(M)
    best = None
    for p in itertools.permutations(range(V)):
        code = tuple(M[p[a]][p[b]] for a in range(V) for b in range(V))
        if best is None or code < best:
            best = code
    return best


def raw_matching_classes(slots: list, allow_loops: bool = False) -> set:
    """Isomorphism classes (as canonical multiplicity codes) of all graphs obtained by
    perfect matchings of the listed half-edge slots (slot i sits on vertex slots[i])."""
    V = max(slots) + 1 if slots else 0
    mats = set()

    def rec(free, pairs):
        if not free:
            M = [[0] * V for _ in range(V)]
            for a, b in pairs:
                M[a][b] += 1
                if a != b:
                    M[b][a] += 1
            mats.add(tuple(map(tuple, M)))
            return
        first, rest = free[0], free[1:]
        for i, other in enumerate(rest):
            a, b = slots[first], slots[other]
            if a == b and not allow_loops:
                continue
            rec(rest[:i] + rest[i + 1:], pairs + [(a, b)])

    rec(list(range(len(slots))), [])
    return {multigraph_canon([list(r) for r in M]) for M in mats}


def theta_weight_by_loops(target) -> Fraction:
    """Theta graph weight by explicit index sums (n = 1, edges oriented 0 -> 1)."""
    phi = target.vertex_tensors[3]
    winv = target.omega_inv
    m = 2 * target.n
    total = Fraction(0)
    for abar in itertools.permutations(range(m)):
        s = perm_sign(abar)
        for idx0 in itertools.product(range(m), repeat=3):
            c0 = phi.get((abar[0], idx0), 0)
            if not c0:
                continue
            for idx1 in itertools.product(range(m), repeat=3):
                c1 = phi.get((abar[1], idx1), 0)
                if not c1:
                    continue
                w = 1
                for i, j in zip(idx0, idx1):
                    w *= winv[i][j]
                total += s * c0 * c1 * w
    return total


def tripods_weight_by_loops(target) -> Fraction:
    """Two vertices, three tails each labeled 1, 2, 3; each label closed by epsilon."""
    phi = target.vertex_tensors[3]
    total = Fraction(0)
    for abar in itertools.permutations(range(2)):
        s = perm_sign(abar)
        for idx0 in itertools.product(range(2), repeat=3):
            for idx1 in itertools.product(range(2), repeat=3):
                eps = 1
                for i, j in zip(idx0, idx1):
                    eps *= perm_sign((i, j))
                if eps:
                    total += s * eps * phi.get((abar[0], idx0), 0) * phi.get((abar[1], idx1), 0)
    return total


def multigraph_isomorphic(M: list, N: list) -> bool:
    """Backtracking search for a vertex bijection carrying M onto N."""
    V = len(M)
    if V != len(N):
        return False
    dm = [sorted(r) for r in M]
    dn = [sorted(r) for r in N]
    img = [None] * V
    used = [False] * V

    def rec(a):
        if a == V:
            return True
        for b in range(V):
            if used[b] or dm[a] != dn[b] or M[a][a] != N[b][b]:
                continue
            if any(M[a][c] != N[b][img[c]] for c in range(a)):
                continue
            img[a], used[b] = b, True
            if rec(a + 1):
                return True
            img[a], used[b] = None, False
        return False

    return rec(0)


def raw_matching_representatives(slots: list) -> list:
    """One multiplicity matrix per isomorphism class of loop-free perfect matchings."""
    V = max(slots) + 1 if slots else 0
    mats = set()

    def rec(free, M):
        if not free:
            mats.add(tuple(map(tuple, M)))
            return
        first, rest = free[0], free[1:]
        for i, other in enumerate(rest):
            a, b = slots[first], slots[other]
            if a == b:
                continue
            M[a][b] += 1
            M[b][a] += 1
            rec(rest[:i] + rest[i + 1:], M)
            M[a][b] -= 1
            M[b][a] -= 1

    rec(list(range(len(slots))), [[0] * V for _ in range(V)])
    reps = []
    for m in sorted(mats):
        if not any(multigraph_isomorphic(m, r) for r in reps):
            reps.append(m)
    return reps
