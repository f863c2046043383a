"""Finite-dimensional BV calculus: graded polynomial functionals, kernel contraction,
the renormalization-group flow W(P, I) and the quantum master equation.

A functional is a polynomial in generators x^0..x^{N-1} of fixed parity with
an integer power of hbar attached to every monomial.  Monomials are sorted
tuples of generator indices; odd generators occur at most once.  Derivatives
act from the left.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .graph_kit import enumerate_graphs


class ToyError(ValueError):
    pass


MAX_HBAR = 4
MAX_GENERATORS = 6


# ---------------------------------------------------------------------------
# raw polynomial arithmetic over a parity table
# ---------------------------------------------------------------------------

def _mono_mul(par, m1: tuple, m2: tuple):
    """Product of two sorted monomials; returns (sign, monomial) or (0, None)."""
    if not m1:
        return 1, m2
    if not m2:
        return 1, m1
    odd1 = [a for a in m1 if par[a]]
    odd2 = [b for b in m2 if par[b]]
    sign = 1
    if odd1 and odd2:
        if set(odd1) & set(odd2):
            return 0, None
        swaps = 0
        j = 0
        for a in odd1:
            while j < len(odd2) and odd2[j] < a:
                j += 1
            swaps += j
        if swaps & 1:
            sign = -1
    return sign, tuple(sorted(m1 + m2))


def _mul(par, A: dict, B: dict, keep=None) -> dict:
    out: dict = {}
    for (h1, m1), c1 in A.items():
        for (h2, m2), c2 in B.items():
            key_h = h1 + h2
            if keep is not None and not keep(key_h, len(m1) + len(m2)):
                continue
            s, m = _mono_mul(par, m1, m2)
            if not s:
                continue
            key = (key_h, m)
            out[key] = out.get(key, 0) + s * c1 * c2
    return {k: v for k, v in out.items() if v}


def _add(A: dict, B: dict, scale=1) -> dict:
    out = dict(A)
    for k, v in B.items():
        out[k] = out.get(k, 0) + scale * v
    return {k: v for k, v in out.items() if v}


def _deriv(par, a: int, A: dict) -> dict:
    """Left derivative d/dx^a."""
    out: dict = {}
    for (h, m), c in A.items():
        if a not in m:
            continue
        pos = m.index(a)
        if par[a]:
            sign = -1 if sum(1 for b in m[:pos] if par[b]) & 1 else 1
            coeff = sign * c
        else:
            coeff = m.count(a) * c
        key = (h, m[:pos] + m[pos + 1:])
        out[key] = out.get(key, 0) + coeff
    return {k: v for k, v in out.items() if v}


def _parity_of(par, m) -> int:
    return sum(par[a] for a in m) & 1


# ---------------------------------------------------------------------------
# public types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToySpace:
    names: tuple
    parities: tuple
    pairing: tuple = ()

    def __post_init__(self):
        if len(self.names) != len(self.parities):
            raise ToyError("one parity per generator required")
        if len(self.names) > MAX_GENERATORS:
            raise ToyError(f"toy spaces are limited to {MAX_GENERATORS} generators")
        if any(p not in (0, 1) for p in self.parities):
            raise ToyError("parities must be 0 or 1")
        if self.pairing:
            N = len(self.names)
            if len(self.pairing) != N or any(len(r) != N for r in self.pairing):
                raise ToyError("pairing must be an N x N matrix")
            for a in range(N):
                for b in range(N):
                    s = -(-1) ** (self.parities[a] * self.parities[b])
                    if Fraction(self.pairing[a][b]) != s * Fraction(self.pairing[b][a]):
                        raise ToyError(f"pairing not graded antisymmetric at ({a},{b})")

    @property
    def dim(self) -> int:
        return len(self.names)


class Functional:
    """Polynomial in the generators with hbar powers; exact rational coefficients."""

    __slots__ = ("space", "terms")

    def __init__(self, space: ToySpace, terms: dict | None = None):
        self.space = space
        clean = {}
        for (h, m), c in (terms or {}).items():
            m = tuple(sorted(m))
            if any(not 0 <= a < space.dim for a in m):
                raise ToyError(f"monomial {m} uses a missing generator")
            if any(space.parities[a] and m.count(a) > 1 for a in set(m)):
                continue  # square of an odd generator
            c = Fraction(c)
            if c:
                clean[(h, m)] = clean.get((h, m), 0) + c
        self.terms = {k: v for k, v in clean.items() if v}

    @classmethod
    def from_terms(cls, space, items) -> "Functional":
        """items: iterable of (coeff, hbar power, [generator indices in order])."""
        out = cls(space)
        for c, h, gens in items:
            mono = cls(space, {(0, ()): c})
            for a in gens:
                mono = mono * cls(space, {(0, (a,)): 1})
            out = out + mono.shift_hbar(h)
        return out

    @property
    def par(self):
        return self.space.parities

    def _wrap(self, terms):
        return Functional(self.space, terms)

    def __add__(self, other):
        return self._wrap(_add(self.terms, other.terms))

    def __sub__(self, other):
        return self._wrap(_add(self.terms, other.terms, -1))

    def __neg__(self):
        return self._wrap({k: -v for k, v in self.terms.items()})

    def scale(self, c):
        c = Fraction(c)
        return self._wrap({k: c * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Functional):
            return self._wrap(_mul(self.par, self.terms, other.terms))
        return self.scale(other)

    __rmul__ = scale

    def __eq__(self, other):
        return isinstance(other, Functional) and self.space == other.space \
            and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self):
        return not self.terms

    def shift_hbar(self, k: int):
        return self._wrap({(h + k, m): c for (h, m), c in self.terms.items()})

    def filter(self, pred):
        return self._wrap({(h, m): c for (h, m), c in self.terms.items() if pred(h, len(m))})

    def parity_parts(self):
        even = {k: v for k, v in self.terms.items() if not _parity_of(self.par, k[1])}
        odd = {k: v for k, v in self.terms.items() if _parity_of(self.par, k[1])}
        return self._wrap(even), self._wrap(odd)

    def parity(self):
        ps = {_parity_of(self.par, m) for (_, m) in self.terms}
        if len(ps) > 1:
            raise ToyError("functional is not of homogeneous parity")
        return ps.pop() if ps else 0

    def deriv(self, a: int):
        return self._wrap(_deriv(self.par, a, self.terms))

    def min_hbar(self):
        return min((h for h, _ in self.terms), default=0)

    def homogeneous(self, h: int, deg: int):
        return self.filter(lambda hh, dd: hh == h and dd == deg)

    def support(self):
        return sorted({(h, len(m)) for h, m in self.terms})

    def to_json(self):
        return [{"coeff": str(c), "hbar": h, "mono": list(m)}
                for (h, m), c in sorted(self.terms.items())]

    def __repr__(self):
        parts = []
        for (h, m), c in sorted(self.terms.items()):
            mon = "*".join(self.space.names[a] for a in m) or "1"
            parts.append(f"({c})*hbar^{h}*{mon}")
        return " + ".join(parts) or "0"


@dataclass(frozen=True)
class Kernel:
    """Graded-symmetric 2-tensor K^{ab} with K^{ab} = (-1)^{|a||b|} K^{ba}.

    The associated operator is d_K = 1/2 K^{ab} d_a d_b.
    """

    space: ToySpace
    entries: tuple   # ((a, b, value), ...) over all ordered pairs with nonzero value

    @classmethod
    def from_matrix(cls, space: ToySpace, mat) -> "Kernel":
        N = space.dim
        ent = []
        for a in range(N):
            for b in range(N):
                v = Fraction(mat[a][b])
                if v:
                    ent.append((a, b, v))
        k = cls(space, tuple(ent))
        k.validate()
        return k

    def matrix(self):
        N = self.space.dim
        M = [[Fraction(0)] * N for _ in range(N)]
        for a, b, v in self.entries:
            M[a][b] = v
        return M

    def validate(self):
        M = self.matrix()
        par = self.space.parities
        kpar = set()
        for a, b, v in self.entries:
            if M[b][a] != (-1) ** (par[a] * par[b]) * v:
                raise ToyError(f"kernel not graded symmetric at ({a},{b})")
            kpar.add((par[a] + par[b]) & 1)
        if len(kpar) > 1:
            raise ToyError("kernel is not of homogeneous parity")

    @property
    def parity(self) -> int:
        par = self.space.parities
        return (par[self.entries[0][0]] + par[self.entries[0][1]]) & 1 if self.entries else 0

    def __add__(self, other: "Kernel") -> "Kernel":
        A, B = self.matrix(), other.matrix()
        return Kernel.from_matrix(self.space, [[x + y for x, y in zip(r, s)]
                                               for r, s in zip(A, B)])

    def scale(self, c) -> "Kernel":
        return Kernel.from_matrix(self.space, [[Fraction(c) * x for x in r]
                                               for r in self.matrix()])


def _kernel_apply(par, entries, terms: dict) -> dict:
    out: dict = {}
    for a, b, v in entries:
        inner = _deriv(par, b, terms)
        if not inner:
            continue
        outer = _deriv(par, a, inner)
        out = _add(out, outer, v / 2)
    return out


def kernel_contract(P: Kernel, F: Functional) -> Functional:
    """d_P F = 1/2 P^{ab} d_a d_b F."""
    if P.space != F.space:
        raise ToyError("kernel and functional live on different spaces")
    return F._wrap(_kernel_apply(F.par, P.entries, F.terms))


def bv_laplacian(K: Kernel, F: Functional) -> Functional:
    """Delta_K = 1/2 K^{ab} d_a d_b for an odd kernel K."""
    if K.entries and K.parity != 1:
        raise ToyError("the BV kernel must be odd")
    return kernel_contract(K, F)


def bv_bracket(K: Kernel, F: Functional, G: Functional) -> Functional:
    """{F,G} = Delta(FG) - Delta(F) G - (-1)^{|F|} F Delta(G), extended bilinearly."""
    total = Functional(F.space)
    for pf, Fp in zip((0, 1), F.parity_parts()):
        if Fp.is_zero():
            continue
        d = bv_laplacian(K, Fp * G) - bv_laplacian(K, Fp) * G
        d = d - (Fp * bv_laplacian(K, G)).scale(-1 if pf else 1)
        total = total + d
    return total


# ---------------------------------------------------------------------------
# odd operators on the toy space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearOperator:
    """Q(x^a) = sum_b Q[a][b] x^b, extended to functionals as a derivation."""

    space: ToySpace
    matrix: tuple

    def __post_init__(self):
        N = self.space.dim
        if len(self.matrix) != N or any(len(r) != N for r in self.matrix):
            raise ToyError("Q must be an N x N matrix")
        par = self.space.parities
        for a in range(N):
            for b in range(N):
                if Fraction(self.matrix[a][b]) and par[a] == par[b]:
                    raise ToyError(f"Q is not parity-odd: entry ({a},{b}) joins equal parities")

    def on_generator(self, a: int) -> dict:
        return {(0, (b,)): Fraction(v) for b, v in enumerate(self.matrix[a]) if Fraction(v)}

    def apply(self, F: Functional) -> Functional:
        out: dict = {}
        for a in range(self.space.dim):
            q = self.on_generator(a)
            if not q:
                continue
            d = _deriv(F.par, a, F.terms)
            if d:
                out = _add(out, _mul(F.par, q, d))
        return F._wrap(out)


def commutator_kernel(Q: LinearOperator, P: Kernel) -> Kernel:
    """The kernel Q.P with d_{Q.P} = [Q, d_P] = Q d_P - d_P Q (P even, Q odd).

    [Q, d_P] is a constant-coefficient second-order operator; its kernel is read
    off from its action on quadratic monomials.
    """
    sp = Q.space
    N = sp.dim
    M = [[Fraction(0)] * N for _ in range(N)]
    for a in range(N):
        for b in range(a, N):
            if sp.parities[a] and a == b:
                continue
            F = Functional(sp, {(0, (a, b)): 1})
            val = Q.apply(kernel_contract(P, F)) - kernel_contract(P, Q.apply(F))
            c = val.terms.get((0, ()), Fraction(0))
            # d_K(x^a x^b) = (-1)^{|a||b|} K^{ab} for a < b, and K^{aa} for a == b
            sign = (-1) ** (sp.parities[a] * sp.parities[b])
            M[a][b] = c * sign if a < b else c
            M[b][a] = sign * M[a][b]
    return Kernel.from_matrix(sp, M)


# ---------------------------------------------------------------------------
# weight-filtered exponential and logarithm
# ---------------------------------------------------------------------------

def _weight(h, d):
    return 2 * h + d


def _exp_trunc(par, A: dict, K: int) -> dict:
    """exp(A) truncated at filtration weight K; A must have weight >= 1."""
    keep = lambda h, d: _weight(h, d) <= K
    out = {(0, ()): Fraction(1)}
    power = {(0, ()): Fraction(1)}
    for k in range(1, K + 1):
        power = _mul(par, power, A, keep)
        power = {key: v / k for key, v in power.items()}
        if not power:
            break
        out = _add(out, power)
    return out


def _log_trunc(par, Y: dict, K: int) -> dict:
    """log(Y) for Y = 1 + Z with Z of weight >= 1, truncated at weight K."""
    keep = lambda h, d: _weight(h, d) <= K
    Z = dict(Y)
    if Z.get((0, ()), 0) != 1:
        raise ToyError("logarithm needs constant term 1")
    del Z[(0, ())]
    out: dict = {}
    power = {(0, ()): Fraction(1)}
    for k in range(1, K + 1):
        power = _mul(par, power, Z, keep)
        if not power:
            break
        out = _add(out, power, Fraction((-1) ** (k + 1), k))
    return out


def _exp_hbar_dP(par, entries, A: dict) -> dict:
    """exp(hbar d_P) A, which terminates because d_P lowers degree by two."""
    out = dict(A)
    cur = dict(A)
    j = 1
    while cur:
        cur = _kernel_apply(par, entries, cur)
        cur = {(h + 1, m): v / j for (h, m), v in cur.items()}
        out = _add(out, cur)
        j += 1
    return out


def _check_interaction(I: Functional):
    for h, m in I.terms:
        if h < 0:
            raise ToyError("interaction has a negative hbar power")
        if 2 * h - 2 + len(m) <= 0:
            raise ToyError(f"interaction term hbar^{h} of degree {len(m)} is unstable "
                           "(need 2g - 2 + n > 0)")
        if _parity_of(I.par, m):
            raise ToyError("interaction must be even")


def _truncation(hbar_cutoff: int, degree_cutoff: int):
    if not 0 <= hbar_cutoff <= MAX_HBAR:
        raise ToyError(f"hbar cutoff must lie in 0..{MAX_HBAR}")
    if degree_cutoff < 0:
        raise ToyError("degree cutoff must be nonnegative")
    return 2 * hbar_cutoff - 2 + degree_cutoff


def truncate_stable(F: Functional, hbar_cutoff: int, degree_cutoff: int) -> Functional:
    """Keep hbar^g x^m with g <= hbar_cutoff and 2g - 2 + m <= 2 hbar_cutoff - 2 + degree_cutoff."""
    K = _truncation(hbar_cutoff, degree_cutoff)
    return F.filter(lambda h, d: h <= hbar_cutoff and 2 * h - 2 + d <= K)


def rg_flow(P: Kernel, I: Functional, hbar_cutoff: int, degree_cutoff: int = 4,
            method: str = "exp") -> Functional:
    """W(P, I) = hbar log(exp(hbar d_P) exp(I/hbar)).

    Truncation keeps genus g <= hbar_cutoff and stable weight 2g - 2 + m up to
    2*hbar_cutoff - 2 + degree_cutoff; this truncation is closed under
    composition, so it is compatible with the semigroup law.  ``method``
    selects the exponential expansion ("exp") or the stable-graph sum
    ("graphs").
    """
    if P.space != I.space:
        raise ToyError("kernel and functional live on different spaces")
    if P.entries and P.parity != 0:
        raise ToyError("the propagator must be even")
    _check_interaction(I)
    K = _truncation(hbar_cutoff, degree_cutoff)
    I = truncate_stable(I, hbar_cutoff, degree_cutoff)
    if method == "exp":
        W = _rg_flow_exp(P, I, K)
    elif method == "graphs":
        W = _rg_flow_graphs(P, I, hbar_cutoff, K)
    else:
        raise ToyError(f"unknown method {method!r}")
    return truncate_stable(W, hbar_cutoff, degree_cutoff)


def _rg_flow_exp(P: Kernel, I: Functional, K: int) -> Functional:
    par = I.par
    A = {(h - 1, m): c for (h, m), c in I.terms.items()}
    E = _exp_trunc(par, A, K)
    Y = _exp_hbar_dP(par, P.entries, E)
    L = _log_trunc(par, Y, K)
    W = {(h + 1, m): c for (h, m), c in L.items()}
    if any(h < 0 for h, _ in W):
        raise ToyError("negative hbar power survived the logarithm")  # pragma: no cover
    return Functional(I.space, W)


# -- graph sum --------------------------------------------------------------

def _vertex_types(I: Functional, K: int):
    """(genus, valency) pairs present in I with their stable weight."""
    return [(h, d) for h, d in I.support() if 2 * h - 2 + d <= K]


def _multisets_of_types(types, K):
    """Multisets of vertex types whose stable weights add up to at most K."""
    weights = [2 * g - 2 + n for g, n in types]
    out = []

    def rec(i, left, chosen):
        if i == len(types):
            if chosen:
                out.append(list(chosen))
            return
        w = weights[i]
        for c in range(left // w + 1):
            rec(i + 1, left - c * w, chosen + [types[i]] * c)

    rec(0, K, [])
    return out


def _sorted_sign(par_ext, seq):
    """Sort a sequence of variables, returning (sign, sorted tuple); 0 if an odd one repeats."""
    odd = [v for v in seq if par_ext[v]]
    if len(set(odd)) != len(odd):
        return 0, None
    inv = sum(1 for i in range(len(odd)) for j in range(i + 1, len(odd)) if odd[i] > odd[j])
    return (-1 if inv & 1 else 1), tuple(sorted(seq))


def _polarize(par_ext, N, I_piece: dict, half_edges: Sequence, base: int) -> dict:
    """Multilinear part of I(sum_h y_h) in the copies y_h (copy of x^a is base + h*N + a).

    Returns a map monomial -> coefficient; the hbar power of the piece is
    handled by the caller.
    """
    out: dict = {}
    n = len(half_edges)
    for (_, m), c in I_piece.items():
        for assign in itertools.permutations(half_edges, n):
            sign, mono = _sorted_sign(par_ext, [base + he * N + a for a, he in zip(m, assign)])
            if sign:
                out[mono] = out.get(mono, 0) + sign * c
    return {k: v for k, v in out.items() if v}


def _remove_block(par_ext, mono, lo, hi):
    """Left-derive by the unique variable of ``mono`` in [lo, hi); returns (var, sign, rest)."""
    odd_before = 0
    for pos, var in enumerate(mono):
        if lo <= var < hi:
            sign = -1 if (par_ext[var] and odd_before & 1) else 1
            return var, sign, mono[:pos] + mono[pos + 1:]
        if par_ext[var]:
            odd_before += 1
    raise ToyError("half-edge variable missing from a polarized monomial")  # pragma: no cover


def _merge_order(graph) -> list:
    """Vertex order that closes edges early, keeping intermediate products small."""
    M = graph.multiplicity_matrix()
    left = set(range(graph.num_vertices))
    order: list = []
    while left:
        v = max(sorted(left), key=lambda u: (sum(M[u][w] for w in order), -u))
        order.append(v)
        left.remove(v)
    return order


def _integral(coeffs) -> int:
    """Least common denominator of a collection of fractions."""
    den = 1
    for c in coeffs:
        den = den * Fraction(c).denominator // math.gcd(den, Fraction(c).denominator)
    return den


def feynman_weight(P: Kernel, I: Functional, graph) -> Functional:
    """Contraction of the polarized vertex functionals of I along the edges of ``graph``.

    Each edge (h, s) acts by P^{ab} d_{y_h^a} d_{y_s^b}; afterwards the tail
    copies are set back to x.  The hbar power is the sum of the vertex genera;
    no 1/|Aut| factor is applied.  Arithmetic runs over integers after
    clearing denominators.
    """
    sp = I.space
    N = sp.dim
    base = N
    nh = graph.num_half_edges
    par_ext = list(sp.parities) + [sp.parities[a] for _ in range(nh) for a in range(N)]
    Pm = P.matrix()
    p_den = _integral(x for row in Pm for x in row)
    Pint = [[int(x * p_den) for x in row] for row in Pm]
    scale = p_den ** len(graph.edges())
    vals = graph.valencies()
    at = [graph.half_edges_at(v) for v in range(graph.num_vertices)]
    present = set()
    F = {(): 1}
    pending = graph.edges()
    for v in _merge_order(graph):
        piece = I.homogeneous(graph.genera[v], vals[v]).terms
        den = _integral(piece.values())
        scale *= den
        pol = _polarize(par_ext, N, {k: c * den for k, c in piece.items()}, at[v], base)
        new: dict = {}
        for m1, c1 in F.items():
            for m2, c2 in pol.items():
                sg, m = _sorted_sign(par_ext, m1 + m2)
                if sg:
                    new[m] = new.get(m, 0) + sg * c1 * int(c2)
        F = {m: c for m, c in new.items() if c}
        if not F:
            return Functional(sp)
        present.add(v)
        rest = []
        for h, s in pending:
            if graph.incidence[h] not in present or graph.incidence[s] not in present:
                rest.append((h, s))
                continue
            new = {}
            for mono, c in F.items():
                vs, s1, m1 = _remove_block(par_ext, mono, base + s * N, base + s * N + N)
                vh, s2, m2 = _remove_block(par_ext, m1, base + h * N, base + h * N + N)
                w = Pint[(vh - base) % N][(vs - base) % N]
                if w:
                    new[m2] = new.get(m2, 0) + s1 * s2 * w * c
            F = {m: c for m, c in new.items() if c}
            if not F:
                return Functional(sp)
        pending = rest
    hb = sum(graph.genera)
    out: dict = {}
    for mono, c in F.items():
        sign, m = _sorted_sign(par_ext, [(var - base) % N for var in mono])
        if sign:
            out[(hb, m)] = out.get((hb, m), 0) + sign * c
    return Functional(sp, {k: Fraction(c, scale) for k, c in out.items()})


def _rg_flow_graphs(P: Kernel, I: Functional, H: int, K: int) -> Functional:
    total: dict = {}
    for combo in _multisets_of_types(_vertex_types(I, K), K):
        genera = [g for g, _ in combo]
        vals = [n for _, n in combo]
        V = len(combo)
        chi = sum(2 * g - 2 + n for g, n in combo)
        for T in range(sum(vals) % 2, sum(vals) + 1, 2):
            E = (sum(vals) - T) // 2
            g = E - V + 1 + sum(genera)
            if g < 0 or g > H or 2 * g - 2 + T != chi:
                continue
            for cls in enumerate_graphs(vals, T, genera=genera, connected=True,
                                        allow_loops=True):
                w = feynman_weight(P, I, cls.graph)
                shift = g - sum(genera)
                for (h, m), c in w.terms.items():
                    key = (h + shift, m)
                    total[key] = total.get(key, 0) + c / cls.aut
    return Functional(I.space, total)


# ---------------------------------------------------------------------------
# master equation
# ---------------------------------------------------------------------------

def qme_residual(Q: LinearOperator, I: Functional, K: Kernel, curving: Functional,
                 hbar_cutoff: int | None = None) -> Functional:
    """Q(I) + 1/2 {I, I} + hbar Delta I + curving, optionally truncated in hbar."""
    if I.parity_parts()[1].terms:
        raise ToyError("interaction must be even")
    res = Q.apply(I) + bv_bracket(K, I, I).scale(Fraction(1, 2)) \
        + bv_laplacian(K, I).shift_hbar(1) + curving
    if hbar_cutoff is not None:
        res = res.filter(lambda h, d: h <= hbar_cutoff)
    return res


def qme_residual_conjugated(Q: LinearOperator, I: Functional, K: Kernel,
                            curving: Functional, weight_cutoff: int) -> Functional:
    """hbar exp(-I/hbar) (Q + hbar Delta + curving/hbar) exp(I/hbar), weight-truncated."""
    par = I.par
    A = {(h - 1, m): c for (h, m), c in I.terms.items()}
    K_ = weight_cutoff
    E = Functional(I.space, _exp_trunc(par, A, K_ + 2))
    Einv = Functional(I.space, _exp_trunc(par, {k: -v for k, v in A.items()}, K_ + 2))
    op = Q.apply(E) + bv_laplacian(K, E).shift_hbar(1) + (curving * E).shift_hbar(-1)
    out = (Einv * op).shift_hbar(1)
    return out.filter(lambda h, d: _weight(h - 1, d) <= K_)


def exp_hbar_dP(P: Kernel, F: Functional) -> Functional:
    return F._wrap(_exp_hbar_dP(F.par, P.entries, F.terms))


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------

@dataclass
class ToyFixture:
    space: ToySpace
    interaction: Functional
    propagator: Kernel
    bv_kernel: Kernel | None = None
    Q: LinearOperator | None = None
    curving: Functional | None = None
    degree_cutoff: int = 4
    extra: dict = field(default_factory=dict)


def _functional_from_json(space, items) -> Functional:
    from .weight_system import parse_rational
    return Functional.from_terms(space, [(parse_rational(t["coeff"]), int(t.get("hbar", 0)),
                                          [int(a) for a in t["mono"]]) for t in items])


def fixture_from_json(data: dict) -> ToyFixture:
    from .weight_system import parse_rational
    try:
        gens = data["generators"]
        names = tuple(g["name"] for g in gens)
        pars = tuple(int(g["parity"]) for g in gens)
        pairing = tuple(tuple(parse_rational(x) for x in r) for r in data.get("pairing", []))
        space = ToySpace(names, pars, pairing)
        I = _functional_from_json(space, data["interaction"])
        P = Kernel.from_matrix(space, [[parse_rational(x) for x in r]
                                       for r in data["propagator"]])
        K = Kernel.from_matrix(space, [[parse_rational(x) for x in r]
                                       for r in data["bv_kernel"]]) if "bv_kernel" in data else None
        Q = LinearOperator(space, tuple(tuple(parse_rational(x) for x in r)
                                        for r in data["Q"])) if "Q" in data else None
        curving = _functional_from_json(space, data["curving"]) if "curving" in data else None
        deg = int(data.get("degree_cutoff", 4))
    except (KeyError, TypeError) as exc:
        raise ToyError(f"malformed fixture: missing or bad field {exc}") from None
    return ToyFixture(space, I, P, K, Q, curving, deg)


def load_fixture(path) -> ToyFixture:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ToyError(f"{path}: invalid JSON ({exc})") from None
    return fixture_from_json(data)


def rg_check(fix: ToyFixture, hbar_cutoff: int) -> dict:
    """Residual sizes (term counts) for the toy identities on a fixture."""
    P, I = fix.propagator, fix.interaction
    W_exp = rg_flow(P, I, hbar_cutoff, fix.degree_cutoff, "exp")
    W_graph = rg_flow(P, I, hbar_cutoff, fix.degree_cutoff, "graphs")
    half = P.scale(Fraction(1, 2))
    W_two = rg_flow(half, rg_flow(half, I, hbar_cutoff, fix.degree_cutoff),
                    hbar_cutoff, fix.degree_cutoff)
    report = {
        "graphs_vs_exponential": len((W_exp - W_graph).terms),
        "semigroup_half_half": len((W_exp - W_two).terms),
    }
    if fix.bv_kernel is not None:
        sample = I + Functional(fix.space, {(0, tuple(range(min(2, fix.space.dim)))): 1})
        report["laplacian_squared"] = len(
            bv_laplacian(fix.bv_kernel, bv_laplacian(fix.bv_kernel, sample)).terms)
        if fix.Q is not None:
            curv = fix.curving or Functional(fix.space)
            r1 = qme_residual(fix.Q, I, fix.bv_kernel, curv)
            wmax = max((2 * h + d for h, d in r1.support()), default=0)
            r2 = qme_residual_conjugated(fix.Q, I, fix.bv_kernel, curv, wmax)
            report["qme_forms_agree"] = len((r1.filter(lambda h, d: 2 * h - 2 + d <= wmax)
                                             - r2).terms)
    return report
