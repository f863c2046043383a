"""Exact graded Weyl algebra at a single fiber of the holomorphic Weyl bundle.

Elements are truncated formal series in commuting fiber generators
delta^1..delta^{2n}, anticommuting form generators dz^i and dzbar^i, and a
formal parameter hbar.  The fiber generators carry weight 1 and hbar carries
weight 2; everything is truncated eagerly at a fixed total weight.

Form generators share one index space so that a single sorted tuple encodes
a wedge monomial: dz^i has slot i and dzbar^i has slot 2n + i (0-based).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

Key = tuple  # (fiber exponents, sorted form slots, hbar power)


class WeylError(ValueError):
    pass


def standard_omega(n: int) -> tuple:
    """Darboux form with omega_{i, i+n} = 1 (so omega_12 = 1 when n = 1)."""
    m = 2 * n
    rows = [[Fraction(0)] * m for _ in range(m)]
    for i in range(n):
        rows[i][i + n] = Fraction(1)
        rows[i + n][i] = Fraction(-1)
    return tuple(tuple(r) for r in rows)


def invert_matrix(mat) -> tuple:
    """Exact Gauss-Jordan inverse over the rationals."""
    m = len(mat)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(m)]
           for i, row in enumerate(mat)]
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r][col] != 0), None)
        if piv is None:
            raise WeylError("matrix is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return tuple(tuple(row[m:]) for row in aug)


def merge_sign(left: tuple, right: tuple):
    """Wedge two sorted slot tuples; returns (sign, merged) or (0, None)."""
    if not left:
        return 1, right
    if not right:
        return 1, left
    if set(left) & set(right):
        return 0, None
    # each pair (a in left, b in right) with a > b costs one transposition
    swaps = 0
    j = 0
    for a in left:
        while j < len(right) and right[j] < a:
            j += 1
        swaps += j
    return (-1 if swaps & 1 else 1), tuple(sorted(left + right))


@lru_cache(maxsize=200_000)
def _fiber_expansion(ea: tuple, eb: tuple, winv: tuple) -> tuple:
    """All (exponent, k, coeff) produced by sum_k P^k/k! on delta^ea (x) delta^eb.

    P = sum omega^{ij} d_i (x) d_j acts on a pair of monomials; the k-th power
    carries hbar^k.
    """
    m = len(ea)
    out: dict = {}
    pairs = {(ea, eb): Fraction(1)}
    k = 0
    while pairs:
        fact = math.factorial(k)
        for (x, y), c in pairs.items():
            e = tuple(p + q for p, q in zip(x, y))
            out[(e, k)] = out.get((e, k), 0) + c / fact
        k += 1
        nxt: dict = {}
        for (x, y), c in pairs.items():
            for i in range(m):
                if not x[i]:
                    continue
                xi = x[:i] + (x[i] - 1,) + x[i + 1:]
                for j in range(m):
                    w = winv[i][j]
                    if not y[j] or not w:
                        continue
                    yj = y[:j] + (y[j] - 1,) + y[j + 1:]
                    key = (xi, yj)
                    nxt[key] = nxt.get(key, 0) + c * x[i] * y[j] * w
        pairs = {k2: v for k2, v in nxt.items() if v}
    return tuple((e, kk, c) for (e, kk), c in out.items() if c)


class WeylElement:
    """A truncated element of the fiber Weyl algebra with exact coefficients."""

    __slots__ = ("n", "cutoff", "omega", "terms", "_winv")

    def __init__(self, n: int, cutoff: int, terms: Mapping | None = None,
                 omega=None):
        if n < 0 or cutoff < 0:
            raise WeylError("n and cutoff must be nonnegative")
        self.n = n
        self.cutoff = cutoff
        self.omega = tuple(tuple(Fraction(x) for x in r) for r in omega) \
            if omega is not None else standard_omega(n)
        self._winv = None
        clean = {}
        if terms:
            for key, c in terms.items():
                c = Fraction(c)
                if c and self.key_weight(key) <= cutoff:
                    clean[key] = c
        self.terms = clean

    # -- construction -------------------------------------------------------
    @classmethod
    def zero(cls, n, cutoff, omega=None):
        return cls(n, cutoff, {}, omega)

    @classmethod
    def one(cls, n, cutoff, omega=None):
        return cls.monomial(n, cutoff, 1, omega=omega)

    @classmethod
    def monomial(cls, n, cutoff, coeff=1, fiber=None, dz=(), dzbar=(), hbar=0,
                 omega=None):
        """Build coeff * hbar^k * delta^fiber * dz^{i..} dzbar^{j..} (0-based).

        Form indices are taken in the order given; the Koszul sign of sorting
        them is absorbed into the coefficient.
        """
        fiber = tuple(fiber) if fiber is not None else (0,) * (2 * n)
        if len(fiber) != 2 * n:
            raise WeylError("fiber exponent vector must have length 2n")
        slots = [i for i in dz] + [2 * n + j for j in dzbar]
        if any(not 0 <= s < 4 * n for s in slots):
            raise WeylError("form index out of range")
        sign, form = 1, ()
        for s in slots:
            sg, form = merge_sign(form, (s,))
            if not sg:
                return cls.zero(n, cutoff, omega)
            sign *= sg
        return cls(n, cutoff, {(fiber, form, hbar): sign * Fraction(coeff)}, omega)

    @classmethod
    def generator(cls, n, cutoff, i, omega=None):
        e = [0] * (2 * n)
        e[i] = 1
        return cls.monomial(n, cutoff, 1, fiber=e, omega=omega)

    def _new(self, terms, cutoff=None):
        return WeylElement(self.n, self.cutoff if cutoff is None else cutoff,
                           terms, self.omega)

    def with_cutoff(self, cutoff: int) -> "WeylElement":
        return self._new(self.terms, cutoff)

    # -- gradings -----------------------------------------------------------
    @staticmethod
    def key_weight(key) -> int:
        return sum(key[0]) + 2 * key[2]

    def hol_degree(self, key) -> int:
        return sum(1 for s in key[1] if s < 2 * self.n)

    def weight_part(self, w: int) -> "WeylElement":
        return self._new({k: c for k, c in self.terms.items()
                          if self.key_weight(k) == w})

    def hbar_part(self, h: int) -> "WeylElement":
        return self._new({k: c for k, c in self.terms.items() if k[2] == h})

    def filter(self, pred) -> "WeylElement":
        return self._new({k: c for k, c in self.terms.items() if pred(k)})

    @property
    def winv(self):
        if self._winv is None:
            self._winv = invert_matrix(self.omega)
        return self._winv

    def is_zero(self) -> bool:
        return not self.terms

    def min_weight(self):
        return min((self.key_weight(k) for k in self.terms), default=None)

    # -- linear structure ---------------------------------------------------
    def _check(self, other: "WeylElement"):
        if self.n != other.n:
            raise WeylError(f"dimension mismatch: n={self.n} vs n={other.n}")
        if self.cutoff != other.cutoff:
            raise WeylError(f"cutoff mismatch: {self.cutoff} vs {other.cutoff}")
        if self.omega != other.omega:
            raise WeylError("symplectic form mismatch")

    def __add__(self, other):
        self._check(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return self._new(out)

    def __neg__(self):
        return self._new({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "WeylElement":
        c = Fraction(c)
        return self._new({k: c * v for k, v in self.terms.items()})

    def __rmul__(self, c):
        return self.scale(c)

    def __mul__(self, other):
        if isinstance(other, WeylElement):
            return weyl_product(self, other)
        return self.scale(other)

    def __eq__(self, other):
        if not isinstance(other, WeylElement):
            return NotImplemented
        return (self.n, self.cutoff, self.omega, self.terms) == \
            (other.n, other.cutoff, other.omega, other.terms)

    def __hash__(self):
        return hash((self.n, self.cutoff, frozenset(self.terms.items())))

    def times_hbar(self, k: int = 1) -> "WeylElement":
        return self._new({(e, f, h + k): c for (e, f, h), c in self.terms.items()})

    def div_hbar(self) -> "WeylElement":
        """Divide by hbar; raises if an hbar^0 term is present."""
        out = {}
        for (e, f, h), c in self.terms.items():
            if h == 0:
                raise WeylError("division by hbar of an element with hbar^0 terms")
            out[(e, f, h - 1)] = c
        return self._new(out)

    def parity_parts(self):
        even = self.filter(lambda k: len(k[1]) % 2 == 0)
        odd = self.filter(lambda k: len(k[1]) % 2 == 1)
        return even, odd

    # -- text format --------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"# weyl n={self.n} cutoff={self.cutoff}"]
        if self.omega != standard_omega(self.n):
            lines.append("# omega " + ";".join(",".join(str(x) for x in r)
                                              for r in self.omega))
        two_n = 2 * self.n
        for (e, f, h), c in sorted(self.terms.items()):
            dz = [s + 1 for s in f if s < two_n]
            dzb = [s - two_n + 1 for s in f if s >= two_n]
            lines.append(f"coeff({c}) hbar^{h} delta[{','.join(map(str, e))}] "
                         f"dz[{','.join(map(str, dz))}] dzbar[{','.join(map(str, dzb))}]")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n: int | None = None, cutoff: int | None = None):
        omega = None
        rows = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            m = re.match(r"#\s*weyl\s+n=(\d+)\s+cutoff=(\d+)", line)
            if m:
                n = int(m.group(1)) if n is None else n
                cutoff = int(m.group(2)) if cutoff is None else cutoff
                continue
            if line.startswith("# omega"):
                omega = [[Fraction(x) for x in r.split(",")]
                         for r in line[len("# omega"):].strip().split(";")]
                continue
            if line.startswith("#"):
                continue
            rows.append(parse_term_line(line))
        if n is None or cutoff is None:
            raise WeylError("missing n/cutoff header")
        out = cls.zero(n, cutoff, omega)
        for c, h, e, dz, dzb in rows:
            if len(e) != 2 * n:
                raise WeylError(f"fiber exponent vector {e} has wrong length for n={n}")
            out = out + cls.monomial(n, cutoff, c, e, [i - 1 for i in dz],
                                     [j - 1 for j in dzb], h, omega)
        return out

    def __repr__(self):
        if not self.terms:
            return f"WeylElement(n={self.n}, cutoff={self.cutoff}, 0)"
        return f"WeylElement(n={self.n}, cutoff={self.cutoff}, {len(self.terms)} terms)"

    def __str__(self):
        return self.to_text()


_TERM_RE = re.compile(
    r"coeff\(\s*([-+]?\d+(?:/\d+)?)\s*\)\s*hbar\^(\d+)\s*delta\[([\d,\s]*)\]"
    r"\s*dz\[([\d,\s]*)\]\s*dzbar\[([\d,\s]*)\]")


def _ints(s: str) -> list:
    return [int(x) for x in s.replace(" ", "").split(",") if x]


def parse_term_line(line: str):
    m = _TERM_RE.fullmatch(line.strip())
    if not m:
        raise WeylError(f"cannot parse term line: {line!r}")
    return (Fraction(m.group(1)), int(m.group(2)), tuple(_ints(m.group(3))),
            _ints(m.group(4)), _ints(m.group(5)))


# ---------------------------------------------------------------------------
# product and bracket
# ---------------------------------------------------------------------------

def weyl_product(a: WeylElement, b: WeylElement, cutoff: int | None = None) -> WeylElement:
    """Quantum product sum_k hbar^k/k! omega^{i1j1}..omega^{ikjk} d^k a d^k b.

    The k = 0 term is the plain graded-commutative product.  Every summand
    has the same total weight as the input pair, so truncation is exact.
    """
    a._check(b)
    cut = a.cutoff if cutoff is None else cutoff
    winv = a.winv
    out: dict = {}
    bt = list(b.terms.items())
    for (ea, fa, ha), ca in a.terms.items():
        wa = sum(ea) + 2 * ha
        for (eb, fb, hb), cb in bt:
            if wa + sum(eb) + 2 * hb > cut:
                continue
            sign, form = merge_sign(fa, fb)
            if not sign:
                continue
            c0 = ca * cb * sign
            for e, k, c in _fiber_expansion(ea, eb, winv):
                key = (e, form, ha + hb + k)
                out[key] = out.get(key, 0) + c0 * c
    return WeylElement(a.n, cut, out, a.omega)


def weyl_bracket(a: WeylElement, b: WeylElement, cutoff: int | None = None) -> WeylElement:
    """Graded commutator a.b - (-1)^{|a||b|} b.a, parity = form degree mod 2."""
    a._check(b)
    cut = a.cutoff if cutoff is None else cutoff
    total = WeylElement.zero(a.n, cut, a.omega)
    for pa, xa in zip((0, 1), a.parity_parts()):
        for pb, xb in zip((0, 1), b.parity_parts()):
            if xa.is_zero() or xb.is_zero():
                continue
            ab = weyl_product(xa, xb, cut)
            ba = weyl_product(xb, xa, cut)
            total = total + (ab - ba if not (pa and pb) else ab + ba)
    return total


# ---------------------------------------------------------------------------
# Koszul operators
# ---------------------------------------------------------------------------

def op_delta(a: WeylElement) -> WeylElement:
    """delta(a) = dz^i wedge d a / d delta^i."""
    out: dict = {}
    for (e, f, h), c in a.terms.items():
        for i, ei in enumerate(e):
            if not ei:
                continue
            sign, form = merge_sign((i,), f)
            if not sign:
                continue
            key = (e[:i] + (ei - 1,) + e[i + 1:], form, h)
            out[key] = out.get(key, 0) + sign * ei * c
    return a._new(out)


def _delta_star_term(n, e, f, h, c, out, scale=1):
    for pos, s in enumerate(f):
        if s >= 2 * n:
            break  # holomorphic slots precede antiholomorphic ones
        sign = -1 if pos & 1 else 1
        key = (e[:s] + (e[s] + 1,) + e[s + 1:], f[:pos] + f[pos + 1:], h)
        out[key] = out.get(key, 0) + sign * c * scale


def op_delta_star(a: WeylElement) -> WeylElement:
    """delta*(a) = delta^i . iota_{d/dz^i}(a), contraction from the left."""
    out: dict = {}
    for (e, f, h), c in a.terms.items():
        _delta_star_term(a.n, e, f, h, c, out)
    return a._new(out)


def op_delta_inverse(a: WeylElement) -> WeylElement:
    """delta^{-1} = delta*/(p + r) on the component with hol. degree p, fiber degree r."""
    out: dict = {}
    for (e, f, h), c in a.terms.items():
        pr = a.hol_degree((e, f, h)) + sum(e)
        if pr:
            _delta_star_term(a.n, e, f, h, c, out, Fraction(1, pr))
    return a._new(out)


def project_pi0(a: WeylElement) -> WeylElement:
    """Keep terms with no fiber generator and no holomorphic form."""
    return a.filter(lambda k: sum(k[0]) == 0 and a.hol_degree(k) == 0)


# ---------------------------------------------------------------------------
# connection data
# ---------------------------------------------------------------------------

@dataclass
class ConnectionData:
    """Curvature R and optional Christoffel coefficients at one frozen fiber.

    ``christoffels`` maps ordered triples (i, j, k) to Gamma_{ijk}; the tensor
    must be totally symmetric (the symplectic-connection condition).  The
    covariant derivative is (1/2hbar)[Gamma~, -] with
    Gamma~ = 1/2 Gamma_{ijk} dz^i delta^j delta^k, which acts on generators as
    nabla delta^m = Gamma_{ijk} omega^{km} dz^i delta^j.
    """

    n: int
    R: WeylElement
    christoffels: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.R.n != self.n:
            raise WeylError("curvature dimension does not match n")
        self.christoffels = {tuple(k): Fraction(v)
                             for k, v in self.christoffels.items() if Fraction(v)}
        for key, v in self.christoffels.items():
            if len(key) != 3 or any(not 0 <= i < 2 * self.n for i in key):
                raise WeylError(f"bad christoffel index {key}")
            for perm in _perms3(key):
                if self.christoffels.get(perm, 0) != v:
                    raise WeylError(f"christoffel symbol not totally symmetric at {key}")

    def connection_form(self, cutoff: int) -> WeylElement:
        out = WeylElement.zero(self.n, cutoff, self.R.omega)
        for (i, j, k), v in self.christoffels.items():
            e = [0] * (2 * self.n)
            e[j] += 1
            e[k] += 1
            out = out + WeylElement.monomial(self.n, cutoff, v / 2, e, dz=[i],
                                             omega=self.R.omega)
        return out

    def validate(self) -> None:
        """Reject curvature that is not a closed 2-form of fiber weight 2."""
        for (e, f, h), c in self.R.terms.items():
            if len(f) != 2 or sum(e) != 2 or h != 0:
                raise WeylError("curvature terms must have form degree 2, "
                                f"fiber degree 2 and no hbar; got key {(e, f, h)}")
        if not op_delta(self.R.with_cutoff(max(self.R.cutoff, 2))).is_zero():
            raise WeylError("curvature violates delta(R) = 0")

    def to_text(self) -> str:
        lines = [self.R.to_text().rstrip("\n")]
        for (i, j, k), v in sorted(self.christoffels.items()):
            lines.append(f"christoffel[{i + 1},{j + 1},{k + 1}] = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, cutoff: int | None = None) -> "ConnectionData":
        chris = {}
        rest = []
        for line in text.splitlines():
            m = re.match(r"\s*christoffel\[(\d+),(\d+),(\d+)\]\s*=\s*(\S+)", line)
            if m:
                chris[tuple(int(m.group(i)) - 1 for i in (1, 2, 3))] = Fraction(m.group(4))
            else:
                rest.append(line)
        R = WeylElement.from_text("\n".join(rest), cutoff=cutoff)
        return cls(R.n, R, chris)


def _perms3(t):
    i, j, k = t
    return {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}


def covariant_derivative(a: WeylElement, conn: ConnectionData,
                         cutoff: int | None = None) -> WeylElement:
    """nabla a = (1/2hbar)[Gamma~, a]; identically zero when christoffels vanish."""
    if conn.n != a.n:
        raise WeylError(f"dimension mismatch: connection n={conn.n}, element n={a.n}")
    cut = a.cutoff if cutoff is None else cutoff
    if not conn.christoffels:
        return WeylElement.zero(a.n, cut, a.omega)
    gam = conn.connection_form(cut + 2)
    br = weyl_bracket(gam, a.with_cutoff(cut + 2))
    return br.div_hbar().scale(Fraction(1, 2)).with_cutoff(cut)


def curvature_of_connection(conn: ConnectionData, cutoff: int) -> WeylElement:
    """The element R_nabla with nabla^2 = (1/hbar)[R_nabla, -].

    Gamma~ . Gamma~ = hbar C1 + hbar^2 C2 with C2 central, so R_nabla = C1/4.
    """
    gam = conn.connection_form(cutoff + 2)
    sq = weyl_product(gam, gam)
    return sq.hbar_part(1).div_hbar().scale(Fraction(1, 4)).with_cutoff(cutoff)


# ---------------------------------------------------------------------------
# Fedosov recursion
# ---------------------------------------------------------------------------

def _quantum_square(I: WeylElement, cutoff: int) -> WeylElement:
    """(1/hbar) I.I, exact up to ``cutoff``."""
    sq = weyl_product(I.with_cutoff(cutoff + 2), I.with_cutoff(cutoff + 2))
    return sq.div_hbar().with_cutoff(cutoff)


def fedosov_solve(conn: ConnectionData, cutoff: int) -> WeylElement:
    """Solve I = delta^{-1}(R + nabla I) + (1/hbar) delta^{-1}(I.I) by iteration.

    Each pass fixes at least one more weight, so at most ``cutoff`` passes
    are needed; iteration stops when two successive iterates agree.
    """
    if cutoff < 3:
        raise WeylError("cutoff must be at least 3")
    conn.validate()
    n = conn.n
    R = conn.R.with_cutoff(cutoff)
    I = WeylElement.zero(n, cutoff, R.omega)
    for _ in range(cutoff + 1):
        inner = R + covariant_derivative(I, conn, cutoff - 1).with_cutoff(cutoff) \
            + _quantum_square(I, cutoff - 1).with_cutoff(cutoff)
        nxt = op_delta_inverse(inner.with_cutoff(cutoff - 1).with_cutoff(cutoff))
        if nxt == I:
            return I
        I = nxt
    raise WeylError("fixed-point iteration failed to stabilize")  # pragma: no cover


def flatness_residual(I: WeylElement, conn: ConnectionData) -> WeylElement:
    """A = (delta I - R - nabla I - (1/hbar) I.I) modulo hbar.

    delta lowers weight by one, so A is only determined up to weight
    I.cutoff - 1; the result is truncated there.
    """
    w = I.cutoff - 1
    R = conn.R.with_cutoff(w)
    A = op_delta(I).with_cutoff(w) - R - covariant_derivative(I, conn, w) \
        - _quantum_square(I, w)
    return A.hbar_part(0)


def fedosov_differential(alpha: WeylElement, I: WeylElement, conn: ConnectionData,
                         cutoff: int | None = None) -> WeylElement:
    """D alpha = nabla alpha - delta alpha + (1/hbar)[I, alpha], exact to ``cutoff``."""
    cut = (min(alpha.cutoff, I.cutoff) - 1) if cutoff is None else cutoff
    a2 = alpha.with_cutoff(cut + 2)
    br = weyl_bracket(I.with_cutoff(cut + 2), a2).div_hbar().with_cutoff(cut)
    return covariant_derivative(alpha.with_cutoff(cut), conn, cut) \
        - op_delta(alpha.with_cutoff(cut + 1)).with_cutoff(cut) + br


def flat_section_lift(alpha0: WeylElement, I: WeylElement, cutoff: int,
                      conn: ConnectionData | None = None) -> WeylElement:
    """alpha = alpha0 + delta^{-1}(nabla alpha + (1/hbar)[I, alpha]) by iteration."""
    for (e, f, h) in alpha0.terms:
        if sum(e) or alpha0.hol_degree((e, f, h)):
            raise WeylError("alpha0 must lie in the (0,*,0) component")
    if conn is None:
        conn = ConnectionData(I.n, WeylElement.zero(I.n, cutoff, I.omega))
    a0 = alpha0.with_cutoff(cutoff)
    Ic = I.with_cutoff(cutoff + 1)
    alpha = a0
    for _ in range(cutoff + 2):
        br = weyl_bracket(Ic, alpha.with_cutoff(cutoff + 1)).div_hbar()
        inner = covariant_derivative(alpha, conn, cutoff - 1).with_cutoff(cutoff + 1) + br
        nxt = a0 + op_delta_inverse(inner.with_cutoff(cutoff - 1).with_cutoff(cutoff))
        if nxt == alpha:
            return alpha
        alpha = nxt
    raise WeylError("lift iteration failed to stabilize")  # pragma: no cover


# ---------------------------------------------------------------------------
# injectivity of D on sections with vanishing pi_0
# ---------------------------------------------------------------------------

def rank(rows: list) -> int:
    """Exact row rank of a list of {column: Fraction} sparse rows."""
    pivots: dict = {}
    r = 0
    for row in rows:
        row = {k: v for k, v in row.items() if v}
        while row:
            col = min(row)
            if col not in pivots:
                piv = row[col]
                pivots[col] = {k: v / piv for k, v in row.items()}
                r += 1
                break
            prow = pivots[col]
            f = row[col]
            for k, v in prow.items():
                nv = row.get(k, 0) - f * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
    return r


def _basis_p0(n: int, min_r: int, max_r: int) -> Iterable:
    """Monomials delta^e dzbar^J with no holomorphic form and min_r <= |e| <= max_r."""
    from itertools import combinations, combinations_with_replacement
    m = 2 * n
    for r in range(min_r, max_r + 1):
        for combo in combinations_with_replacement(range(m), r):
            e = [0] * m
            for i in combo:
                e[i] += 1
            for q in range(m + 1):
                for J in combinations(range(m), q):
                    yield tuple(e), tuple(2 * n + j for j in J)


def injectivity_stages(I: WeylElement, conn: ConnectionData, max_weight: int) -> list:
    """For each stage w, check that D restricted to sections with no holomorphic
    forms, fiber degree 1..w and no hbar is injective modulo hbar, with output
    truncated at weight w - 1.

    Returns a list of (w, dimension, rank); injectivity means rank == dimension.
    """
    if I.cutoff < max_weight + 1:
        raise WeylError(f"I must be resolved to weight {max_weight + 1}, has cutoff {I.cutoff}")
    out = []
    n = I.n
    for w in range(1, max_weight + 1):
        basis = list(_basis_p0(n, 1, w))
        cols: dict = {}
        rows = []
        for e, f in basis:
            a = WeylElement(n, w, {(e, f, 0): 1}, I.omega)
            Da = fedosov_differential(a, I.with_cutoff(w + 1), conn, w - 1).hbar_part(0)
            row = {}
            for key, c in Da.terms.items():
                col = cols.setdefault(key, len(cols))
                row[col] = c
            rows.append(row)
        out.append((w, len(basis), rank(rows)))
    return out
