"""Leading-order heat-kernel calculus in a flat chart, plus numeric boundary constants.

Terms live on the fiber R^3 with coordinates u^1..u^3 and flat metric.  The
Gaussian factor is e = exp(-||u||^2 / 4t) with ||u||^2 = 4|u|^2, so that

    d/du^i e = -(2 u^i / t) e,        d/dt e = (|u|^2 / t^2) e,

and the flat heat operator is d/dt - (1/4) sum_i d^2/du^i du^i.  Curvature
enters only through abstract antisymmetric 2-form symbols Omega(i, j); two of
them multiply to zero (base form degree would exceed 3).

Degree bookkeeping follows the total grading: t^{1/2} and u^i have degree 1,
||u||^b has degree b, du^i has form degree 1 (r), e and Omega have degree 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

DIM = 3

# key: (a, u, b, gauss, du, omega, pi)
#   a      power of t^{1/2}
#   u      exponent tuple of (u^1, u^2, u^3)
#   b      power of ||u|| (kept only when odd or negative)
#   gauss  1 if the factor e is present
#   du     strictly increasing tuple of du indices
#   omega  () or ((i, j),) with i < j
#   pi     power of (4 pi)^{1/2}
Key = tuple


class HeatError(ValueError):
    pass


def _canon_b(key: Key, coeff: Fraction) -> dict:
    """Expand even nonnegative powers of ||u|| into polynomials in u."""
    a, u, b, g, du, om, pi = key
    if b < 0 or b % 2:
        return {key: coeff}
    out = {(a, u, 0, g, du, om, pi): coeff}
    for _ in range(b // 2):
        nxt: dict = {}
        for (a1, u1, _, g1, du1, om1, pi1), c in out.items():
            for i in range(DIM):
                e = list(u1)
                e[i] += 2
                k = (a1, tuple(e), 0, g1, du1, om1, pi1)
                nxt[k] = nxt.get(k, 0) + 4 * c
        out = nxt
    return out


class TermSum:
    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        clean: dict = {}
        for k, c in (terms or {}).items():
            if c == 0:
                continue
            for k2, c2 in _canon_b(k, Fraction(c)).items():
                clean[k2] = clean.get(k2, 0) + c2
        self.terms = {k: c for k, c in clean.items() if c != 0}

    @classmethod
    def term(cls, coeff=1, *, a=0, u=(0, 0, 0), b=0, gauss=False, du=(),
             omega=None, pi=0) -> "TermSum":
        sign, du_sorted = _sort_forms(list(du))
        if sign == 0:
            return cls()
        om: tuple = ()
        if omega is not None:
            i, j = omega
            if i == j:
                return cls()
            if i > j:
                i, j = j, i
                sign = -sign
            om = ((i, j),)
        key = (a, tuple(u), b, int(gauss), du_sorted, om, pi)
        return cls({key: sign * Fraction(coeff)})

    def __add__(self, other: "TermSum") -> "TermSum":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return TermSum(out)

    def __neg__(self) -> "TermSum":
        return TermSum({k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "TermSum") -> "TermSum":
        return self + (-other)

    def scale(self, c) -> "TermSum":
        c = Fraction(c)
        return TermSum({k: c * v for k, v in self.terms.items()})

    def __mul__(self, other: "TermSum") -> "TermSum":
        out: dict = {}
        for (a1, u1, b1, g1, d1, o1, p1), c1 in self.terms.items():
            for (a2, u2, b2, g2, d2, o2, p2), c2 in other.terms.items():
                if g1 and g2:
                    raise HeatError("product of two Gaussian factors is not supported")
                if len(o1) + len(o2) > 1:
                    continue
                sign, du = _sort_forms(list(d1) + list(d2))
                if sign == 0:
                    continue
                key = (a1 + a2, tuple(x + y for x, y in zip(u1, u2)), b1 + b2,
                       g1 | g2, du, o1 + o2, p1 + p2)
                out[key] = out.get(key, 0) + sign * c1 * c2
        return TermSum(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, TermSum) and self.terms == other.terms

    def __len__(self) -> int:
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __repr__(self) -> str:
        return f"TermSum({self.to_text()})"

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for k in sorted(self.terms):
            a, u, b, g, du, om, pi = k
            bits = [str(self.terms[k])]
            if pi:
                bits.append(f"(4pi)^({pi}/2)")
            if a:
                bits.append(f"t^({a}/2)")
            bits += [f"u{i + 1}^{e}" if e > 1 else f"u{i + 1}" for i, e in enumerate(u) if e]
            if b:
                bits.append(f"|u|^{b}")
            if g:
                bits.append("e")
            bits += [f"Om{om[0][0] + 1}{om[0][1] + 1}"] if om else []
            bits += [f"du{i + 1}" for i in du]
            parts.append("*".join(bits))
        return " + ".join(parts)

    def degrees(self) -> set:
        """Set of (p, r) over all terms."""
        return {term_degree(k) for k in self.terms}


def _sort_forms(idx: list) -> tuple:
    """Bubble-sort anticommuting indices; returns (sign, tuple) or (0, ())."""
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    idx = list(idx)
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


def term_degree(key: Key) -> tuple:
    a, u, b, _, du, _, _ = key
    return a + sum(u) + b, len(du)


# ---------------------------------------------------------------------------
# elementary operators
# ---------------------------------------------------------------------------

def _map(s: TermSum, f: Callable[[Key, Fraction], Iterable]) -> TermSum:
    out: dict = {}
    for k, c in s.terms.items():
        for k2, c2 in f(k, c):
            out[k2] = out.get(k2, 0) + c2
    return TermSum(out)


def d_t(s: TermSum) -> TermSum:
    def f(k, c):
        a, u, b, g, du, om, pi = k
        if a:
            yield (a - 2, u, b, g, du, om, pi), c * Fraction(a, 2)
        if g:
            for i in range(DIM):
                e = list(u)
                e[i] += 2
                yield (a - 4, tuple(e), b, g, du, om, pi), c
    return _map(s, f)


def d_u(s: TermSum, i: int) -> TermSum:
    def f(k, c):
        a, u, b, g, du, om, pi = k
        if u[i]:
            e = list(u)
            e[i] -= 1
            yield (a, tuple(e), b, g, du, om, pi), c * u[i]
        if b:
            # d||u||^b = b ||u||^{b-2} * 4 u^i
            e = list(u)
            e[i] += 1
            yield (a, tuple(e), b - 2, g, du, om, pi), c * 4 * b
        if g:
            e = list(u)
            e[i] += 1
            yield (a - 2, tuple(e), b, g, du, om, pi), -2 * c
    return _map(s, f)


def contract(s: TermSum, i: int) -> TermSum:
    """Interior product with d/du^i, acting from the left."""
    def f(k, c):
        a, u, b, g, du, om, pi = k
        if i in du:
            pos = du.index(i)
            rest = du[:pos] + du[pos + 1:]
            yield (a, u, b, g, rest, om, pi), c * (-1) ** pos
    return _map(s, f)


def laplacian(s: TermSum) -> TermSum:
    out = TermSum()
    for i in range(DIM):
        out = out + d_u(d_u(s, i), i)
    return out


def omega_contraction(s: TermSum) -> TermSum:
    """sum_{i,j} Omega(i,j) i(d/du^i) i(d/du^j)."""
    out = TermSum()
    for i in range(DIM):
        for j in range(DIM):
            if i != j:
                out = out + TermSum.term(omega=(i, j)) * contract(contract(s, j), i)
    return out


def apply_heat_operator_leading(s: TermSum, omega_coeff=1) -> TermSum:
    """Leading part of the heat operator in the flat chart.

    ``omega_coeff`` multiplies the curvature term sum Omega(i,j) i_i i_j.  The
    value 1 is the one for which the leading kernel below is annihilated.
    """
    out = d_t(s) - laplacian(s).scale(Fraction(1, 4))
    if omega_coeff:
        out = out + omega_contraction(s).scale(omega_coeff)
    return out


def apply_dstar_leading(s: TermSum) -> TermSum:
    """-(1/4) sum_i i(d/du^i) d/du^i in the flat chart."""
    out = TermSum()
    for i in range(DIM):
        out = out + contract(d_u(s, i), i)
    return out.scale(Fraction(-1, 4))


# ---------------------------------------------------------------------------
# the leading kernel and the displayed d* output
# ---------------------------------------------------------------------------

def levi_civita(i: int, j: int, k: int) -> int:
    if len({i, j, k}) < 3:
        return 0
    return _sort_forms([i, j, k])[0]


def flat_gaussian() -> TermSum:
    """(4 pi t)^{-3/2} e du1 du2 du3."""
    return TermSum.term(a=-3, gauss=True, du=(0, 1, 2), pi=-3)


def kt_leading_term() -> TermSum:
    """(4pi)^{-3/2} e [ t^{-3/2} du1du2du3 + t^{-1/2} eps_ijk Omega(i,j) du^k ]."""
    out = flat_gaussian()
    for i in range(DIM):
        for j in range(DIM):
            for k in range(DIM):
                eps = levi_civita(i, j, k)
                if eps:
                    out = out + TermSum.term(eps, a=-1, gauss=True, du=(k,), omega=(i, j), pi=-3)
    return out


def omega_term_only() -> TermSum:
    """The curvature part of the leading kernel alone."""
    return kt_leading_term() - flat_gaussian()


def _u_hat(i: int) -> TermSum:
    e = [0, 0, 0]
    e[i] = 1
    return TermSum.term(u=tuple(e), b=-1)


def _du_hat(j: int) -> TermSum:
    # d(u^j/||u||) = du^j/||u|| - 4 u^j ||u||^{-3} sum_m u^m du^m
    out = TermSum.term(du=(j,), b=-1)
    for m in range(DIM):
        e = [0, 0, 0]
        e[j] += 1
        e[m] += 1
        out = out + TermSum.term(-4, u=tuple(e), b=-3, du=(m,))
    return out


def dstar_display() -> TermSum:
    """Closed form of the d* image of the leading kernel, built from u-hat.

    (4pi)^{-3/2} ||u||^3/(4 t^{5/2}) e eps_ijk uhat^i duhat^j duhat^k
      + (4pi)^{-3/2} u^k/(2 t^{3/2}) e eps_ijk Omega(i,j)
    """
    form = TermSum()
    for i in range(DIM):
        for j in range(DIM):
            for k in range(DIM):
                eps = levi_civita(i, j, k)
                if eps:
                    form = form + (_u_hat(i) * _du_hat(j) * _du_hat(k)).scale(eps)
    first = TermSum.term(Fraction(1, 4), a=-5, b=3, gauss=True, pi=-3) * form
    second = TermSum()
    for i in range(DIM):
        for j in range(DIM):
            for k in range(DIM):
                eps = levi_civita(i, j, k)
                if eps:
                    e = [0, 0, 0]
                    e[k] = 1
                    second = second + TermSum.term(Fraction(eps, 2), a=-3, u=tuple(e),
                                                   gauss=True, omega=(i, j), pi=-3)
    return first + second


@dataclass
class FilterResult:
    kept: TermSum
    violations: TermSum


def vanishing_filter(s: TermSum) -> FilterResult:
    """Split off terms of total degree p + r < 0; those should never occur."""
    keep, bad = {}, {}
    for k, c in s.terms.items():
        p, r = term_degree(k)
        (bad if p + r < 0 else keep)[k] = c
    return FilterResult(TermSum(keep), TermSum(bad))


def degree_shift(op: Callable[[TermSum], TermSum], s: TermSum) -> set:
    """Set of total-degree changes op induces, term by term."""
    shifts = set()
    for k, c in s.terms.items():
        p0, r0 = term_degree(k)
        for k2 in op(TermSum({k: c})).terms:
            p1, r1 = term_degree(k2)
            shifts.add((p1 + r1) - (p0 + r0))
    return shifts


# ---------------------------------------------------------------------------
# numeric constants
# ---------------------------------------------------------------------------

def boundary_limit(r: float, L: float, rtol: float = 1e-10) -> tuple:
    """The two t-integrals whose r -> 0 limits give the boundary coefficients.

    A(r, L) = int_0^L r^3/(4 t^{5/2}) e^{-r^2/4t} dt
    B(r, L) = int_0^L r /(2 t^{3/2}) e^{-r^2/4t} dt
    Both tend to sqrt(pi).  Integrated in s = log t to tame the endpoint.
    """
    from scipy.integrate import quad

    if not (r > 0 and L > 0):
        raise HeatError("r and L must be positive")

    def fa(s):
        t = math.exp(s)
        return r ** 3 / (4 * t ** 1.5) * math.exp(-r * r / (4 * t))

    def fb(s):
        t = math.exp(s)
        return r / (2 * t ** 0.5) * math.exp(-r * r / (4 * t))

    # the mass of both integrands sits near t ~ r^2
    s_peak = math.log(r * r / 4)
    lo = s_peak - 40.0
    hi = math.log(L)
    vals = []
    for f in (fa, fb):
        pts = [p for p in (s_peak - 5, s_peak, s_peak + 5) if lo < p < hi]
        v, _ = quad(f, lo, hi, epsrel=rtol, epsabs=0.0, limit=400, points=pts or None)
        vals.append(v)
    return vals[0], vals[1]


def sphere_integral(density: Callable, order: int = 48) -> float:
    """Integrate f(theta, phi) dtheta dphi over [0,pi]x[0,2pi] by Gauss-Legendre."""
    import numpy as np

    x, w = np.polynomial.legendre.leggauss(order)
    th = (x + 1) * (math.pi / 2)
    wt = w * (math.pi / 2)
    ph = (x + 1) * math.pi
    wp = w * math.pi
    T, P = np.meshgrid(th, ph, indexing="ij")
    vals = density(T, P)
    return float(np.einsum("i,j,ij->", wt, wp, vals))


def _unit_form_density(T, P):
    """eps_ijk uhat^i duhat^j duhat^k pulled back to (theta, phi) coordinates."""
    import numpy as np

    st, ct, sp, cp = np.sin(T), np.cos(T), np.sin(P), np.cos(P)
    x = np.stack([st * cp, st * sp, ct])
    xt = np.stack([ct * cp, ct * sp, -st])
    xp = np.stack([-st * sp, st * cp, np.zeros_like(T)])
    # eps_ijk x^i (x_t^j x_p^k - x_p^j x_t^k) = 2 x . (x_t cross x_p)
    cross = np.stack([
        xt[1] * xp[2] - xt[2] * xp[1],
        xt[2] * xp[0] - xt[0] * xp[2],
        xt[0] * xp[1] - xt[1] * xp[0],
    ])
    return 2.0 * np.einsum("i...,i...->...", x, cross)


BOUNDARY_PREFACTOR = (4 * math.pi) ** -1.5 * math.sqrt(math.pi)   # = 1/(8 pi)


def fiber_sphere_integral(prefactor: float = BOUNDARY_PREFACTOR, scale: float = 1.0,
                          order: int = 48) -> float:
    """Integral of prefactor * eps_ijk uhat^i duhat^j duhat^k over the unit sphere.

    The default prefactor is the boundary coefficient (4pi)^{-3/2} * sqrt(pi)
    produced by ``boundary_limit``; with it the fiber integral is 1.
    """
    return scale * prefactor * sphere_integral(_unit_form_density, order)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    residual_terms: int
    detail: str = ""


def verify_all() -> list:
    checks = []
    k0 = kt_leading_term()

    r = apply_heat_operator_leading(flat_gaussian(), omega_coeff=0)
    checks.append(Check("flat heat operator kills flat Gaussian", not r, len(r)))

    r = apply_heat_operator_leading(k0)
    checks.append(Check("heat operator kills leading kernel", not r, len(r)))

    # curvature piece alone: its image must cancel the Omega-contraction of the volume term
    lhs = apply_heat_operator_leading(omega_term_only(), omega_coeff=0)
    rhs = -omega_contraction(flat_gaussian())
    diff = lhs - rhs
    checks.append(Check("curvature piece compensates volume term", not diff, len(diff)))

    diff = apply_dstar_leading(k0) - dstar_display()
    checks.append(Check("d* of leading kernel matches closed form", not diff, len(diff)))

    shifts = degree_shift(apply_heat_operator_leading, k0) | degree_shift(apply_dstar_leading, k0)
    checks.append(Check("operators lower total degree by 2", shifts <= {-2}, 0, str(sorted(shifts))))

    fr = vanishing_filter(k0)
    checks.append(Check("leading kernel has no negative total degree", not fr.violations,
                        len(fr.violations)))

    a, b = boundary_limit(1e-3, 1.0)
    sp = math.sqrt(math.pi)
    ok = abs(a - sp) < 1e-3 and abs(b - sp) < 1e-3
    checks.append(Check("boundary limits equal sqrt(pi)", ok, 0, f"{a:.9f} {b:.9f}"))

    v = fiber_sphere_integral()
    checks.append(Check("fiber sphere integral equals 1", abs(v - 1) < 1e-6, 0, f"{v:.12f}"))
    return checks
