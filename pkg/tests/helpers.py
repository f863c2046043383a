"""Random generators and fixtures shared by the test modules."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from rwk.weyl_algebra import (ConnectionData, WeylElement, curvature_of_connection)


def rand_coeff(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(-4, 4), rng.randint(1, 3))


def rand_weyl(rng: random.Random, n: int, cutoff: int, nterms: int = 3,
              parity: int | None = None, max_forms: int = 2) -> WeylElement:
    """A few random monomials; ``parity`` fixes the form degree mod 2."""
    m = 2 * n
    terms = {}
    for _ in range(nterms):
        h = rng.randint(0, cutoff // 2)
        deg = rng.randint(0, cutoff - 2 * h)
        e = [0] * m
        for _ in range(deg):
            e[rng.randrange(m)] += 1
        k = rng.randint(0, max_forms)
        if parity is not None and k % 2 != parity:
            k = k + 1 if k < max_forms or k == 0 else k - 1
        slots = tuple(sorted(rng.sample(range(2 * m), k)))
        terms[(tuple(e), slots, h)] = rand_coeff(rng)
    return WeylElement(n, cutoff, terms)


def rand_weyl_low(rng: random.Random, n: int, cutoff: int, nterms: int = 3,
                  parity: int = 0) -> WeylElement:
    """hbar-free terms of polynomial degree 1 or 2, so nested products stay below the cutoff."""
    m = 2 * n
    terms = {}
    for _ in range(nterms):
        e = [0] * m
        for _ in range(rng.randint(1, 2)):
            e[rng.randrange(m)] += 1
        k = parity if rng.random() < 0.7 else parity + 2
        slots = tuple(sorted(rng.sample(range(2 * m), k)))
        terms[(tuple(e), slots, 0)] = rand_coeff(rng)
    return WeylElement(n, cutoff, terms)


def pure_holomorphic_curvature(rng: random.Random, cutoff: int) -> ConnectionData:
    """n = 1: R = dz^1 dz^2 q(delta) with q a random quadratic; delta R = 0 trivially."""
    R = WeylElement.zero(1, cutoff)
    for e in [(2, 0), (1, 1), (0, 2)]:
        R = R + WeylElement.monomial(1, cutoff, rand_coeff(rng) or 1, e, dz=[0, 1])
    return ConnectionData(1, R)


def random_christoffels(rng: random.Random, n: int) -> dict:
    chris = {}
    for key in itertools.combinations_with_replacement(range(2 * n), 3):
        v = rand_coeff(rng)
        for p in set(itertools.permutations(key)):
            chris[p] = v
    return chris


def connection_curvature(rng: random.Random, cutoff: int, n: int = 1) -> ConnectionData:
    """R is the curvature of a random symplectic connection; Christoffels kept."""
    chris = random_christoffels(rng, n)
    bare = ConnectionData(n, WeylElement.zero(n, cutoff), chris)
    R = curvature_of_connection(bare, cutoff)
    return ConnectionData(n, R, chris)


def mixed_curvature(rng: random.Random, cutoff: int) -> ConnectionData:
    """n = 1, type (1,1): R = 1/2 Phi_{jkl} dz^j dzbar^1 delta^k delta^l with Phi symmetric."""
    phi = {key: rand_coeff(rng) for key in itertools.combinations_with_replacement(range(2), 3)}
    R = WeylElement.zero(1, cutoff)
    for j, k, l in itertools.product(range(2), repeat=3):
        e = [0, 0]
        e[k] += 1
        e[l] += 1
        R = R + WeylElement.monomial(1, cutoff, phi[tuple(sorted((j, k, l)))] / 2, e,
                                     dz=[j], dzbar=[0])
    return ConnectionData(1, R)


def rand_alpha0(rng: random.Random, n: int, cutoff: int) -> WeylElement:
    """Random element of the (0,*,0) component: dzbar forms and hbar only."""
    terms = {}
    for _ in range(rng.randint(1, 3)):
        k = rng.randint(0, min(2, 2 * n))
        J = tuple(sorted(2 * n + j for j in rng.sample(range(2 * n), k)))
        h = rng.randint(0, cutoff // 2)
        terms[((0,) * (2 * n), J, h)] = rand_coeff(rng) or 1
    return WeylElement(n, cutoff, terms)


def random_target(rng: random.Random, n: int, valencies=(3,), density: float = 0.5):
    """Random holomorphic symplectic target data with symmetric vertex tensors."""
    from rwk.weight_system import TargetData, symmetrize_tensor
    from rwk.weyl_algebra import standard_omega

    m = 2 * n
    tensors = {}
    for k in valencies:
        raw = {}
        for abar in range(m):
            for idx in itertools.combinations_with_replacement(range(m), k):
                if rng.random() < density:
                    raw[(abar, idx)] = rand_coeff(rng)
        tensors[k] = symmetrize_tensor(raw, k)
    return TargetData(n, standard_omega(n), tensors)


def rand_kernel(space, parity: int, rng: random.Random):
    """Random graded-symmetric kernel of the given parity."""
    from rwk.bv_toy import Kernel

    N = space.dim
    M = [[Fraction(0)] * N for _ in range(N)]
    for a in range(N):
        for b in range(a, N):
            if (space.parities[a] + space.parities[b]) % 2 != parity:
                continue
            if a == b and space.parities[a]:
                continue
            v = Fraction(rng.randint(-3, 3))
            M[a][b] = v
            M[b][a] = (-1) ** (space.parities[a] * space.parities[b]) * v
    return Kernel.from_matrix(space, M)


def rand_even_functional(space, rng: random.Random, layout):
    """layout: list of (hbar, degree, count); odd monomials are skipped."""
    from rwk.bv_toy import Functional

    terms = {}
    for h, deg, k in layout:
        for _ in range(k):
            m = tuple(sorted(rng.randrange(space.dim) for _ in range(deg)))
            if sum(space.parities[a] for a in m) % 2:
                continue
            if len(set(a for a in m if space.parities[a])) != sum(space.parities[a] for a in m):
                continue
            terms[(h, m)] = Fraction(rng.randint(-3, 3), rng.randint(1, 3))
    return Functional(space, terms)


def rand_odd_operator(space, rng: random.Random):
    from rwk.bv_toy import LinearOperator

    N = space.dim
    Q = [[Fraction(0)] * N for _ in range(N)]
    for a in range(N):
        for b in range(N):
            if space.parities[a] != space.parities[b]:
                Q[a][b] = Fraction(rng.randint(-2, 2))
    return LinearOperator(space, tuple(map(tuple, Q)))
