"""Seeded random instances for property tests, acceptance runs and demos.

Rational instances use ``random.Random``; the float sequences for the
convergence lemmas use numpy generators. Every builder takes an explicit RNG
so runs are reproducible from a single seed.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from .market import MarketSpec
from .numeraire import ConvexSetSpec
from .prob import Filtration, FiniteProbSpace, Process, TimeGrid


def random_space(rng: random.Random, n_atoms: int, max_weight: int = 6) -> FiniteProbSpace:
    w = [rng.randint(1, max_weight) for _ in range(n_atoms)]
    total = sum(w)
    return FiniteProbSpace(tuple(f"w{i}" for i in range(n_atoms)), tuple(Fraction(x, total) for x in w))


def random_polytope(rng: random.Random, max_gens: int = 3, max_atoms: int = 4) -> ConvexSetSpec:
    """Rational generators with entries in [0, 4] on a grid of step 1/8; every atom covered."""
    space = random_space(rng, rng.randint(1, max_atoms))
    k = rng.randint(1, max_gens)
    while True:
        gens = tuple(
            tuple(Fraction(rng.randint(0, 32), 8) for _ in range(space.size)) for _ in range(k)
        )
        cset = ConvexSetSpec(gens, space)
        if cset.has_strictly_positive():
            return cset


def refine(rng: random.Random, partition) -> Tuple[frozenset, ...]:
    """Random refinement: each cell is cut into a random number of random blocks."""
    out = []
    for cell in partition:
        atoms = sorted(cell)
        rng.shuffle(atoms)
        k = rng.randint(1, len(atoms))
        cuts = sorted(rng.sample(range(1, len(atoms)), k - 1))
        prev = 0
        for c in cuts + [len(atoms)]:
            out.append(frozenset(atoms[prev:c]))
            prev = c
    return tuple(out)


def random_filtration(rng: random.Random, n_atoms: int, n_times: int) -> Filtration:
    parts = [(frozenset(range(n_atoms)),)]
    for _ in range(n_times - 1):
        parts.append(refine(rng, parts[-1]))
    return Filtration(tuple(parts), n_atoms)


def random_market(
    rng: random.Random, max_atoms: int = 4, max_periods: int = 2, max_gens: int = 3, zero_prob: float = 0.3
) -> MarketSpec:
    """Multiplicative generators with one-step factors in {0, 1/4, ..., 2}.

    Generators other than the first may use the factor 0 (absorption), with
    probability ``zero_prob`` per generator; the first generator is always
    strictly positive. The filtration is an independent random refinement
    sequence, so it is usually coarser than the generators' own information.
    """
    space = random_space(rng, rng.randint(1, max_atoms))
    n = space.size
    K = rng.randint(1, max_periods)
    filt = random_filtration(rng, n, K + 1)
    gens = {}
    for g in range(rng.randint(1, max_gens)):
        absorbing = g > 0 and rng.random() < zero_prob
        proc = [[Fraction(1)] * n]
        for _ in range(K):
            proc.append([x * Fraction(rng.randint(0 if absorbing else 1, 8), 4) for x in proc[-1]])
        gens[f"g{g}"] = proc
    return MarketSpec(space, TimeGrid(tuple(range(K + 1))), filt, gens)


def random_adapted_process(
    rng: random.Random, filtration: Filtration, drift_bias: float = 0.5
) -> Process:
    """Strictly positive process constant on the cells of ``filtration``.

    One-step factors are drawn per cell from a small rational menu tilted so
    that roughly half the instances are classical supermartingales.
    """
    n = filtration.n_atoms
    values = [[Fraction(1)] * n]
    for k in range(1, len(filtration)):
        row = [None] * n
        for cell in filtration.cells(k):
            up = rng.random() < drift_bias
            f = Fraction(rng.randint(1, 10), 8) if up else Fraction(rng.randint(1, 8), 8)
            for i in cell:
                row[i] = values[-1][i] * f
        values.append(row)
    return tuple(tuple(r) for r in values)


# -- float sequences for the convergence lemmas ------------------------------

def float_space(gen: np.random.Generator, n_atoms: int) -> FiniteProbSpace:
    w = gen.integers(1, 7, size=n_atoms)
    return FiniteProbSpace(tuple(f"w{i}" for i in range(n_atoms)), tuple(Fraction(int(x), int(w.sum())) for x in w))


def sandwich_instance(gen: np.random.Generator, space: FiniteProbSpace, length: int = 120):
    """g^n, h^n with E[g^n], E[h^n] <= 1 and g^n h^n -> 1 geometrically."""
    p = np.array([float(x) for x in space.probs])
    m = len(p)
    u, v = gen.uniform(-1, 1, size=m), gen.uniform(-1, 1, size=m)
    rate = gen.uniform(0.8, 0.9)
    g_seq, h_seq = [], []
    for n in range(1, length + 1):
        d = 0.5 * rate ** n
        eps_g, eps_h = gen.uniform(0, 1) * d * d, gen.uniform(0, 1) * d * d
        g = (1 + d * u) / (p @ (1 + d * u)) * (1 - eps_g)
        h = (1 + d * v) / (p @ (1 + d * v)) * (1 - eps_h)
        g_seq.append(tuple(g))
        h_seq.append(tuple(h))
    return g_seq, h_seq


def push_expectation(seq: List[tuple], space: FiniteProbSpace, index: int, excess: float = 1e-3) -> List[tuple]:
    """Rescale term ``index`` so its expectation becomes 1 + excess."""
    p = np.array([float(x) for x in space.probs])
    x = np.array(seq[index], dtype=float)
    out = list(seq)
    out[index] = tuple(x * (1 + excess) / (p @ x))
    return out


def discrete_limit_instance(gen: np.random.Generator, space: FiniteProbSpace, length: int = 80):
    """g_n = kappa_n (1 + b rho^n) with kappa_n shrunk just enough that E[g_n / g_m] <= 1."""
    p = np.array([float(x) for x in space.probs])
    m = len(p)
    base = gen.uniform(0.5, 2.0, size=m)
    b = gen.uniform(-0.5, 0.5, size=m)
    rho = gen.uniform(0.5, 0.85)
    shapes = [base * (1 + b * rho ** n) for n in range(length)]
    kappa = [1.0]
    for n in range(1, length):
        k = kappa[-1]
        for j in range(n):
            e = p @ (shapes[n] / shapes[j])
            k = min(k, kappa[j] / e)
        kappa.append(k * (1 - 1e-12))
    return [tuple(k * s) for k, s in zip(kappa, shapes)]


def push_ratio(seq: List[tuple], space: FiniteProbSpace, n: int, m: int, excess: float = 1e-3) -> List[tuple]:
    """Rescale term n so that E[g_n / g_m] = 1 + excess."""
    p = np.array([float(x) for x in space.probs])
    gn, gm = np.array(seq[n], dtype=float), np.array(seq[m], dtype=float)
    out = list(seq)
    out[n] = tuple(gn * (1 + excess) / (p @ (gn / gm)))
    return out


def bounded_sequence(gen: np.random.Generator, n_atoms: int = 3, length: int = 200):
    """A bounded sequence mixing a convergent drift with an alternating component."""
    a, b = gen.uniform(0, 2, size=n_atoms), gen.uniform(0, 2, size=n_atoms)
    out = []
    for n in range(1, length + 1):
        base = a if n % 2 else b
        out.append(tuple(base * (1 + 1.0 / n) + gen.uniform(-1, 1, size=n_atoms) / n ** 2))
    return out
