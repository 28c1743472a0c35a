"""Brute-force ground truth for the solver and the market module.

Nothing here shares code with the optimized paths it checks: grid search
instead of the simplex solver, a flat product over every (time, cell) choice
instead of the recursive strategy walk, and a classical conditional
expectation test instead of the ratio-based supermartingale check.
"""

from __future__ import annotations

import functools
import itertools

import numpy as np
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

from .errors import InstanceTooLarge, StructuralError
from .prob import Filtration, FiniteProbSpace

HOLD = "hold-current"


@functools.lru_cache(maxsize=8)
def _simplex_points(k: int, resolution: int) -> np.ndarray:
    """All integer points of the k-simplex scaled by ``resolution``, one per row."""
    if k == 1:
        return np.array([[resolution]])
    if k == 2:
        i = np.arange(resolution + 1)
        return np.stack([i, resolution - i], axis=1)
    i = np.repeat(np.arange(resolution + 1), np.arange(resolution + 1, 0, -1))
    j = np.concatenate([np.arange(resolution + 1 - a) for a in range(resolution + 1)])
    pts = np.stack([i, j, resolution - i - j], axis=1)
    pts.setflags(write=False)
    return pts


def grid_numeraire(cset, resolution: int = 1000):
    """Exhaustive search of E[log] over the simplex grid with step 1/resolution.

    Returns ``(value, weights, objective)`` for the best grid point; ties go
    to the first point in lexicographic order.
    """
    gens = cset.generators
    if len(gens) > 3:
        raise StructuralError("grid oracle handles at most 3 generators")
    if cset.nonzero_rays:
        raise StructuralError("grid oracle needs a set without rays")
    if resolution < 1:
        raise StructuralError("resolution must be positive")
    probs = np.array([float(p) for p in cset.space.probs])
    cols = np.array([[float(v) for v in g] for g in gens])  # generators x atoms
    pts = _simplex_points(len(gens), resolution)
    values = pts @ cols / resolution  # points x atoms
    with np.errstate(divide="ignore"):
        obj = np.log(values) @ probs
    obj[np.any(values <= 0, axis=1)] = -np.inf
    best = int(np.argmax(obj))
    if not np.isfinite(obj[best]):
        raise StructuralError("no grid point has finite objective")
    weights = tuple(Fraction(int(w), resolution) for w in pts[best])
    return tuple(float(v) for v in values[best]), weights, float(obj[best])


def natural_filtration(processes: Sequence[Sequence[Sequence]], n_atoms: int) -> Filtration:
    """Coarsest filtration making every process adapted: joint level sets of all slices so far."""
    if not processes:
        raise StructuralError("need at least one process")
    n_times = len(processes[0])
    if any(len(p) != n_times for p in processes):
        raise StructuralError("processes must share a grid")
    parts = []
    for k in range(n_times):
        keys: Dict[tuple, set] = {}
        for atom in range(n_atoms):
            key = tuple(p[j][atom] for p in processes for j in range(k + 1))
            keys.setdefault(key, set()).add(atom)
        parts.append(tuple(frozenset(c) for c in sorted(keys.values(), key=min)))
    return Filtration(tuple(parts), n_atoms, require_trivial_start=False)


def classical_supermartingale(Z, filtration: Filtration, space: FiniteProbSpace, tol=0) -> bool:
    """E[Z_t | F_s] <= Z_s on each cell, for an adapted process (the textbook test)."""
    for s in range(len(Z)):
        for cell in filtration.cells(s):
            cell = sorted(cell)
            zs = Z[s][cell[0]]
            mass = sum(space.probs[i] for i in cell)
            for t in range(s + 1, len(Z)):
                ez = sum(space.probs[i] * Z[t][i] for i in cell) / mass
                if ez > zs + tol * max(zs, 1):
                    return False
    return True


def enumerate_strategies(market, cap: int = 100_000) -> List[Tuple[tuple, tuple]]:
    """Every pure strategy as ``(choice assignment, wealth process)``.

    A choice assignment is the base generator followed by one entry per
    (grid index 1..K-1, cell). Entries are generator names or HOLD; HOLD is
    only legal while the non-strictly-positive base is still held, and naming
    the held strictly positive generator is the only way to keep it, so each
    strategy appears once.
    """
    names = list(market.names)
    sp = [n for n in names if n in market.switchable]
    K = len(market.grid) - 1
    slots = [(k, j) for k in range(1, K) for j in range(len(market.filtration.cells(k)))]
    options = sp + [HOLD]
    total_bound = len(names) * len(options) ** len(slots)
    out = []
    for base in names:
        for combo in itertools.product(options, repeat=len(slots)):
            assign = dict(zip(slots, combo))
            wealth = _wealth_or_none(market, base, assign, K)
            if wealth is None:
                continue
            out.append(((base,) + combo, wealth))
            if len(out) > cap:
                raise InstanceTooLarge(len(out), cap)
    return out


def _wealth_or_none(market, base, assign, K):
    n = market.space.size
    gen = market.process
    held = [base] * n
    frozen_base = [base not in market.switchable] * n
    w = [[Fraction(1)] * n]
    for k in range(K):
        if k >= 1:
            for atom in range(n):
                choice = assign[(k, market.filtration.cell_index(k, atom))]
                if choice == HOLD:
                    if not frozen_base[atom]:
                        return None
                else:
                    held[atom] = choice
                    frozen_base[atom] = False
        nxt = []
        for atom in range(n):
            h = gen(held[atom])
            if frozen_base[atom]:
                nxt.append(h[k + 1][atom])
            else:
                nxt.append(w[-1][atom] * h[k + 1][atom] / h[k][atom])
        w.append(nxt)
    return tuple(tuple(x) for x in w)
