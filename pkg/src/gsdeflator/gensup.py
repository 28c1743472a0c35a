"""Generalized supermartingales and the convergence lemmas built on them.

The sequence lemmas work on finite horizons: "converges" means the Ky Fan
distance drops below ``tol`` and stays there for the rest of the horizon.
They run in floating point; the supermartingale check itself stays exact on
exact inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import HypothesisViolation, StructuralError
from .prob import INF, Filtration, FiniteProbSpace, Number, RandomVariable, ratio_conventional


@dataclass(frozen=True)
class CellViolation:
    s: int
    t: int
    cell: frozenset
    value: Number


@dataclass
class GensupReport:
    violations: List[CellViolation] = field(default_factory=list)
    resurrection_events: List[Tuple[int, int, int]] = field(default_factory=list)
    worst: Number = 0

    @property
    def passed(self) -> bool:
        return not self.violations and not self.resurrection_events


def check_generalized_supermartingale(
    Z: Sequence[Sequence[Number]], filtration: Filtration, space: FiniteProbSpace, tol: float = 1e-9
) -> GensupReport:
    """Check E[Z_t / Z_s | F_s] <= 1 + tol on every cell, for all grid pairs s < t."""
    if len(Z) != len(filtration):
        raise StructuralError(f"process has {len(Z)} slices, filtration has {len(filtration)}")
    if filtration.n_atoms != space.size:
        raise StructuralError("filtration and space disagree on the atom count")
    report = GensupReport()
    probs = space.probs
    for s in range(len(Z)):
        for t in range(s + 1, len(Z)):
            ratio = ratio_conventional(Z[t], Z[s])
            for cell in filtration.cells(s):
                inf_atoms = [i for i in sorted(cell) if ratio[i] == INF]
                if inf_atoms:
                    value = INF
                    report.resurrection_events.extend((s, t, i) for i in inf_atoms)
                else:
                    value = sum(probs[i] * ratio[i] for i in cell) / sum(probs[i] for i in cell)
                if value > report.worst:
                    report.worst = value
                if value > 1 + tol:
                    report.violations.append(CellViolation(s, t, cell, value))
    return report


# -- Komlos-type selection --------------------------------------------------

@dataclass
class KomlosResult:
    limit: RandomVariable
    indices: List[int]  # k_n >= n, zero-based
    distances: List[float]

    @property
    def selected(self) -> List[int]:
        return self.indices


def _ky_fan_np(a, b, p):
    return float(p @ np.minimum(np.abs(a - b), 1.0))


def komlos_select(seq: Sequence[Sequence[Number]], space: FiniteProbSpace, tol: float = 1e-3) -> KomlosResult:
    """Tail elements g^n = f^{k_n}, k_n >= n, converging in probability.

    On a finite space the convex combinations can be single tail elements
    picked along a Bolzano-Weierstrass subsequence. The cluster point is found
    by bisecting the bounding box, keeping the more populated half (later
    terms win ties). ``indices[n]`` is the tail index used for position n;
    the selection is defined up to the last index close to the cluster point.
    """
    if not seq:
        raise StructuralError("empty sequence")
    if any(v == INF for f in seq for v in f):
        raise HypothesisViolation("selection hypothesis violated: sequence is not bounded")
    F = np.array([[float(v) for v in f] for f in seq])
    p = np.array([float(v) for v in space.probs])
    L, m = F.shape
    lo, hi = F.min(axis=0), F.max(axis=0)
    members = np.arange(L)
    axis = 0
    while np.max(hi - lo) > tol / 2:
        if len(members) == 1:
            lo = hi = F[members[0]].copy()
            break
        # split the widest side to keep boxes roughly cubic
        axis = int(np.argmax(hi - lo))
        mid = 0.5 * (lo[axis] + hi[axis])
        left = members[F[members, axis] <= mid]
        right = members[F[members, axis] > mid]
        if len(left) > len(right) or (len(left) == len(right) and left.max() > right.max()):
            members, hi = left, hi.copy()
            hi[axis] = mid
        else:
            members, lo = right, lo.copy()
            lo[axis] = mid
    # the member nearest the box centre, so the limit is itself a sequence term
    centre = F[members].mean(axis=0)
    limit = F[members[int(np.argmin(np.abs(F[members] - centre).max(axis=1)))]]
    dist = np.array([_ky_fan_np(F[k], limit, p) for k in range(L)])
    # forward record lows: nonincreasing distances along increasing indices
    records = []
    best = math.inf
    for k in range(L):
        if dist[k] <= best:
            records.append(k)
            best = dist[k]
    indices = []
    j = 0
    for n in range(records[-1] + 1):
        while records[j] < n:
            j += 1
        indices.append(records[j])
    exact_limit = tuple(float(v) for v in limit)
    return KomlosResult(exact_limit, indices, [float(dist[k]) for k in indices])


# -- sandwich lemma ------------------------------------------------------------

def _sandwich_bound(delta, p_min, e_tol):
    """Ky Fan bound on d(g, 1) and d(h, 1) implied by the hypotheses on one term.

    With d(gh, 1) = delta every atom has |gh - 1| <= eta = delta / p_min; so
    E[sqrt(gh)] >= sqrt(1 - eta) and E[(sqrt g - sqrt h)^2] <= 2(1 + e_tol) -
    2 sqrt(1 - eta), which bounds |sqrt g - sqrt h| atomwise. Solving for
    sqrt g from the product and the difference gives the range of g.
    """
    eta = delta / p_min
    if eta >= 1:
        return 1.0
    eps = max(2 * (1 + e_tol) - 2 * math.sqrt(1 - eta), 0.0)
    kappa = math.sqrt(eps / p_min)
    # P = sqrt(gh) = uv and D = u - v with u = sqrt g, v = sqrt h
    P_lo, P_hi = math.sqrt(1 - eta), math.sqrt(1 + eta)

    def root(D, P):
        return ((D + math.sqrt(D * D + 4 * P)) / 2) ** 2

    lo, hi = root(-kappa, P_lo), root(kappa, P_hi)
    return min(max(abs(lo - 1), abs(hi - 1)), 1.0)


@dataclass
class SandwichReport:
    hypotheses_ok: bool
    passed: bool
    expectation_failures: List[Tuple[str, int, float]]
    product_distances: List[float]
    product_settled_index: Optional[int]
    g_distances: List[float]
    h_distances: List[float]
    bounds: List[float]
    sqrt_product_means: List[float]
    sqrt_gap_means: List[float]
    notes: List[str] = field(default_factory=list)


def _settled_index(dist, tol):
    idx = None
    for n in range(len(dist) - 1, -1, -1):
        if dist[n] <= tol:
            idx = n
        else:
            break
    return idx


def sandwich_check(
    g_seq: Sequence[Sequence[Number]],
    h_seq: Sequence[Sequence[Number]],
    space: FiniteProbSpace,
    tol: float = 1e-4,
    expectation_tol: Optional[float] = None,
) -> SandwichReport:
    """E[g^n], E[h^n] <= 1 and g^n h^n -> 1 force g^n -> 1 and h^n -> 1."""
    if len(g_seq) != len(h_seq) or not g_seq:
        raise StructuralError("sequences must be nonempty and of equal length")
    e_tol = tol if expectation_tol is None else expectation_tol
    G = np.array([[float(v) for v in g] for g in g_seq])
    H = np.array([[float(v) for v in h] for h in h_seq])
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(H))):
        raise StructuralError("sandwich sequences must be finite")
    p = np.array([float(v) for v in space.probs])
    p_min = float(p.min())
    one = np.ones(G.shape[1])

    failures = []
    for name, M in (("g", G), ("h", H)):
        for n, e in enumerate(M @ p):
            if e > 1 + e_tol:
                failures.append((name, n, float(e)))
    prod = [_ky_fan_np(g * h, one, p) for g, h in zip(G, H)]
    settled = _settled_index(prod, tol)
    hyp = not failures and settled is not None

    sqrt_prod = [float(p @ np.sqrt(g * h)) for g, h in zip(G, H)]
    sqrt_gap = [float(p @ (np.sqrt(g) - np.sqrt(h)) ** 2) for g, h in zip(G, H)]
    gd = [_ky_fan_np(g, one, p) for g in G]
    hd = [_ky_fan_np(h, one, p) for h in H]
    bounds = [_sandwich_bound(d, p_min, e_tol) for d in prod]
    report = SandwichReport(hyp, False, failures, prod, settled, gd, hd, bounds, sqrt_prod, sqrt_gap)
    if not hyp:
        if failures:
            report.notes.append("hypothesis violated: some expectation exceeds 1")
        if settled is None:
            report.notes.append("hypothesis violated: g^n h^n does not settle near 1 within the horizon")
        return report
    slack = 1e-12
    within = all(a <= b + slack and c <= b + slack for a, c, b in zip(gd, hd, bounds))
    report.passed = within
    if not within:
        report.notes.append("conclusion failed: a distance to 1 exceeds its derived bound")
    return report


# -- discrete-time limit ------------------------------------------------------

@dataclass
class DiscreteLimitReport:
    hypotheses_ok: bool
    passed: bool
    hull_min: float
    ratio_failures: List[Tuple[int, int, float]]
    worst_ratio: float
    cauchy_index: Optional[int]
    tail_diameters: List[float]
    limit: Optional[RandomVariable]
    notes: List[str] = field(default_factory=list)


def discrete_limit_check(
    g_seq: Sequence[Sequence[Number]],
    space: FiniteProbSpace,
    tol: float = 1e-3,
    max_failures: int = 20,
    ratio_tol: float = 1e-9,
) -> DiscreteLimitReport:
    """E[g_n / g_m] <= 1 for m <= n plus a hull bounded away from 0 give a limit in probability.

    "Bounded away from zero" is read atomwise: the least value over the
    convex hull, which is the least value over the sequence, must be positive.
    ``ratio_tol`` is the slack on the ratio hypothesis; ``tol`` is the Cauchy
    threshold for the conclusion.
    """
    if not g_seq:
        raise StructuralError("empty sequence")
    Gs = np.array([[float(v) for v in g] for g in g_seq])
    if not np.all(np.isfinite(Gs)) or np.any(Gs < 0):
        raise StructuralError("sequence values must be finite and nonnegative")
    p = np.array([float(v) for v in space.probs])
    L = len(Gs)
    hull_min = float(Gs.min())
    notes = []
    failures = []
    worst = 0.0
    if hull_min <= 0:
        notes.append("hypothesis violated: convex hull is not bounded away from zero")
    else:
        inv = 1.0 / Gs
        for m in range(L):
            vals = Gs[m:] @ (p * inv[m])  # E[g_n / g_m] for n >= m
            worst = max(worst, float(vals.max()))
            bad = np.nonzero(vals > 1 + ratio_tol)[0]
            for j in bad[: max(0, max_failures - len(failures))]:
                failures.append((m, m + int(j), float(vals[j])))
            if len(bad) and len(failures) >= max_failures:
                break
        if failures:
            notes.append("hypothesis violated: E[g_n / g_m] exceeds 1")
    hyp = hull_min > 0 and not failures

    # tail diameters sup_{n, m >= k} d(g_n, g_m), by suffix maxima
    row_max = np.zeros(L)
    for n in range(L):
        d = np.minimum(np.abs(Gs[n:] - Gs[n]), 1.0) @ p
        row_max[n] = d.max()
    diam = np.maximum.accumulate(row_max[::-1])[::-1]
    cauchy = None
    for k in range(L):
        if diam[k] <= tol:
            cauchy = k
            break
    report = DiscreteLimitReport(
        hyp, False, hull_min, failures, worst, cauchy, [float(x) for x in diam],
        tuple(float(v) for v in Gs[-1]) if cauchy is not None else None, notes,
    )
    if not hyp:
        return report
    report.passed = cauchy is not None
    if cauchy is None:
        report.notes.append("sequence is not Cauchy below tol within the horizon")
    return report
