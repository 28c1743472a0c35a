"""Expected-log numéraires of generator polytopes in L0+.

A set is described by finitely many generators (its convex hull), optional
conic rays, and a solid-hull flag. The numéraire f of such a set is the
element with E[h / f] <= 1 for every member h; it coincides with the
maximizer of E[log f]. Because the certificate is linear in h it suffices to
check it on generators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError, NonconvergenceError, NumeraireNonexistent, StructuralError
from .prob import (
    INF,
    FiniteProbSpace,
    Number,
    RandomVariable,
    all_exact,
    as_rv,
    check_rv,
    indicator,
    ky_fan_distance,
)

log = logging.getLogger(__name__)

DEFAULT_TOL_EXACT = 1e-10
DEFAULT_TOL_FLOAT = 1e-8
_SNAP_DENOMINATORS = (1, 2, 6, 12, 60, 10**2, 10**3, 10**4, 10**5, 10**6)


@dataclass(frozen=True)
class ConvexSetSpec:
    generators: Tuple[RandomVariable, ...]
    space: FiniteProbSpace
    rays: Tuple[RandomVariable, ...] = ()
    solid: bool = False

    def __post_init__(self):
        gens = tuple(as_rv(g) for g in self.generators)
        rays = tuple(as_rv(r) for r in self.rays)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "rays", rays)
        if not gens:
            raise StructuralError("a convex set needs at least one generator")
        for g in gens:
            check_rv(g, self.space.size)
            if any(v == INF for v in g):
                raise DomainError("generators must be finite")
        for r in rays:
            check_rv(r, self.space.size)
            if any(v == INF for v in r):
                raise DomainError("rays must be finite")

    @property
    def exact(self) -> bool:
        return self.space.exact and all(all_exact(g) for g in self.generators)

    @property
    def nonzero_rays(self) -> Tuple[RandomVariable, ...]:
        return tuple(r for r in self.rays if any(v > 0 for v in r))

    def zero_atoms(self) -> List[int]:
        """Atoms on which every generator vanishes."""
        return [i for i in range(self.space.size) if all(g[i] == 0 for g in self.generators)]

    def has_strictly_positive(self) -> bool:
        return not self.zero_atoms()

    def divided_by(self, g: Sequence[Number]) -> "ConvexSetSpec":
        """The set (1/g)·C for strictly positive finite g."""
        if any(v <= 0 or v == INF for v in g):
            raise DomainError("change of numéraire needs a strictly positive finite variable")
        return ConvexSetSpec(
            tuple(tuple(x / y for x, y in zip(h, g)) for h in self.generators),
            self.space,
            tuple(tuple(x / y for x, y in zip(r, g)) for r in self.rays),
            self.solid,
        )


@dataclass(frozen=True)
class NumeraireResult:
    fhat: RandomVariable
    weights: Tuple[Number, ...]
    certificate: Tuple[Number, ...]
    log_value: float
    iterations: int
    exact: bool = False

    @property
    def worst_certificate(self) -> Number:
        return max(self.certificate)


# -- float kernels ---------------------------------------------------------

def _objective(G, p, lam) -> float:
    f = G @ lam
    if np.any(f <= 0):
        return -math.inf
    return float(p @ np.log(f))


def _grad(G, p, lam):
    return G.T @ (p / (G @ lam))


def _exponentiated_gradient(G, p, lam, iters, tol):
    """Mirror ascent on the simplex with a backtracked step size."""
    eta = 1.0
    obj = _objective(G, p, lam)
    done = 0
    for done in range(1, iters + 1):
        c = _grad(G, p, lam)
        if c.max() - 1.0 <= tol:
            break
        while True:
            trial = lam * np.exp(eta * (c - c.max()))
            trial /= trial.sum()
            new_obj = _objective(G, p, trial)
            if new_obj >= obj:
                break
            eta *= 0.5
            if eta < 1e-12:
                return lam, done
        lam, obj = trial, new_obj
        eta = min(eta * 1.5, 1e3)
    return lam, done


def _newton_on_face(G, p, lam, support, tol, max_steps=200):
    """Maximize E[log G lam] over the simplex face spanned by ``support``."""
    steps = 0
    for steps in range(1, max_steps + 1):
        idx = sorted(support)
        GS = G[:, idx]
        l = lam[idx]
        f = GS @ l
        g = GS.T @ (p / f)
        if np.max(np.abs(g - 1.0)) <= tol:
            break
        k = len(idx)
        H = -(GS.T * (p / f**2)) @ GS
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = H
        K[:k, k] = 1.0
        K[k, :k] = 1.0
        rhs = np.concatenate([-g, [0.0]])
        d = np.linalg.lstsq(K, rhs, rcond=None)[0][:k]
        slope = float(g @ d)
        if not slope > 0:
            d = g - g.mean()
            slope = float(g @ d)
            if not slope > 0:
                break
        neg = d < 0
        if np.any(neg):
            ratios = np.where(neg, -l / np.where(neg, d, -1.0), math.inf)
            blocking = int(np.argmin(ratios))
            t_max = float(ratios[blocking])
        else:
            blocking, t_max = -1, math.inf
        t = min(1.0, t_max)
        base = _objective(GS, p, l)
        while t > 1e-18:
            if _objective(GS, p, l + t * d) >= base + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        l = l + t * d
        if t == t_max:
            l[blocking] = 0.0
        l = np.clip(l, 0.0, None)
        l /= l.sum()
        lam = np.zeros_like(lam)
        lam[idx] = l
        for i, v in zip(idx, l):
            if v <= 0.0 and len(support) > 1:
                support.discard(i)
    return lam, steps


def _fw_line_search(G, p, lam, j):
    """Exact line search along the Frank-Wolfe direction e_j - lam."""
    d = -lam.copy()
    d[j] += 1.0
    f0 = G @ lam
    df = G @ d

    def deriv(gamma):
        return float(p @ (df / (f0 + gamma * df)))

    hi = 1.0
    if np.any(f0 + df <= 0):
        # vertex j alone is not strictly positive; stay inside the domain
        neg = df < 0
        hi = float(np.min(-f0[neg] / df[neg])) * (1 - 1e-12)
    if deriv(hi) >= 0:
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if deriv(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _solve_float(G, p, tol, max_iters):
    k = G.shape[1]
    lam = np.full(k, 1.0 / k)
    if k == 1:
        return lam, 0
    lam, iters = _exponentiated_gradient(G, p, lam, min(200, max_iters), tol)
    support = {i for i in range(k) if lam[i] > 1e-6 * lam.max()}
    for atom in range(G.shape[0]):
        if not any(G[atom, i] > 0 for i in support):
            support.add(int(np.argmax(G[atom] * lam)))
    lam = np.where([i in support for i in range(k)], lam, 0.0)
    lam /= lam.sum()
    while iters < max_iters:
        lam, steps = _newton_on_face(G, p, lam, support, tol * 1e-2)
        iters += steps
        c = _grad(G, p, lam)
        face_gap = max(abs(c[i] - 1.0) for i in support)
        j = int(np.argmax(c))
        if c[j] - 1.0 <= tol and face_gap <= tol:
            break
        if c[j] - 1.0 > tol:
            gamma = _fw_line_search(G, p, lam, j)
            lam = (1 - gamma) * lam
            lam[j] += gamma
            support = {i for i in range(k) if lam[i] > 0.0}
        iters += 1
    return lam, iters


# -- exact post-processing -------------------------------------------------

def _exact_certificate(gens, probs, fhat) -> Tuple[Fraction, ...]:
    return tuple(sum(pw * Fraction(g[i]) / Fraction(fhat[i]) for i, pw in enumerate(probs)) for g in gens)


def _snap(lam, gens, probs):
    """Try rational weights that satisfy the optimality conditions exactly."""
    order = int(np.argmax(lam))
    for D in _SNAP_DENOMINATORS:
        q = [Fraction(float(x)).limit_denominator(D) if x > 1e-9 else Fraction(0) for x in lam]
        q[order] = 1 - sum(v for i, v in enumerate(q) if i != order)
        if any(v < 0 for v in q):
            continue
        f = tuple(sum(w * g[i] for w, g in zip(q, gens)) for i in range(len(probs)))
        if any(v <= 0 for v in f):
            continue
        cert = _exact_certificate(gens, probs, f)
        if all(c <= 1 for c in cert) and all(c == 1 for c, w in zip(cert, q) if w > 0):
            return q, f, cert
    return None


def solve_numeraire(cset: ConvexSetSpec, tol: Optional[float] = None, max_iters: int = 10_000) -> NumeraireResult:
    """Maximize E[log f] over the generator polytope and certify E[g_i / f] <= 1 + tol."""
    if cset.nonzero_rays:
        raise DomainError("set has nonzero rays and is unbounded; use afk_witness")
    zero = cset.zero_atoms()
    if zero:
        raise NumeraireNonexistent([cset.space.atoms[i] for i in zero])
    exact = cset.exact
    if tol is None:
        tol = DEFAULT_TOL_EXACT if exact else DEFAULT_TOL_FLOAT

    # identical generators share a certificate; solve on the distinct ones
    distinct: List[RandomVariable] = []
    owner = []
    for g in cset.generators:
        if g in distinct:
            owner.append(distinct.index(g))
        else:
            owner.append(len(distinct))
            distinct.append(g)

    G = np.array([[float(v) for v in g] for g in distinct], dtype=float).T
    p = np.array([float(v) for v in cset.space.probs])
    lam, iters = _solve_float(G, p, min(tol, 1e-11), max_iters)

    def spread(w):
        out = [0 * w[0]] * len(cset.generators)
        claimed = set()
        for i, o in enumerate(owner):
            if o not in claimed:
                claimed.add(o)
                out[i] = w[o]
        return tuple(out)

    if exact:
        snapped = _snap(lam, distinct, cset.space.probs)
        if snapped is not None:
            q, f, _ = snapped
            cert = _exact_certificate(cset.generators, cset.space.probs, f)
            return NumeraireResult(
                f, spread(q), cert, float(sum(float(pw) * math.log(v) for pw, v in zip(cset.space.probs, f))),
                iters, exact=True,
            )

    fhat = G @ lam
    if np.any(fhat <= 0):
        raise NonconvergenceError(iters, math.inf)
    if exact:
        cert = tuple(float(c) for c in _exact_certificate(cset.generators, cset.space.probs, fhat.tolist()))
    else:
        cert = tuple(float(c) for c in np.array([[float(v) for v in g] for g in cset.generators]) @ (p / fhat))
    worst = max(cert) - 1.0
    if worst > tol:
        raise NonconvergenceError(iters, worst)
    return NumeraireResult(
        tuple(float(v) for v in fhat), spread([float(v) for v in lam]), cert,
        float(p @ np.log(fhat)), iters, exact=False,
    )


def formal_numeraire(cset: ConvexSetSpec, tol: Optional[float] = None, max_iters: int = 10_000) -> NumeraireResult:
    """Numéraire of a set without strictly positive elements, taken on its support.

    Atoms where every generator vanishes are dropped; the remaining problem is
    solved under the conditional probability and the result is extended by 0.
    """
    zero = set(cset.zero_atoms())
    if not zero:
        return solve_numeraire(cset, tol, max_iters)
    keep = [i for i in range(cset.space.size) if i not in zero]
    if not keep:
        raise NumeraireNonexistent(cset.space.atoms)
    mass = sum(cset.space.probs[i] for i in keep)
    sub = FiniteProbSpace(tuple(cset.space.atoms[i] for i in keep), tuple(cset.space.probs[i] / mass for i in keep))
    sub_set = ConvexSetSpec(tuple(tuple(g[i] for i in keep) for g in cset.generators), sub, (), cset.solid)
    res = solve_numeraire(sub_set, tol, max_iters)
    full = [0 * res.fhat[0]] * cset.space.size
    for j, i in enumerate(keep):
        full[i] = res.fhat[j]
    return NumeraireResult(tuple(full), res.weights, res.certificate, res.log_value, res.iterations, res.exact)


@dataclass(frozen=True)
class CertificateReport:
    passed: bool
    values: Tuple[Number, ...]
    worst_index: int
    worst_value: Number


def verify_certificate(fhat: Sequence[Number], cset: ConvexSetSpec, tol: float = DEFAULT_TOL_FLOAT) -> CertificateReport:
    check_rv(fhat, cset.space.size)
    if any(v == 0 or v == INF for v in fhat):
        raise DomainError("candidate numéraire must be strictly positive and finite")
    probs = cset.space.probs
    values = tuple(sum(pw * g[i] / fhat[i] for i, pw in enumerate(probs)) for g in cset.generators)
    for r in cset.nonzero_rays:
        # any positive multiple of a ray is in the set: the certificate is unbounded
        values = values + (INF,)
    worst = max(range(len(values)), key=lambda i: values[i])
    return CertificateReport(values[worst] <= 1 + tol, values, worst, values[worst])


@dataclass(frozen=True)
class AFKReport:
    witness: Optional[RandomVariable]
    per_atom_sup: RandomVariable
    bounded: bool


def afk_witness(cset: ConvexSetSpec) -> AFKReport:
    """An arbitrage of the first kind from a nonzero ray, or the atomwise bound of the set."""
    n = cset.space.size
    sup = [max(g[i] for g in cset.generators) for i in range(n)]
    rays = cset.nonzero_rays
    if rays:
        r = rays[0]
        for ray in rays:
            for i in range(n):
                if ray[i] > 0:
                    sup[i] = INF
        return AFKReport(r, tuple(sup), False)
    return AFKReport(None, tuple(sup), True)


# -- nested sequences ------------------------------------------------------

def _dominated_by_single(h, gens) -> bool:
    return any(all(a <= b for a, b in zip(h, g)) for g in gens)


def _lp_member(h, big: ConvexSetSpec, solid: bool) -> bool:
    gens = [[float(v) for v in g] for g in big.generators]
    rays = [[float(v) for v in r] for r in big.nonzero_rays]
    k, r = len(gens), len(rays)
    n = big.space.size
    A = np.array(gens + rays, dtype=float).T if (k + r) else np.zeros((n, 0))
    target = np.array([float(v) for v in h])
    a_eq = np.zeros((1, k + r))
    a_eq[0, :k] = 1.0
    if solid:
        res = linprog(np.zeros(k + r), A_ub=-A, b_ub=-target + 1e-12, A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0, None)] * (k + r), method="highs")
    else:
        res = linprog(np.zeros(k + r), A_eq=np.vstack([A, a_eq]), b_eq=np.concatenate([target, [1.0]]),
                      bounds=[(0, None)] * (k + r), method="highs")
    return res.status == 0


def containment(big: ConvexSetSpec, small: ConvexSetSpec) -> Optional[str]:
    """How ``small ⊆ big`` was established: "syntactic", "lp", or None if it could not be."""
    if small.solid and not big.solid:
        return None
    method = "syntactic"
    for h in small.generators:
        if big.solid:
            ok = _dominated_by_single(h, big.generators)
        else:
            ok = h in big.generators
        if not ok:
            if not _lp_member(h, big, big.solid):
                return None
            method = "lp"
    for ray in small.nonzero_rays:
        if not big.nonzero_rays:
            return None
        if ray in big.nonzero_rays or (big.solid and _dominated_by_single(ray, big.nonzero_rays)):
            continue
        return None
    return method


@dataclass
class NestedReport:
    direction: str
    status: str  # "converged", "not-converged", "hypothesis-violated"
    fhats: List[RandomVariable]
    limit_numeraire: RandomVariable
    distances: List[Number]
    containment: List[str]
    stabilized_index: Optional[int] = None
    achieved_limit: Optional[RandomVariable] = None
    achieved_distance: Optional[Number] = None
    tail_distances: List[Number] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "converged"


def nested_numeraire_convergence(
    sets: Sequence[ConvexSetSpec],
    direction: str,
    limit_set: ConvexSetSpec,
    tol: float = 1e-9,
    limit_candidate: Optional[Sequence[Number]] = None,
    max_iters: int = 10_000,
) -> NestedReport:
    """Numéraires of a monotone sequence of sets against the numéraire of the limit set.

    ``limit_candidate`` is the in-probability limit of the numéraires when it
    is known in closed form; otherwise the last numéraire stands in for it.
    """
    if direction not in ("increasing", "decreasing"):
        raise StructuralError(f"direction must be increasing or decreasing, got {direction!r}")
    if not sets:
        raise StructuralError("need at least one set")
    space = limit_set.space
    methods = []
    for a, b in zip(sets, sets[1:]):
        big, small = (b, a) if direction == "increasing" else (a, b)
        how = containment(big, small)
        if how is None:
            raise StructuralError("sets are not nested in the stated direction")
        methods.append(how)
    edge = (sets[-1], limit_set) if direction == "increasing" else (limit_set, sets[-1])
    how = containment(edge[1], edge[0])
    if how is None:
        raise StructuralError("limit set is not nested with the sequence")
    methods.append(how)
    notes = []
    if "lp" in methods:
        notes.append("containment established by linear feasibility, not syntactically")

    fhats = [solve_numeraire(c, None, max_iters).fhat for c in sets]
    hypothesis_ok = limit_set.has_strictly_positive()
    limit_res = solve_numeraire(limit_set, None, max_iters) if hypothesis_ok else formal_numeraire(limit_set, None, max_iters)
    limit_fhat = limit_res.fhat
    distances = [ky_fan_distance(f, limit_fhat, space) for f in fhats]

    if limit_candidate is not None:
        achieved = tuple(limit_candidate)
        notes.append("limit of the numéraires supplied in closed form")
    else:
        achieved = fhats[-1]
        notes.append("limit of the numéraires estimated by the last iterate")
    tail = [ky_fan_distance(f, achieved, space) for f in fhats]
    report = NestedReport(
        direction, "", fhats, limit_fhat, distances, methods,
        achieved_limit=achieved, achieved_distance=ky_fan_distance(achieved, limit_fhat, space),
        tail_distances=tail, notes=notes,
    )
    if not hypothesis_ok:
        report.status = "hypothesis-violated"
        report.notes.append("limit set has no strictly positive element (C∞ ∩ L0++ = ∅)")
        return report
    stable = None
    for n in range(len(distances) - 1, -1, -1):
        if distances[n] <= tol:
            stable = n
        else:
            break
    report.stabilized_index = stable
    report.status = "converged" if stable is not None else "not-converged"
    return report


# -- the decreasing-sequence counterexample on (0, 1] ---------------------

def counterexample_breakpoints(N: int) -> List[Fraction]:
    return sorted({Fraction(0), Fraction(1, 3), Fraction(1)} | {Fraction(k, k + 1) for k in range(1, N + 1)})


def counterexample_space(N: int) -> FiniteProbSpace:
    """(0, 1] with Lebesgue measure, cut at 1/3 and at k/(k+1) for k <= N."""
    if N < 1:
        raise StructuralError("N must be at least 1")
    bp = counterexample_breakpoints(N)
    labels = tuple(f"({a},{b}]" for a, b in zip(bp, bp[1:]))
    return FiniteProbSpace(labels, tuple(b - a for a, b in zip(bp, bp[1:])))


def _intervals(N):
    bp = counterexample_breakpoints(N)
    return list(zip(bp, bp[1:]))


def counterexample_fhat(n: int, N: int) -> RandomVariable:
    cut = Fraction(n, n + 1)
    out = []
    for a, b in _intervals(N):
        if b <= Fraction(1, 3):
            out.append(Fraction(1, 2))
        elif b <= cut:
            out.append(Fraction(1, n))
        else:
            out.append(Fraction(1))
    return tuple(out)


def counterexample_g(n: int, N: int) -> RandomVariable:
    return tuple(Fraction(1) if b <= Fraction(1, 3) else Fraction(1, 5 * n) for a, b in _intervals(N))


def counterexample_ratio(n: int) -> Fraction:
    """Closed form of E[g^n / f^n]."""
    return Fraction(2, 3) + Fraction(1, 5) * (Fraction(n, n + 1) - Fraction(1, 3)) + Fraction(1, 5 * n * (n + 1))


COUNTEREXAMPLE_BOUND = Fraction(2, 3) + Fraction(2, 15) + Fraction(1, 5)


@dataclass(frozen=True)
class CounterexampleInstance:
    n: int
    space: FiniteProbSpace
    cset: ConvexSetSpec
    fhat: RandomVariable
    g: RandomVariable
    ratio_expectation: Fraction
    closed_form: Fraction
    bound: Fraction


def counterexample_instance(n: int, N: int) -> CounterexampleInstance:
    if not 1 <= n <= N:
        raise StructuralError(f"need 1 <= n <= N, got n={n}, N={N}")
    space = counterexample_space(N)
    f, g = counterexample_fhat(n, N), counterexample_g(n, N)
    cset = ConvexSetSpec((f, g), space, (), solid=True)
    ratio = space.expectation(tuple(a / b for a, b in zip(g, f)))
    return CounterexampleInstance(n, space, cset, f, g, ratio, counterexample_ratio(n), COUNTEREXAMPLE_BOUND)


@dataclass(frozen=True)
class CounterexampleFamily:
    space: FiniteProbSpace
    instances: Tuple[CounterexampleInstance, ...]
    limit_set: ConvexSetSpec
    plim: RandomVariable
    limit_numeraire: RandomVariable


def counterexample_family(N: int) -> CounterexampleFamily:
    space = counterexample_space(N)
    instances = tuple(counterexample_instance(n, N) for n in range(1, N + 1))
    first = [i for i, (a, b) in enumerate(_intervals(N)) if b <= Fraction(1, 3)]
    ind = indicator(first, space.size)
    limit_set = ConvexSetSpec((ind,), space, (), solid=True)
    # pointwise limit on (0,1): 1/2 on (0,1/3], and 1/n -> 0 once n/(n+1) passes the point
    plim = tuple(Fraction(1, 2) * v for v in ind)
    return CounterexampleFamily(space, instances, limit_set, plim, ind)
