"""Wealth-process sets closed under convex combination and switching.

A market is given by generator wealth processes on a time grid. The full set
of wealth processes is the smallest set containing the generators that is
convex and closed under switching, at a grid time and on an event observed
at that time, into a strictly positive process. Every check here ranges over
pure strategies: a base generator at time 0 followed, on each cell of each
later partition, by the strictly positive generator held over the next step.
Slices of the closure are the convex hulls of pure-strategy values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import DomainError, InstanceTooLarge, MeasurabilityError, StructuralError
from .gensup import CellViolation
from .numeraire import ConvexSetSpec, NumeraireResult, solve_numeraire
from .oracle import natural_filtration
from .prob import (
    INF,
    Filtration,
    FiniteProbSpace,
    Number,
    Process,
    RandomVariable,
    TimeGrid,
    as_process,
    is_adapted,
    rv_inv,
    ratio_conventional,
    rv_mul,
)

HOLD = "hold-current"
DEFAULT_MAX_STRATEGIES = 100_000


@dataclass(frozen=True)
class MarketSpec:
    space: FiniteProbSpace
    grid: TimeGrid
    filtration: Filtration
    generators: Mapping[str, Process]
    strictly_positive: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        gens = {str(k): as_process(v) for k, v in dict(self.generators).items()}
        object.__setattr__(self, "generators", gens)
        if not gens:
            raise StructuralError("market needs at least one generator")
        if len(self.filtration) != len(self.grid):
            raise StructuralError("filtration and grid differ in length")
        if self.filtration.n_atoms != self.space.size:
            raise StructuralError("filtration and space disagree on the atom count")
        for name, proc in gens.items():
            if len(proc) != len(self.grid):
                raise StructuralError(f"generator {name!r} has {len(proc)} slices, grid has {len(self.grid)}")
            for k, s in enumerate(proc):
                if len(s) != self.space.size:
                    raise StructuralError(f"generator {name!r} slice {k} has wrong length")
        if self.strictly_positive is not None:
            declared = tuple(self.strictly_positive)
            object.__setattr__(self, "strictly_positive", declared)
            for name in declared:
                if name not in gens:
                    raise StructuralError(f"unknown strictly positive generator {name!r}")

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self.generators)

    @property
    def K(self) -> int:
        return len(self.grid) - 1

    def process(self, name: str) -> Process:
        return self.generators[name]

    @property
    def switchable(self) -> Tuple[str, ...]:
        """Generators that are atomwise positive and finite at every time."""
        return tuple(
            n for n, proc in self.generators.items()
            if all(0 < v < INF for s in proc for v in s)
        )

    def with_filtration(self, filtration: Filtration) -> "MarketSpec":
        return MarketSpec(self.space, self.grid, filtration, self.generators, self.strictly_positive)


@dataclass(frozen=True)
class PureStrategy:
    """Base generator plus, for grid indices 1..k, the generator held on each cell (or HOLD)."""

    base: str
    choices: Tuple[Tuple[str, ...], ...] = ()

    def label(self) -> str:
        parts = [self.base] + ["|".join(c) for c in self.choices]
        return " > ".join(parts)


@dataclass
class MarketValidation:
    valid: bool
    violations: List[Tuple[str, str, Optional[int], Optional[int], str]]
    closure: Dict[str, str] = field(default_factory=lambda: {"c": "by construction", "d": "by construction"})


def validate_market(m: MarketSpec) -> MarketValidation:
    """Check that generators start at 1, stay nonnegative and include a strictly positive one."""
    violations = []
    for name, proc in m.generators.items():
        for atom, v in enumerate(proc[0]):
            if v != 1:
                violations.append(("a", name, 0, atom, f"{name} starts at {v}, not 1"))
        for k, s in enumerate(proc):
            for atom, v in enumerate(s):
                if v < 0 or v == INF or v != v:
                    violations.append(("a", name, k, atom, f"{name} has value {v}"))
    sp = m.switchable
    if not sp:
        violations.append(("b", "", None, None, "no strictly positive generator"))
    for name in m.strictly_positive or ():
        if name not in sp:
            proc = m.process(name)
            k, atom = next((k, a) for k, s in enumerate(proc) for a, v in enumerate(s) if not 0 < v < INF)
            violations.append(("b", name, k, atom, f"{name} is declared strictly positive but is {proc[k][atom]}"))
    return MarketValidation(not violations, violations)


def switch_compose(
    X: Sequence[Sequence[Number]],
    Xp: Sequence[Sequence[Number]],
    tau: int,
    A,
    filtration: Filtration,
) -> Process:
    """X before tau or off A; (X_tau / Xp_tau) Xp_t on A from tau on."""
    A = frozenset(A)
    if len(X) != len(filtration) or len(Xp) != len(filtration):
        raise StructuralError("processes do not match the filtration grid")
    if not 0 <= tau < len(filtration):
        raise StructuralError(f"switching index {tau} is off the grid")
    covered = frozenset().union(*[c for c in filtration.cells(tau) if c & A]) if A else frozenset()
    if covered != A:
        raise MeasurabilityError(f"event is not a union of cells at grid index {tau}")
    if any(not 0 < v < INF for s in Xp for v in s):
        raise DomainError("switching target must be strictly positive")
    out = []
    for k in range(len(X)):
        if k < tau:
            out.append(tuple(X[k]))
        else:
            out.append(tuple(
                X[tau][i] / Xp[tau][i] * Xp[k][i] if i in A else X[k][i]
                for i in range(len(X[k]))
            ))
    return tuple(out)


def change_numeraire(m: MarketSpec, name: str) -> MarketSpec:
    """Denominate every generator in units of the strictly positive generator ``name``."""
    if name not in m.switchable:
        raise DomainError(f"{name!r} is not a strictly positive generator")
    bar = m.process(name)
    gens = {
        n: tuple(tuple(x / y for x, y in zip(s, b)) for s, b in zip(proc, bar))
        for n, proc in m.generators.items()
    }
    return MarketSpec(m.space, m.grid, m.filtration, gens, m.strictly_positive)


# -- pure strategies ---------------------------------------------------------

def count_strategies(m: MarketSpec, upto: Optional[int] = None) -> int:
    """Number of pure strategies distinguished by choices before grid index ``upto``."""
    upto = m.K if upto is None else upto
    n_sp = len(m.switchable)
    filt = m.filtration

    def count(k, cell, frozen):
        # choices at index k on ``cell`` and at later indices below it
        if k >= upto:
            return 1
        total = 0
        options = [(True,)] * (1 if frozen else 0) + [(False,)] * n_sp
        for (fz,) in options:
            prod = 1
            if k + 1 < upto:
                for child in filt.cells(k + 1):
                    if child <= cell:
                        prod *= count(k + 1, child, fz)
            total += prod
        return total

    total = 0
    for name in m.names:
        frozen = name not in m.switchable
        prod = 1
        if upto > 1:
            for cell in filt.cells(1):
                prod *= count(1, cell, frozen)
        total += prod
    return total


def iter_strategies(m: MarketSpec, upto: Optional[int] = None, cap: int = DEFAULT_MAX_STRATEGIES) -> Iterator[Tuple[PureStrategy, Process]]:
    """Walk pure strategies and their wealth processes through grid index ``upto``."""
    upto = m.K if upto is None else upto
    total = count_strategies(m, upto)
    if total > cap:
        raise InstanceTooLarge(total, cap)
    sp = m.switchable
    n = m.space.size
    filt = m.filtration

    def step(k, held, frozen, wealth, choices):
        # wealth holds slices 0..k; the choice at k (k >= 1) decides the step k -> k+1
        if k == upto:
            yield PureStrategy(held_base, tuple(choices)), tuple(wealth)
            return
        cells = filt.cells(k) if k >= 1 else ()
        per_cell = []
        for cell in cells:
            atom = min(cell)
            per_cell.append(([HOLD] if frozen[atom] else []) + list(sp))
        for combo in _product(per_cell):
            h, fz = list(held), list(frozen)
            for cell, choice in zip(cells, combo):
                if choice != HOLD:
                    for i in cell:
                        h[i], fz[i] = choice, False
            nxt = []
            for i in range(n):
                proc = m.process(h[i])
                if fz[i]:
                    nxt.append(proc[k + 1][i])
                else:
                    nxt.append(wealth[-1][i] * proc[k + 1][i] / proc[k][i])
            yield from step(k + 1, h, fz, wealth + [tuple(nxt)], choices + ([tuple(combo)] if k >= 1 else []))

    for held_base in m.names:
        frozen0 = [held_base not in sp] * n
        start = [tuple(m.process(held_base)[0])]
        yield from step(0, [held_base] * n, frozen0, start, [])


def _product(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for tail in _product(lists[1:]):
            yield (head,) + tail


def _distinct(values) -> Tuple[RandomVariable, ...]:
    return tuple(dict.fromkeys(values))


def slice_set(m: MarketSpec, t: int, max_strategies: int = DEFAULT_MAX_STRATEGIES) -> ConvexSetSpec:
    """Generator polytope of the time-t values of all wealth processes."""
    if not 0 <= t <= m.K:
        raise StructuralError(f"grid index {t} out of range")
    return ConvexSetSpec(_distinct(proc[t] for _, proc in iter_strategies(m, t, max_strategies)), m.space)


# -- deflator ------------------------------------------------------------------

@dataclass(frozen=True)
class StrategyViolation:
    strategy: PureStrategy
    violation: CellViolation
    zero_wealth: bool  # the strategy is worth 0 somewhere in the cell at time s


@dataclass
class DeflatorReport:
    Y: Process
    slice_results: List[NumeraireResult]
    certificates: Dict[Tuple[int, int], List[Number]]
    violations: List[StrategyViolation]
    n_strategies: int
    adapted_natural: bool
    adapted_observed: bool
    worst: Number
    consistency_gap: float  # max |Xhat_t Y_t - 1| with Xhat the terminal numeraire process

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def time_consistent(self) -> bool:
        return self.consistency_gap <= 1e-9


def _cell_value(ratio, cell, probs):
    if any(ratio[i] == INF for i in cell):
        return INF
    return sum(probs[i] * ratio[i] for i in cell) / sum(probs[i] for i in cell)


def _certify(m: MarketSpec, Y, strategies, tol):
    K = m.K
    probs = m.space.probs
    certs: Dict[Tuple[int, int], List[Number]] = {
        (s, t): [0] * len(m.filtration.cells(s)) for s in range(K + 1) for t in range(s + 1, K + 1)
    }
    violations = []
    worst = 0
    seen = set()
    for strat, proc in strategies:
        if proc in seen:
            continue
        seen.add(proc)
        Z = tuple(rv_mul(y, x) for y, x in zip(Y, proc))
        for (s, t), row in certs.items():
            ratio = ratio_conventional(Z[t], Z[s])
            for j, cell in enumerate(m.filtration.cells(s)):
                v = _cell_value(ratio, cell, probs)
                if v > row[j]:
                    row[j] = v
                if v > worst:
                    worst = v
                if v > 1 + tol:
                    zero = any(proc[s][i] == 0 for i in cell)
                    violations.append(StrategyViolation(strat, CellViolation(s, t, cell, v), zero))
    return certs, violations, len(seen), worst


def verify_deflator(
    m: MarketSpec, Y: Sequence[Sequence[Number]], tol: float = 1e-9, max_strategies: int = DEFAULT_MAX_STRATEGIES
):
    """Cellwise E[Y_t X_t / (Y_s X_s) | F_s] over every pure strategy X.

    Returns ``(certificates, violations, n_strategies, worst)``; certificates
    holds, per grid pair (s, t), the cellwise maximum over strategies.
    """
    if len(Y) != len(m.grid):
        raise StructuralError("candidate deflator does not match the grid")
    return _certify(m, Y, iter_strategies(m, m.K, max_strategies), tol)


def _terminal_numeraire(m: MarketSpec, strategies, max_iters):
    K = m.K
    reps: Dict[RandomVariable, Tuple[PureStrategy, Process]] = {}
    for strat, proc in strategies:
        reps.setdefault(proc[K], (strat, proc))
    values = tuple(reps)
    res = solve_numeraire(ConvexSetSpec(values, m.space), None, max_iters)
    used = [(reps[v], w) for v, w in zip(values, res.weights) if w > 0]
    Xhat = tuple(
        tuple(sum(w * p[k][i] for (_, p), w in used) for i in range(m.space.size))
        for k in range(K + 1)
    )
    return res, [(s, w) for (s, _), w in used], Xhat


def _gap(X, Y) -> float:
    return max(abs(float(x * y) - 1.0) for xs, ys in zip(X, Y) for x, y in zip(xs, ys))


def construct_deflator(
    m: MarketSpec, tol: float = 1e-9, max_strategies: int = DEFAULT_MAX_STRATEGIES, max_iters: int = 10_000
) -> DeflatorReport:
    """Y_t := 1 / (numéraire of the time-t slice), verified on every pure strategy."""
    strategies = list(iter_strategies(m, m.K, max_strategies))
    results = []
    for k in range(m.K + 1):
        cset = ConvexSetSpec(_distinct(p[k] for _, p in strategies), m.space)
        results.append(solve_numeraire(cset, None, max_iters))
    Y = tuple(rv_inv(r.fhat) for r in results)
    certs, violations, n, worst = _certify(m, Y, strategies, tol)
    _, _, Xhat = _terminal_numeraire(m, strategies, max_iters)
    nat = natural_filtration(list(m.generators.values()), m.space.size)
    return DeflatorReport(
        Y, results, certs, violations, n,
        adapted_natural=is_adapted(Y, nat)[0],
        adapted_observed=is_adapted(Y, m.filtration)[0],
        worst=worst,
        consistency_gap=_gap(Xhat, Y),
    )


# -- numeraire wealth process ----------------------------------------------

@dataclass
class NumeraireWealth:
    process: Process
    mixture: List[Tuple[PureStrategy, Number]]


@dataclass
class NumeraireWealthReport:
    passed: bool
    inverse_gap: float  # max |Xhat_t Yhat_t - 1| against the slice deflator
    violations: List[StrategyViolation]
    terminal: NumeraireResult
    notes: List[str] = field(default_factory=list)


def numeraire_wealth(
    m: MarketSpec, tol: float = 1e-9, max_strategies: int = DEFAULT_MAX_STRATEGIES, max_iters: int = 10_000
) -> Tuple[NumeraireWealth, NumeraireWealthReport]:
    """Strictly positive X with X'/X a generalized supermartingale for every pure strategy X'.

    X is the mixture of pure strategies solving the terminal log problem;
    the report says whether the ratio property holds and how far X is from
    the inverse of the slice deflator.
    """
    strategies = list(iter_strategies(m, m.K, max_strategies))
    res, mixture, Xhat = _terminal_numeraire(m, strategies, max_iters)
    _, violations, _, _ = _certify(m, tuple(rv_inv(x) for x in Xhat), strategies, tol)
    slice_Y = []
    for k in range(m.K + 1):
        cset = ConvexSetSpec(_distinct(p[k] for _, p in strategies), m.space)
        slice_Y.append(rv_inv(solve_numeraire(cset, None, max_iters).fhat))
    gap = _gap(Xhat, slice_Y)
    notes = []
    if gap > tol:
        notes.append("terminal numéraire differs from the slice numéraires at an earlier time")
    if violations:
        notes.append("some pure strategy is not a generalized supermartingale in units of the numéraire")
    report = NumeraireWealthReport(not violations and gap <= tol, gap, violations, res, notes)
    return NumeraireWealth(Xhat, mixture), report


# -- NA1 ---------------------------------------------------------------------

@dataclass
class NA1Report:
    bound: RandomVariable
    bounded: bool
    na1: bool
    max_deflated_mean: Number
    markov: Dict[int, Number]
    markov_ok: bool
    converse_ok: bool
    deflator_passed: bool


def terminal_sup(m: MarketSpec) -> RandomVariable:
    """Atomwise supremum of terminal wealth by dynamic programming over the grid.

    Along a single atom the cell constraints do not bind, so the best growth
    from index k is the best one-step ratio among strictly positive
    generators times the best growth from k+1.
    """
    K = m.K
    sp = m.switchable
    n = m.space.size
    out = []
    for i in range(n):
        best = [Fraction(1)] * (K + 1)
        for k in range(K - 1, -1, -1):
            best[k] = max(m.process(j)[k + 1][i] / m.process(j)[k][i] for j in sp) * best[k + 1] if sp else best[k + 1]
        cand = [best[0]] if sp else []
        for name in m.names:
            proc = m.process(name)
            # hold the base up to k, then follow the best switching plan; k = K means never switch
            for k in range(1 if sp else K, K + 1):
                cand.append(proc[k][i] * best[k] if k < K else proc[K][i])
        out.append(max(cand))
    return tuple(out)


def na1_report(
    m: MarketSpec,
    tol: float = 1e-9,
    max_strategies: int = DEFAULT_MAX_STRATEGIES,
    levels=(1, 10, 100),
    deflator: Optional[DeflatorReport] = None,
) -> NA1Report:
    """Atomwise terminal bound, plus the Markov and converse cross-checks against the deflator."""
    bound = terminal_sup(m)
    bounded = all(v < INF for v in bound)
    defl = deflator if deflator is not None else construct_deflator(m, tol, max_strategies)
    YT = defl.Y[-1]
    K = m.K
    worst_mean = 0
    markov = {l: 0 for l in levels}
    for _, proc in iter_strategies(m, K, max_strategies):
        z = rv_mul(YT, proc[K])
        worst_mean = max(worst_mean, m.space.expectation(z))
        for l in levels:
            mass = sum(p for p, v in zip(m.space.probs, z) if v > l)
            markov[l] = max(markov[l], l * mass)
    markov_ok = all(v <= 1 + tol for v in markov.values())
    p_min = m.space.min_prob
    converse_ok = all(b <= (1 + tol) / (y * p_min) for b, y in zip(bound, YT))
    return NA1Report(bound, bounded, bounded, worst_mean, markov, markov_ok, converse_ok, defl.passed)
