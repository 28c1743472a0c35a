"""Finite probability spaces, partition filtrations and extended random variables.

Random variables are plain tuples of per-atom values in [0, inf]. Values stay
exact (``int``/``Fraction``) as long as the inputs are exact; ``math.inf``
marks the infinite values produced by the division conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Tuple, Union

from .errors import DomainError, StructuralError

Number = Union[int, Fraction, float]
RandomVariable = Tuple[Number, ...]
Process = Tuple[RandomVariable, ...]
Partition = Tuple[frozenset, ...]

INF = math.inf
FLOAT_TOL = 1e-12


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def all_exact(values: Iterable) -> bool:
    return all(is_exact(v) for v in values)


def to_number(x) -> Number:
    """Parse ints, floats and ``"p/q"`` strings; exact inputs become ``Fraction``."""
    if isinstance(x, bool):
        raise StructuralError(f"boolean is not a number: {x!r}")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "infinity", "∞"):
            return INF
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError) as exc:
            raise StructuralError(f"cannot parse number {x!r}") from exc
    raise StructuralError(f"cannot parse number {x!r}")


@dataclass(frozen=True)
class FiniteProbSpace:
    atoms: Tuple[str, ...]
    probs: Tuple[Number, ...]

    def __post_init__(self):
        atoms = tuple(str(a) for a in self.atoms)
        probs = tuple(to_number(p) for p in self.probs)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        if not atoms:
            raise StructuralError("probability space needs at least one atom")
        if len(atoms) != len(probs):
            raise StructuralError("atoms and probs differ in length")
        if len(set(atoms)) != len(atoms):
            raise StructuralError("atom labels must be unique")
        for a, p in zip(atoms, probs):
            if not p > 0 or p == INF:
                raise StructuralError(f"atom {a!r} has non-positive probability {p}")
        total = sum(probs)
        if self.exact:
            if total != 1:
                raise StructuralError(f"probabilities sum to {total}, not 1")
        elif abs(total - 1) > FLOAT_TOL:
            raise StructuralError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def uniform(cls, n: int, labels: Optional[Sequence[str]] = None) -> "FiniteProbSpace":
        labels = labels if labels is not None else [f"w{i}" for i in range(n)]
        return cls(tuple(labels), tuple(Fraction(1, n) for _ in range(n)))

    @property
    def size(self) -> int:
        return len(self.atoms)

    @property
    def exact(self) -> bool:
        return all_exact(self.probs)

    @property
    def min_prob(self) -> Number:
        return min(self.probs)

    def index(self, label: str) -> int:
        try:
            return self.atoms.index(label)
        except ValueError:
            raise StructuralError(f"unknown atom label {label!r}") from None

    def expectation(self, rv: Sequence[Number]) -> Number:
        check_rv(rv, self.size)
        if any(v == INF for v in rv):
            return INF
        return sum(p * v for p, v in zip(self.probs, rv))

    def prob(self, event: Iterable[int]) -> Number:
        return sum((self.probs[i] for i in set(event)), Fraction(0))


@dataclass(frozen=True)
class TimeGrid:
    times: Tuple[Number, ...]

    def __post_init__(self):
        times = tuple(to_number(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if len(times) < 2:
            raise StructuralError("time grid needs at least two points")
        if times[0] != 0:
            raise StructuralError("time grid must start at 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise StructuralError("time grid must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def horizon(self) -> Number:
        return self.times[-1]


def _check_partition(cells: Sequence[Iterable[int]], n_atoms: int) -> Partition:
    part = tuple(frozenset(c) for c in cells)
    seen = set()
    for c in part:
        if not c:
            raise StructuralError("partition contains an empty cell")
        if seen & c:
            raise StructuralError("partition cells overlap")
        seen |= c
    if seen != set(range(n_atoms)):
        raise StructuralError("partition does not cover the atoms")
    return part


@dataclass(frozen=True)
class Filtration:
    """One partition of the atom indices per grid time, refining over time."""

    partitions: Tuple[Partition, ...]
    n_atoms: int
    require_trivial_start: bool = True

    def __post_init__(self):
        parts = tuple(_check_partition(p, self.n_atoms) for p in self.partitions)
        object.__setattr__(self, "partitions", parts)
        if not parts:
            raise StructuralError("filtration needs at least one partition")
        if self.require_trivial_start and len(parts[0]) != 1:
            raise StructuralError("partition at t0 must be trivial")
        for k in range(1, len(parts)):
            for cell in parts[k]:
                if not any(cell <= coarse for coarse in parts[k - 1]):
                    raise StructuralError(
                        f"partition at grid index {k} does not refine index {k - 1}"
                    )

    @classmethod
    def from_labels(cls, space: FiniteProbSpace, partitions) -> "Filtration":
        return cls(
            tuple(tuple(frozenset(space.index(a) for a in cell) for cell in part) for part in partitions),
            space.size,
        )

    @classmethod
    def trivial(cls, n_atoms: int, n_times: int) -> "Filtration":
        return cls(tuple((frozenset(range(n_atoms)),) for _ in range(n_times)), n_atoms)

    def __len__(self):
        return len(self.partitions)

    def cells(self, k: int) -> Partition:
        return self.partitions[k]

    def cell_index(self, k: int, atom: int) -> int:
        for j, cell in enumerate(self.partitions[k]):
            if atom in cell:
                return j
        raise StructuralError(f"atom {atom} not covered at grid index {k}")

    def is_coarser_than(self, other: "Filtration") -> bool:
        """True if every cell of ``other`` sits inside a cell of ``self`` at each time."""
        if len(other) != len(self) or other.n_atoms != self.n_atoms:
            return False
        return all(
            any(c <= big for big in mine)
            for mine, theirs in zip(self.partitions, other.partitions)
            for c in theirs
        )


def check_rv(rv: Sequence[Number], n_atoms: int) -> None:
    if len(rv) != n_atoms:
        raise StructuralError(f"random variable has {len(rv)} values, expected {n_atoms}")
    for v in rv:
        if v < 0 or v != v:
            raise DomainError(f"random variable value {v!r} is not in [0, inf]")


def as_rv(values: Iterable) -> RandomVariable:
    return tuple(to_number(v) for v in values)


def as_process(slices: Iterable[Iterable]) -> Process:
    return tuple(as_rv(s) for s in slices)


def cond_exp(rv: Sequence[Number], partition: Sequence[Iterable[int]], space: FiniteProbSpace) -> RandomVariable:
    """E[rv | sigma(partition)], returned per atom. Infinite on a cell iff rv is infinite there."""
    check_rv(rv, space.size)
    part = _check_partition(partition, space.size)
    out = [None] * space.size
    for cell in part:
        if any(rv[i] == INF for i in cell):
            value = INF
        else:
            mass = sum(space.probs[i] for i in cell)
            value = sum(space.probs[i] * rv[i] for i in cell) / mass
        for i in cell:
            out[i] = value
    return tuple(out)


def ratio_conventional(num: Sequence[Number], den: Sequence[Number]) -> RandomVariable:
    """Pointwise num/den with 0/0 = 1 and x/0 = inf for x > 0."""
    if len(num) != len(den):
        raise StructuralError("ratio operands differ in length")
    out = []
    for a, b in zip(num, den):
        if a < 0 or b < 0 or b == INF:
            raise DomainError(f"ratio needs nonnegative operands and finite denominator, got {a}/{b}")
        if b == 0:
            out.append(Fraction(1) if a == 0 else INF)
        elif a == INF:
            out.append(INF)
        else:
            out.append(a / b)
    return tuple(out)


def ky_fan_distance(f: Sequence[Number], g: Sequence[Number], space: FiniteProbSpace) -> Number:
    """E[min(|f - g|, 1)]; metrizes convergence in probability."""
    if len(f) != space.size or len(g) != space.size:
        raise StructuralError("operands do not match the space")
    if any(v == INF for v in f) or any(v == INF for v in g):
        raise DomainError("Ky Fan distance needs finite values")
    return sum(p * min(abs(a - b), 1) for p, a, b in zip(space.probs, f, g))


@dataclass(frozen=True)
class AdaptednessViolation:
    time_index: int
    cell: frozenset


def is_adapted(proc: Sequence[Sequence[Number]], filtration: Filtration) -> Tuple[bool, Optional[AdaptednessViolation]]:
    """Each slice must be constant on each cell of the partition at its time."""
    if len(proc) != len(filtration):
        raise StructuralError(
            f"process has {len(proc)} slices but filtration has {len(filtration)} times"
        )
    for k, (slice_, part) in enumerate(zip(proc, filtration.partitions)):
        if len(slice_) != filtration.n_atoms:
            raise StructuralError(f"slice {k} has wrong length")
        for cell in part:
            if len({slice_[i] for i in cell}) > 1:
                return False, AdaptednessViolation(k, cell)
    return True, None


# small pointwise helpers used across modules

def rv_mul(a: Sequence[Number], b: Sequence[Number]) -> RandomVariable:
    return tuple(x * y for x, y in zip(a, b))


def rv_scale(c: Number, a: Sequence[Number]) -> RandomVariable:
    return tuple(c * x for x in a)


def rv_mix(weights: Sequence[Number], rvs: Sequence[Sequence[Number]]) -> RandomVariable:
    n = len(rvs[0])
    return tuple(sum(w * r[i] for w, r in zip(weights, rvs)) for i in range(n))


def rv_inv(a: Sequence[Number]) -> RandomVariable:
    out = []
    for x in a:
        if x == 0 or x == INF:
            raise DomainError("inverse needs strictly positive finite values")
        out.append(1 / x)
    return tuple(out)


def constant(c: Number, n: int) -> RandomVariable:
    return tuple(c for _ in range(n))


def indicator(event: Iterable[int], n: int) -> RandomVariable:
    ev = set(event)
    return tuple(Fraction(1) if i in ev else Fraction(0) for i in range(n))
