"""JSON scenario files.

Layout::

    {"space": {"atoms": [{"label": "u", "prob": "1/2"}, ...]},
     "grid": [0, 1],
     "filtration": [[["u", "d"]], [["u"], ["d"]]],
     "processes": {"stock": [[1, 1], [2, "1/2"]]},
     "sets": {"C": {"generators": ["stock", "cash@0", [1, 1]], "rays": [], "solid": false}},
     "market": {"generators": ["cash", "stock"], "strictly_positive": ["cash"]}}

Numbers may be JSON numbers or strings ``"p/q"``; decimal literals are read
as exact rationals. ``"inf"`` is accepted where infinite values make sense.
A set generator is a process name (terminal value), ``"name@k"`` (value at
grid index k) or an explicit per-atom vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Union

from .errors import StructuralError
from .market import MarketSpec
from .numeraire import ConvexSetSpec
from .prob import Filtration, FiniteProbSpace, Process, TimeGrid, as_process, as_rv


@dataclass
class Scenario:
    space: FiniteProbSpace
    grid: Optional[TimeGrid] = None
    filtration: Optional[Filtration] = None
    processes: Dict[str, Process] = field(default_factory=dict)
    sets: Dict[str, ConvexSetSpec] = field(default_factory=dict)
    market: Optional[MarketSpec] = None

    def process(self, name: str) -> Process:
        try:
            return self.processes[name]
        except KeyError:
            raise StructuralError(f"unknown process {name!r}") from None

    def get_set(self, name: str) -> ConvexSetSpec:
        try:
            return self.sets[name]
        except KeyError:
            raise StructuralError(f"unknown set {name!r}") from None

    def require_market(self) -> MarketSpec:
        if self.market is None:
            raise StructuralError("scenario has no market section")
        return self.market


def _exact_float(text: str) -> Fraction:
    return Fraction(Decimal(text))


def load_scenario(path: Union[str, Path]) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise StructuralError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(text)


def parse_scenario(text: str) -> Scenario:
    try:
        raw = json.loads(text, parse_float=_exact_float)
    except (ValueError, ArithmeticError) as exc:
        raise StructuralError(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise StructuralError("scenario must be a JSON object")
    return build_scenario(raw)


def _get(obj, key, kind, where):
    if key not in obj:
        raise StructuralError(f"{where}: missing {key!r}")
    val = obj[key]
    if not isinstance(val, kind):
        raise StructuralError(f"{where}: {key!r} has the wrong type")
    return val


def build_scenario(raw: dict) -> Scenario:
    sp = _get(raw, "space", dict, "scenario")
    atoms = _get(sp, "atoms", list, "space")
    try:
        labels = [a["label"] for a in atoms]
        probs = [a["prob"] for a in atoms]
    except (KeyError, TypeError) as exc:
        raise StructuralError("space.atoms entries need 'label' and 'prob'") from exc
    space = FiniteProbSpace(tuple(labels), tuple(probs))
    scen = Scenario(space)

    if "grid" in raw:
        scen.grid = TimeGrid(tuple(_get(raw, "grid", list, "scenario")))
    if "filtration" in raw:
        parts = _get(raw, "filtration", list, "scenario")
        if scen.grid is not None and len(parts) != len(scen.grid):
            raise StructuralError("filtration length differs from the grid")
        scen.filtration = Filtration.from_labels(space, parts)
    elif scen.grid is not None:
        scen.filtration = Filtration.trivial(space.size, len(scen.grid))

    for name, slices in raw.get("processes", {}).items():
        if not isinstance(slices, list):
            raise StructuralError(f"process {name!r} must be a list of slices")
        proc = as_process(slices)
        for k, s in enumerate(proc):
            if len(s) != space.size:
                raise StructuralError(f"process {name!r} slice {k} has {len(s)} values, expected {space.size}")
        if scen.grid is not None and len(proc) != len(scen.grid):
            raise StructuralError(f"process {name!r} has {len(proc)} slices, grid has {len(scen.grid)}")
        scen.processes[name] = proc

    for name, body in raw.get("sets", {}).items():
        if not isinstance(body, dict):
            raise StructuralError(f"set {name!r} must be an object")
        gens = [_resolve_rv(scen, g) for g in _get(body, "generators", list, f"set {name!r}")]
        rays = [_resolve_rv(scen, r) for r in body.get("rays", [])]
        scen.sets[name] = ConvexSetSpec(tuple(gens), space, tuple(rays), bool(body.get("solid", False)))

    if "market" in raw:
        mk = raw["market"]
        if scen.grid is None:
            raise StructuralError("market section needs a grid")
        names = mk.get("generators", list(scen.processes))
        gens = {n: scen.process(n) for n in names}
        declared = mk.get("strictly_positive")
        scen.market = MarketSpec(space, scen.grid, scen.filtration, gens,
                                 tuple(declared) if declared is not None else None)
    return scen


def _resolve_rv(scen: Scenario, ref):
    if isinstance(ref, list):
        rv = as_rv(ref)
        if len(rv) != scen.space.size:
            raise StructuralError(f"vector {ref!r} has the wrong length")
        return rv
    if isinstance(ref, str):
        name, _, idx = ref.partition("@")
        proc = scen.process(name)
        if not idx:
            return proc[-1]
        try:
            return proc[int(idx)]
        except (ValueError, IndexError):
            raise StructuralError(f"bad grid index in {ref!r}") from None
    raise StructuralError(f"cannot resolve generator {ref!r}")
