"""Command line entry point: ``gsdeflator <group> <command> [options]``.

Exit codes: 0 pass, 2 mathematical violation, 3 structural or parse error,
4 instance too large.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import gensup, harness, market, numeraire
from .errors import GsdError, StructuralError
from .prob import FiniteProbSpace, ky_fan_distance
from .scenario import load_scenario

EXIT_PASS, EXIT_VIOLATION, EXIT_STRUCTURAL, EXIT_TOO_LARGE = 0, 2, 3, 4


# -- report encoding -----------------------------------------------------------

def _num(x) -> Any:
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (Fraction, float, np.floating, np.integer)):
        f = float(x)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        if math.isnan(f):
            return "nan"
        return float(f"{f:.12g}")
    return x


def _exact(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".12g")


def encode(obj) -> Any:
    """Recursively turn report values into JSON-friendly, 12-significant-digit data."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(encode(v) for v in obj)
    return _num(obj)


def dumps(report: dict) -> str:
    return json.dumps(encode(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "yes" if x else "no"
    if x is None:
        return "-"
    v = _num(x)
    return v if isinstance(v, str) else format(v, ".12g")


def render_table(report: dict) -> str:
    """Plain-text rendering: scalars as key/value lines, row lists as aligned columns."""
    lines = []
    for key in sorted(report):
        val = report[key]
        if key == "rows" or (isinstance(val, list) and val and isinstance(val[0], dict)):
            continue
        if isinstance(val, (list, tuple)) and all(isinstance(v, str) for v in val):
            lines.append(f"{key}: " + "; ".join(val))
        elif isinstance(val, (list, tuple)):
            lines.append(f"{key}: " + " ".join(_fmt(v) if not isinstance(v, (list, tuple)) else "(" + " ".join(_fmt(u) for u in v) + ")" for v in val))
        elif isinstance(val, dict):
            lines.append(f"{key}: " + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(val.items())))
        else:
            lines.append(f"{key}: {_fmt(val)}")
    for key in sorted(report):
        val = report[key]
        if isinstance(val, list) and val and isinstance(val[0], dict):
            cols = list(val[0])
            cells = [[_fmt(r.get(c)) if not isinstance(r.get(c), (list, tuple)) else " ".join(_fmt(u) for u in r.get(c)) for c in cols] for r in val]
            widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
            lines.append("")
            lines.append(f"[{key}]")
            lines.append("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
            for row in cells:
                lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------------

def _cmd_numeraire_solve(args) -> tuple:
    scen = load_scenario(args.scenario)
    cset = scen.get_set(args.set)
    res = numeraire.solve_numeraire(cset, args.solver_tol, args.max_iters)
    check = numeraire.verify_certificate(res.fhat, cset, args.tol)
    report = {
        "command": "numeraire solve",
        "set": args.set,
        "fhat": list(res.fhat),
        "weights": list(res.weights),
        "certificate": list(res.certificate),
        "log_value": res.log_value,
        "iterations": res.iterations,
        "exact": res.exact,
        "passed": check.passed,
        "atoms": list(cset.space.atoms),
    }
    if res.exact:
        report["fhat_exact"] = [_exact(v) for v in res.fhat]
        report["certificate_exact"] = [_exact(v) for v in res.certificate]
    return report, EXIT_PASS if check.passed else EXIT_VIOLATION


def _cmd_numeraire_afk(args) -> tuple:
    scen = load_scenario(args.scenario)
    rep = numeraire.afk_witness(scen.get_set(args.set))
    report = {
        "command": "numeraire afk",
        "set": args.set,
        "bounded": rep.bounded,
        "witness": list(rep.witness) if rep.witness is not None else None,
        "per_atom_sup": list(rep.per_atom_sup),
    }
    # an arbitrage of the first kind is a finding, not a crash
    return report, EXIT_PASS if rep.bounded else EXIT_VIOLATION


def _cmd_gensup_check(args) -> tuple:
    scen = load_scenario(args.scenario)
    if scen.filtration is None:
        raise StructuralError("scenario needs a grid and filtration for gensup check")
    Z = scen.process(args.process)
    rep = gensup.check_generalized_supermartingale(Z, scen.filtration, scen.space, args.tol)
    report = {
        "command": "gensup check",
        "process": args.process,
        "passed": rep.passed,
        "worst": rep.worst,
        "violations": [
            {"s": v.s, "t": v.t, "cell": " ".join(scen.space.atoms[i] for i in sorted(v.cell)), "value": v.value}
            for v in rep.violations
        ],
        "resurrection_events": [
            {"s": s, "t": t, "atom": scen.space.atoms[i]} for s, t, i in rep.resurrection_events
        ],
    }
    return report, EXIT_PASS if rep.passed else EXIT_VIOLATION


def _market(args):
    return load_scenario(args.scenario).require_market()


def _violation_rows(m, violations, limit=50):
    rows = []
    for sv in violations[:limit]:
        v = sv.violation
        rows.append({
            "strategy": sv.strategy.label(),
            "s": v.s,
            "t": v.t,
            "cell": " ".join(m.space.atoms[i] for i in sorted(v.cell)),
            "value": v.value,
            "zero_wealth": sv.zero_wealth,
        })
    return rows


def _cmd_market_validate(args) -> tuple:
    m = _market(args)
    rep = market.validate_market(m)
    report = {
        "command": "market validate",
        "valid": rep.valid,
        "closure": rep.closure,
        "strictly_positive": list(m.switchable),
        "violations": [
            {"property": p, "generator": g, "time_index": k if k is not None else "", "atom": m.space.atoms[a] if a is not None else "", "message": msg}
            for p, g, k, a, msg in rep.violations
        ],
    }
    return report, EXIT_PASS if rep.valid else EXIT_VIOLATION


def _require_valid(m):
    rep = market.validate_market(m)
    if not rep.valid:
        raise StructuralError("invalid market: " + "; ".join(v[-1] for v in rep.violations))


def _cmd_market_deflator(args) -> tuple:
    m = _market(args)
    _require_valid(m)
    rep = market.construct_deflator(m, args.tol, args.max_strategies, args.max_iters)
    report = {
        "command": "market deflator",
        "passed": rep.passed,
        "Y": [list(y) for y in rep.Y],
        "n_strategies": rep.n_strategies,
        "worst_certificate": rep.worst,
        "adapted_natural": rep.adapted_natural,
        "adapted_observed": rep.adapted_observed,
        "time_consistent": rep.time_consistent,
        "consistency_gap": rep.consistency_gap,
        "certificates": [
            {"s": s, "t": t, "cell": " ".join(m.space.atoms[i] for i in sorted(cell)), "max_value": row[j]}
            for (s, t), row in sorted(rep.certificates.items())
            for j, cell in enumerate(m.filtration.cells(s))
        ],
        "violations": _violation_rows(m, rep.violations),
        "n_violations": len(rep.violations),
        "atoms": list(m.space.atoms),
    }
    return report, EXIT_PASS if rep.passed else EXIT_VIOLATION


def _cmd_market_numeraire(args) -> tuple:
    m = _market(args)
    _require_valid(m)
    X, rep = market.numeraire_wealth(m, args.tol, args.max_strategies, args.max_iters)
    report = {
        "command": "market numeraire",
        "passed": rep.passed,
        "Xhat": [list(x) for x in X.process],
        "mixture": [{"strategy": s.label(), "weight": w} for s, w in X.mixture],
        "inverse_gap": rep.inverse_gap,
        "violations": _violation_rows(m, rep.violations),
        "notes": rep.notes,
        "atoms": list(m.space.atoms),
    }
    return report, EXIT_PASS if rep.passed else EXIT_VIOLATION


def _cmd_market_na1(args) -> tuple:
    m = _market(args)
    _require_valid(m)
    rep = market.na1_report(m, args.tol, args.max_strategies)
    ok = rep.na1 and rep.markov_ok and rep.converse_ok
    report = {
        "command": "market na1",
        "bound": list(rep.bound),
        "bounded": rep.bounded,
        "na1": rep.na1,
        "max_deflated_mean": rep.max_deflated_mean,
        "markov": {str(k): v for k, v in rep.markov.items()},
        "markov_ok": rep.markov_ok,
        "converse_ok": rep.converse_ok,
        "deflator_passed": rep.deflator_passed,
        "atoms": list(m.space.atoms),
        "passed": ok,
    }
    return report, EXIT_PASS if ok else EXIT_VIOLATION


# -- demos ---------------------------------------------------------------------

def _cmd_demo_counterexample(args) -> tuple:
    N = args.n_max
    if N < 1:
        raise StructuralError("--n-max must be at least 1")
    rows = []
    ok = True
    for n in range(1, N + 1):
        inst = numeraire.counterexample_instance(n, N)
        res = numeraire.solve_numeraire(inst.cset, None, args.max_iters)
        match = inst.ratio_expectation == inst.closed_form
        within = inst.ratio_expectation <= inst.bound
        is_num = res.fhat == inst.fhat
        ok = ok and match and within and is_num
        rows.append({
            "n": n,
            "E[g/f]": _exact(inst.ratio_expectation),
            "closed_form": _exact(inst.closed_form),
            "value": inst.ratio_expectation,
            "bound": _exact(inst.bound),
            "within_bound": within,
            "solver_fhat_matches": is_num,
        })
    report = {"command": "demo counterexample", "n_max": N, "rows": rows, "passed": ok}
    return report, EXIT_PASS if ok else EXIT_VIOLATION


def _cmd_demo_nested(args) -> tuple:
    fam = numeraire.counterexample_family(args.n_max)
    rep = numeraire.nested_numeraire_convergence(
        [i.cset for i in fam.instances], "decreasing", fam.limit_set, args.tol, fam.plim, args.max_iters
    )
    expected = Fraction(1, 6)
    ok = rep.status == "hypothesis-violated" and abs(rep.achieved_distance - expected) <= 1e-9
    report = {
        "command": "demo nested",
        "status": rep.status,
        "achieved_limit": list(rep.achieved_limit),
        "limit_numeraire": list(rep.limit_numeraire),
        "achieved_distance": rep.achieved_distance,
        "achieved_distance_exact": _exact(rep.achieved_distance),
        "containment": rep.containment,
        "notes": rep.notes,
        "atoms": list(fam.space.atoms),
        "rows": [{"n": n + 1, "distance_to_limit_numeraire": d, "distance_to_plim": e}
                 for n, (d, e) in enumerate(zip(rep.distances, rep.tail_distances))],
        "passed": ok,
    }
    return report, EXIT_PASS if ok else EXIT_VIOLATION


def _seeded(args):
    return np.random.default_rng(args.seed)


def _cmd_demo_sandwich(args) -> tuple:
    gen = _seeded(args)
    space = harness.float_space(gen, 3)
    g, h = harness.sandwich_instance(gen, space, args.length)
    rep = gensup.sandwich_check(g, h, space, args.lemma_tol)
    rows = [{"n": n + 1, "d(gh,1)": a, "d(g,1)": b, "d(h,1)": c, "bound": d, "E[sqrt(gh)]": e, "E[(sqrt g - sqrt h)^2]": f}
            for n, (a, b, c, d, e, f) in enumerate(zip(rep.product_distances, rep.g_distances, rep.h_distances,
                                                        rep.bounds, rep.sqrt_product_means, rep.sqrt_gap_means))]
    report = {"command": "demo sandwich", "seed": args.seed, "hypotheses_ok": rep.hypotheses_ok,
              "passed": rep.passed, "notes": rep.notes, "rows": rows[:: max(1, args.length // 20)]}
    return report, EXIT_PASS if rep.passed else EXIT_VIOLATION


def _cmd_demo_komlos(args) -> tuple:
    gen = _seeded(args)
    seq = harness.bounded_sequence(gen, 3, args.length)
    space = FiniteProbSpace.uniform(3)
    res = gensup.komlos_select(seq, space, args.lemma_tol)
    ok = bool(res.distances) and res.distances[-1] < args.lemma_tol and all(k >= n for n, k in enumerate(res.indices))
    rows = [{"n": n, "k_n": k, "distance": d} for n, (k, d) in enumerate(zip(res.indices, res.distances))]
    report = {"command": "demo komlos", "seed": args.seed, "limit": list(res.limit),
              "terminal_distance": res.distances[-1], "passed": ok, "rows": rows[:: max(1, len(rows) // 20)]}
    return report, EXIT_PASS if ok else EXIT_VIOLATION


def _cmd_demo_discrete_limit(args) -> tuple:
    gen = _seeded(args)
    space = harness.float_space(gen, 3)
    seq = harness.discrete_limit_instance(gen, space, args.length)
    rep = gensup.discrete_limit_check(seq, space, args.lemma_tol)
    limit = rep.limit if rep.limit is not None else seq[-1]
    rows = [{"n": n, "tail_diameter": d, "distance_to_limit": ky_fan_distance(g, limit, space)}
            for n, (d, g) in enumerate(zip(rep.tail_diameters, seq))]
    report = {"command": "demo discrete-limit", "seed": args.seed, "hypotheses_ok": rep.hypotheses_ok,
              "passed": rep.passed, "hull_min": rep.hull_min, "worst_ratio": rep.worst_ratio,
              "cauchy_index": rep.cauchy_index, "limit": list(limit), "notes": rep.notes,
              "rows": rows[:: max(1, args.length // 20)]}
    return report, EXIT_PASS if rep.passed else EXIT_VIOLATION


# -- parser ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise StructuralError(f"usage error: {message}")


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_positive(float), default=1e-9, help="certificate tolerance (default 1e-9)")
    common.add_argument("--max-iters", type=_positive(int), default=10_000)
    common.add_argument("--max-strategies", type=_positive(int), default=100_000)
    common.add_argument("--output", choices=("json", "table"), default="json")
    common.add_argument("--report", metavar="PATH", help="also write the JSON report to PATH")
    common.add_argument("--seed", type=int, default=0)

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--scenario", required=True, metavar="FILE")

    parser = _Parser(prog="gsdeflator", description="Generalized supermartingale deflators on finite spaces.")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    num = groups.add_parser("numeraire", help="static numéraire problems").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = num.add_parser("solve", parents=[common, scen])
    p.add_argument("--set", required=True)
    p.add_argument("--solver-tol", type=_positive(float), default=None,
                   help="solver stopping tolerance (default 1e-10 exact, 1e-8 float)")
    p.set_defaults(func=_cmd_numeraire_solve)
    p = num.add_parser("afk", parents=[common, scen])
    p.add_argument("--set", required=True)
    p.set_defaults(func=_cmd_numeraire_afk)

    gs = groups.add_parser("gensup", help="generalized supermartingale checks").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = gs.add_parser("check", parents=[common, scen])
    p.add_argument("--process", required=True)
    p.set_defaults(func=_cmd_gensup_check)

    mk = groups.add_parser("market", help="wealth-process sets").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("validate", _cmd_market_validate), ("deflator", _cmd_market_deflator),
                       ("numeraire", _cmd_market_numeraire), ("na1", _cmd_market_na1)):
        mk.add_parser(name, parents=[common, scen]).set_defaults(func=func)

    demo = groups.add_parser("demo", help="worked examples").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = demo.add_parser("counterexample", parents=[common])
    p.add_argument("--n-max", type=int, default=10)
    p.set_defaults(func=_cmd_demo_counterexample)
    p = demo.add_parser("nested", parents=[common])
    p.add_argument("--n-max", type=int, default=10)
    p.set_defaults(func=_cmd_demo_nested)
    for name, func, length in (("sandwich", _cmd_demo_sandwich, 120), ("komlos", _cmd_demo_komlos, 200),
                               ("discrete-limit", _cmd_demo_discrete_limit, 80)):
        p = demo.add_parser(name, parents=[common])
        p.add_argument("--length", type=_positive(int), default=length)
        p.add_argument("--lemma-tol", type=_positive(float), default=1e-3 if name != "sandwich" else 1e-4)
        p.set_defaults(func=func)
    return parser


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        report, code = args.func(args)
    except GsdError as exc:
        stderr.write(f"gsdeflator: {exc}\n")
        return exc.exit_code if exc.exit_code in (EXIT_VIOLATION, EXIT_STRUCTURAL, EXIT_TOO_LARGE) else EXIT_STRUCTURAL
    text = dumps(report) if args.output == "json" else render_table(report)
    stdout.write(text)
    if args.report:
        try:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(dumps(report))
        except OSError as exc:
            stderr.write(f"gsdeflator: cannot write report: {exc}\n")
            return EXIT_STRUCTURAL
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
