"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary and when this file is run as a script.
"""

import random
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from gsdeflator import gensup, harness, market, numeraire, oracle
from gsdeflator.prob import ky_fan_distance

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES = []

SEED = 0

# tolerances and budgets
CERT_TOL = 1e-10
GRID_RESOLUTION = 2000
GRID_OBJ_TOL = 1e-3
DEFLATOR_TOL = 1e-9
NESTED_TOL = 1e-9
INVARIANCE_TOL = 1e-9
MUTATION_EXCESS = 1e-3
KOMLOS_TOL = 1e-3
KOMLOS_LENGTH = 200
MARKOV_LEVELS = (1, 10, 100)


def _report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_counterexample_values():
    start = time.perf_counter()
    N = 10
    ok = True
    for n in range(1, N + 1):
        inst = numeraire.counterexample_instance(n, N)
        expected = Fraction(2, 3) + Fraction(1, 5) * (Fraction(n, n + 1) - Fraction(1, 3)) + Fraction(1, 5 * n * (n + 1))
        ok &= inst.ratio_expectation == expected and inst.ratio_expectation <= 1 and inst.bound <= 1
        ok &= numeraire.solve_numeraire(inst.cset).fhat == inst.fhat
    first = numeraire.counterexample_instance(1, N).ratio_expectation
    second = numeraire.counterexample_instance(2, N).ratio_expectation
    ok &= first == Fraction(4, 5) and second == Fraction(23, 30)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1.0
    assert _report(1, ok, f"n=1..{N} exact, E1={first}, E2={second}, {elapsed:.3f}s")


def test_criterion_2_nested_limit_distance():
    start = time.perf_counter()
    fam = numeraire.counterexample_family(10)
    rep = numeraire.nested_numeraire_convergence(
        [i.cset for i in fam.instances], "decreasing", fam.limit_set, NESTED_TOL, fam.plim
    )
    d = rep.achieved_distance
    elapsed = time.perf_counter() - start
    ok = rep.status == "hypothesis-violated" and abs(d - Fraction(1, 6)) <= NESTED_TOL and elapsed < 5.0
    assert _report(2, ok, f"distance {d}, status {rep.status}, {elapsed:.3f}s")


def test_criterion_3_solver_against_grid():
    start = time.perf_counter()
    rng = random.Random(SEED)
    worst_cert, worst_obj = 0.0, 0.0
    for _ in range(500):
        cset = harness.random_polytope(rng, max_gens=3, max_atoms=4)
        res = numeraire.solve_numeraire(cset)
        worst_cert = max(worst_cert, float(res.worst_certificate) - 1)
        _, _, obj = oracle.grid_numeraire(cset, GRID_RESOLUTION)
        worst_obj = max(worst_obj, abs(res.log_value - obj))
    elapsed = time.perf_counter() - start
    ok = worst_cert <= CERT_TOL and worst_obj <= GRID_OBJ_TOL and elapsed < 60.0
    assert _report(3, ok, f"500 polytopes, cert excess {worst_cert:.2e}, objective gap {worst_obj:.2e}, "
                          f"{elapsed:.1f}s (seed {SEED})")


def test_criterion_4_market_round_trip():
    start = time.perf_counter()
    rng = random.Random(SEED)
    failed, markov_bad, limited = 0, 0, 0
    for _ in range(200):
        m = harness.random_market(rng, max_atoms=4, max_periods=2, max_gens=3)
        defl = market.construct_deflator(m, DEFLATOR_TOL)
        rep = market.na1_report(m, DEFLATOR_TOL, levels=MARKOV_LEVELS, deflator=defl)
        if not defl.passed:
            failed += 1
            limited += not defl.adapted_observed or not defl.time_consistent
        markov_bad += not rep.markov_ok
    elapsed = time.perf_counter() - start
    ok = failed == 0 and markov_bad == 0 and elapsed < 120.0
    # left failing on purpose: see the known limitation in the README
    assert _report(4, ok, f"200 markets, {failed} deflator certificate failures "
                          f"({limited} time-inconsistent or unadapted), {markov_bad} Markov failures, "
                          f"{elapsed:.1f}s (seed {SEED})")


def _close(a, b):
    return all(abs(float(x) - float(y)) <= INVARIANCE_TOL for xs, ys in zip(a, b) for x, y in zip(xs, ys))


def test_criterion_5_invariance():
    rng = random.Random(SEED)
    perm_bad, change_bad, relation_bad, exact_slices, float_slices = 0, 0, 0, 0, 0
    for _ in range(50):
        m = harness.random_market(rng, max_atoms=4, max_periods=2, max_gens=3)
        X, _ = market.numeraire_wealth(m)
        names = list(m.names)
        rng.shuffle(names)
        shuffled = market.MarketSpec(m.space, m.grid, m.filtration, {n: m.process(n) for n in names})
        Xp, _ = market.numeraire_wealth(shuffled)
        perm_bad += not _close(X.process, Xp.process)

        bar_name = m.switchable[-1]
        bar = m.process(bar_name)
        changed = market.change_numeraire(m, bar_name)
        Xc, _ = market.numeraire_wealth(changed)
        expected = tuple(tuple(x / b for x, b in zip(xs, bs)) for xs, bs in zip(X.process, bar))
        change_bad += not _close(Xc.process, expected)

        d, dbar = market.construct_deflator(m), market.construct_deflator(changed)
        for k, (y, ybar, b) in enumerate(zip(d.Y, dbar.Y, bar)):
            expected = tuple(a * c for a, c in zip(y, b))
            # irrational optima cannot be snapped to rationals; those slices get the float tolerance
            if d.slice_results[k].exact and dbar.slice_results[k].exact:
                exact_slices += 1
                relation_bad += ybar != expected
            else:
                float_slices += 1
                relation_bad += not _close([ybar], [expected])
    ok = perm_bad == 0 and change_bad == 0 and relation_bad == 0
    assert _report(5, ok, f"50 markets, {perm_bad} permutation mismatches, {change_bad} numeraire-change "
                          f"mismatches, {relation_bad} deflator relation failures "
                          f"({exact_slices} exact slices, {float_slices} irrational slices), seed {SEED}")


def test_criterion_6_lemma_suites():
    gen = np.random.default_rng(SEED)
    counts = {"sandwich": 0, "sandwich-mutated": 0, "limit": 0, "limit-mutated": 0, "komlos": 0}
    for _ in range(100):
        space = harness.float_space(gen, int(gen.integers(2, 5)))
        g, h = harness.sandwich_instance(gen, space)
        counts["sandwich"] += gensup.sandwich_check(g, h, space).passed
        bad = harness.push_expectation(g, space, int(gen.integers(0, len(g))), MUTATION_EXCESS)
        rep = gensup.sandwich_check(bad, h, space)
        counts["sandwich-mutated"] += not rep.hypotheses_ok and not rep.passed

        seq = harness.discrete_limit_instance(gen, space)
        rep = gensup.discrete_limit_check(seq, space)
        counts["limit"] += rep.passed
        n = int(gen.integers(1, len(seq)))
        bad = harness.push_ratio(seq, space, n, int(gen.integers(0, n)), MUTATION_EXCESS)
        rep = gensup.discrete_limit_check(bad, space)
        counts["limit-mutated"] += not rep.hypotheses_ok and not rep.passed

        seq = harness.bounded_sequence(gen, 3, KOMLOS_LENGTH)
        kspace = harness.float_space(gen, 3)
        res = gensup.komlos_select(seq, kspace, KOMLOS_TOL)
        tail_ok = all(k >= i for i, k in enumerate(res.indices))
        terminal = ky_fan_distance(seq[res.indices[-1]], res.limit, kspace)
        counts["komlos"] += tail_ok and terminal < KOMLOS_TOL
    ok = all(v == 100 for v in counts.values())
    detail = ", ".join(f"{k} {v}/100" for k, v in counts.items())
    assert _report(6, ok, f"{detail} (seed {SEED})")


def test_criterion_7_classical_equivalence():
    rng = random.Random(SEED)
    agree, supermart = 0, 0
    for _ in range(100):
        n_atoms = rng.randint(1, 5)
        filt = harness.random_filtration(rng, n_atoms, rng.randint(2, 4))
        space = harness.random_space(rng, n_atoms)
        Z = harness.random_adapted_process(rng, filt)
        ours = gensup.check_generalized_supermartingale(Z, filt, space, tol=0).passed
        theirs = oracle.classical_supermartingale(Z, filt, space)
        agree += ours == theirs
        supermart += theirs
    ok = agree == 100
    assert _report(7, ok, f"{agree}/100 agree ({supermart} supermartingales) (seed {SEED})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
