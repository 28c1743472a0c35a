import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from gsdeflator import harness, market, oracle
from gsdeflator.errors import DomainError, InstanceTooLarge, MeasurabilityError
from gsdeflator.market import (
    MarketSpec,
    change_numeraire,
    construct_deflator,
    count_strategies,
    iter_strategies,
    na1_report,
    numeraire_wealth,
    slice_set,
    switch_compose,
    validate_market,
    verify_deflator,
)
from gsdeflator.numeraire import ConvexSetSpec, containment
from gsdeflator.prob import Filtration, FiniteProbSpace, TimeGrid
from gsdeflator.scenario import load_scenario

HALF = FiniteProbSpace(("u", "d"), (F(1, 2), F(1, 2)))
CASH = ((1, 1), (1, 1))
STOCK = ((1, 1), (2, F(1, 2)))


def binomial():
    filt = Filtration(((frozenset({0, 1}),), (frozenset({0}), frozenset({1}))), 2)
    return MarketSpec(HALF, TimeGrid((0, 1)), filt, {"cash": CASH, "stock": STOCK})


def cash_only(n_times=3):
    space = FiniteProbSpace.uniform(2)
    return MarketSpec(space, TimeGrid(tuple(range(n_times))), Filtration.trivial(2, n_times),
                      {"one": ((1, 1),) * n_times})


def two_period():
    """Four atoms, stock moves by 2 or 1/2 each period, two cells at t1."""
    space = FiniteProbSpace.uniform(4)
    filt = Filtration((
        (frozenset(range(4)),),
        (frozenset({0, 1}), frozenset({2, 3})),
        tuple(frozenset({i}) for i in range(4)),
    ), 4)
    stock = ((1, 1, 1, 1), (2, 2, F(1, 2), F(1, 2)), (4, 1, 1, F(1, 4)))
    cash = ((1, 1, 1, 1),) * 3
    return MarketSpec(space, TimeGrid((0, 1, 2)), filt, {"cash": cash, "stock": stock})


def full_information(m):
    n = m.space.size
    parts = (m.filtration.cells(0),) + tuple(tuple(frozenset({i}) for i in range(n)) for _ in range(m.K))
    return m.with_filtration(Filtration(parts, n))


# -- validation ---------------------------------------------------------------

def test_validate_examples(fixture_path):
    assert validate_market(cash_only()).valid
    rep = validate_market(load_scenario(fixture_path("bad_start.json")).market)
    assert not rep.valid and rep.violations[0][0] == "a"
    absorbing = MarketSpec(HALF, TimeGrid((0, 1)), binomial().filtration, {"x": ((1, 1), (0, 2))})
    rep = validate_market(absorbing)
    assert not rep.valid and rep.violations[0][0] == "b"


def test_declared_positive_must_be_positive():
    m = MarketSpec(HALF, TimeGrid((0, 1)), binomial().filtration,
                   {"cash": CASH, "x": ((1, 1), (0, 2))}, strictly_positive=("cash", "x"))
    rep = validate_market(m)
    assert not rep.valid and rep.violations[0][1] == "x"


# -- switching ---------------------------------------------------------------

def test_switch_compose_edge_cases():
    m = two_period()
    stock, cash = m.process("stock"), m.process("cash")
    assert switch_compose(cash, stock, 0, range(4), m.filtration) == stock
    assert switch_compose(cash, stock, 1, (), m.filtration) == cash


def test_switch_compose_matches_oracle_strategy():
    m = two_period()
    out = switch_compose(m.process("cash"), m.process("stock"), 1, {0, 1}, m.filtration)
    assert out == ((1, 1, 1, 1), (1, 1, 1, 1), (2, F(1, 2), 1, 1))
    wealths = {w for _, w in oracle.enumerate_strategies(m)}
    assert out in wealths


def test_switch_compose_rejects_non_cell_event():
    m = two_period()
    with pytest.raises(MeasurabilityError):
        switch_compose(m.process("cash"), m.process("stock"), 1, {0, 2}, m.filtration)


def test_switch_into_absorbing_process_is_refused():
    m = two_period()
    dead = ((1, 1, 1, 1), (1, 0, 1, 1), (1, 0, 1, 1))
    with pytest.raises(DomainError):
        switch_compose(m.process("cash"), dead, 1, {0, 1}, m.filtration)


# -- enumeration ---------------------------------------------------------------

def test_enumeration_counts():
    assert count_strategies(cash_only()) == len(oracle.enumerate_strategies(cash_only())) == 1
    assert count_strategies(binomial()) == 2
    assert len(oracle.enumerate_strategies(binomial())) == 2
    assert count_strategies(two_period()) == len(list(iter_strategies(two_period()))) == 8
    assert len(oracle.enumerate_strategies(two_period())) == 8


def test_enumeration_cap():
    with pytest.raises(InstanceTooLarge):
        list(iter_strategies(two_period(), cap=7))
    with pytest.raises(InstanceTooLarge):
        oracle.enumerate_strategies(two_period(), cap=7)


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_enumeration_matches_oracle(seed):
    m = harness.random_market(random.Random(seed))
    ours = list(iter_strategies(m))
    theirs = oracle.enumerate_strategies(m)
    assert len(ours) == count_strategies(m) == len(theirs)
    assert sorted(p for _, p in ours) == sorted(w for _, w in theirs)


# -- slices ---------------------------------------------------------------------

def test_slice_examples():
    m = binomial()
    assert slice_set(m, 0).generators == ((1, 1),)
    assert set(slice_set(m, 1).generators) == {(1, 1), (2, F(1, 2))}
    for t in range(3):
        assert slice_set(cash_only(), t).generators == ((1, 1),)


def _random_chain(m, rng, steps=4):
    """A wealth process from switches and convex mixtures of generators."""
    sp = m.switchable
    X = m.process(rng.choice(m.names))
    for _ in range(steps):
        if rng.random() < 0.5 and m.K >= 1:
            tau = rng.randint(0, m.K)
            cells = [c for c in m.filtration.cells(tau) if rng.random() < 0.5]
            A = frozenset().union(*cells) if cells else frozenset()
            X = switch_compose(X, m.process(rng.choice(sp)), tau, A, m.filtration)
        else:
            other = m.process(rng.choice(m.names))
            w = F(rng.randint(0, 4), 4)
            X = tuple(tuple(w * a + (1 - w) * b for a, b in zip(x, y)) for x, y in zip(X, other))
    return X


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_closure_values_lie_in_slices(seed):
    rng = random.Random(seed)
    m = harness.random_market(rng, zero_prob=0)
    X = _random_chain(m, rng)
    for t in range(m.K + 1):
        assert containment(slice_set(m, t), ConvexSetSpec((X[t],), m.space)) is not None


# -- deflator -------------------------------------------------------------------

def test_cash_only_deflator_is_one():
    rep = construct_deflator(cash_only())
    assert rep.passed and rep.Y == ((1, 1),) * 3 and rep.n_strategies == 1


def test_binomial_deflator():
    rep = construct_deflator(binomial())
    assert rep.passed
    assert rep.Y == ((1, 1), (F(2, 3), F(4, 3)))
    assert HALF.expectation(tuple(a * b for a, b in zip(rep.Y[1], STOCK[1]))) == 1
    assert HALF.expectation(rep.Y[1]) == 1
    assert rep.time_consistent and rep.adapted_observed


def test_binomial_under_limited_information():
    # stock revealed only at the end: the certificates are taken on the single time-0 cell
    m = binomial().with_filtration(Filtration.trivial(2, 2))
    rep = construct_deflator(m)
    assert rep.passed
    assert rep.certificates[(0, 1)] == [1]
    assert not rep.adapted_observed and rep.adapted_natural


def test_limited_info_fixture_reports_violation(fixture_path):
    m = load_scenario(fixture_path("limited_info.json")).market
    rep = construct_deflator(m)
    assert not rep.passed
    assert not rep.time_consistent
    v = rep.violations[0].violation
    assert v.value > 1 and v.s >= 1


def test_verify_deflator_flags_bad_candidate():
    m = binomial()
    _, violations, n, worst = verify_deflator(m, ((1, 1), (1, 1)))
    assert n == 2 and violations and worst == F(5, 4)


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_full_information_round_trip(seed):
    m = full_information(harness.random_market(random.Random(seed), zero_prob=0))
    rep = construct_deflator(m)
    assert rep.passed and rep.time_consistent
    X, wrep = numeraire_wealth(m)
    assert wrep.passed
    assert all(abs(float(x * y) - 1) <= 1e-9 for xs, ys in zip(X.process, rep.Y) for x, y in zip(xs, ys))


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_coarsening_keeps_a_passing_candidate_passing(seed):
    rng = random.Random(seed)
    fine = full_information(harness.random_market(rng, zero_prob=0))
    rep = construct_deflator(fine)
    if not rep.passed or not rep.adapted_observed:
        return
    parts = list(fine.filtration.partitions)
    cut = rng.randint(1, fine.K)
    coarse = fine.with_filtration(Filtration(
        tuple(parts[0] if k < cut else p for k, p in enumerate(parts)), fine.space.size))
    _, violations, _, _ = verify_deflator(coarse, rep.Y)
    assert not violations


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_change_of_numeraire_maps_deflator(seed):
    m = harness.random_market(random.Random(seed))
    name = m.switchable[0]
    bar = m.process(name)
    Y = construct_deflator(m)
    Ybar = construct_deflator(change_numeraire(m, name))
    for k, (y, yb, b) in enumerate(zip(Y.Y, Ybar.Y, bar)):
        expected = tuple(a * c for a, c in zip(y, b))
        if Y.slice_results[k].exact and Ybar.slice_results[k].exact:
            assert yb == expected
        else:
            assert all(abs(float(p) - float(q)) <= 1e-9 for p, q in zip(yb, expected))


def test_change_of_numeraire_needs_positive_generator():
    m = MarketSpec(HALF, TimeGrid((0, 1)), binomial().filtration, {"cash": CASH, "x": ((1, 1), (0, 2))})
    with pytest.raises(DomainError):
        change_numeraire(m, "x")


# -- numeraire wealth and NA1 ---------------------------------------------------

def test_numeraire_wealth_examples():
    X, rep = numeraire_wealth(cash_only())
    assert rep.passed and X.process == ((1, 1),) * 3
    X, rep = numeraire_wealth(binomial())
    assert rep.passed and X.process[1] == (F(3, 2), F(3, 4))
    assert sorted(w for _, w in X.mixture) == [F(1, 2), F(1, 2)]


def test_numeraire_wealth_permutation():
    m = two_period()
    X, _ = numeraire_wealth(m)
    swapped = MarketSpec(m.space, m.grid, m.filtration, {"stock": m.process("stock"), "cash": m.process("cash")})
    assert numeraire_wealth(swapped)[0].process == X.process


def test_na1_examples():
    rep = na1_report(cash_only())
    assert rep.bound == (1, 1) and rep.na1 and rep.markov_ok and rep.converse_ok
    rep = na1_report(binomial())
    assert rep.bound == (2, 1) and rep.max_deflated_mean == 1 and rep.markov_ok


def test_terminal_sup_matches_enumeration():
    rng = random.Random(17)
    for _ in range(40):
        m = harness.random_market(rng)
        best = [max(w[-1][i] for _, w in oracle.enumerate_strategies(m)) for i in range(m.space.size)]
        assert market.terminal_sup(m) == tuple(best)


@given(st.integers(0, 100_000))
@settings(max_examples=60, deadline=None)
def test_markov_and_converse_bounds(seed):
    m = harness.random_market(random.Random(seed))
    rep = na1_report(m)
    assert rep.markov_ok
    if rep.deflator_passed:
        assert rep.converse_ok and rep.max_deflated_mean <= 1 + 1e-9
