import math

import numpy as np
import pytest

from hetnet_game import game
from hetnet_game.errors import ConfigError, TooLarge
from hetnet_game.gadget import (
    CROSS_GAIN,
    STRONG_GAIN,
    ThreeSatInstance,
    brute_force_max_sum_rate,
    build_network,
    check_reduction,
    format_verdict,
    frontier_value,
    parse_dimacs,
    two_user_frontier_check,
)
from hetnet_game.network import ScenarioConfig
from hetnet_game.rates import NetworkState, all_rates

from helpers import gadget_suite

SUITE = gadget_suite()
FIVE_LEVELS = (0.25, 0.5, 0.75, 1.0)


def mixed_clause():
    return ThreeSatInstance(3, (((0, False), (1, True), (2, False)),))


def test_counts():
    for _, sat, _ in SUITE:
        net = build_network(sat)
        assert net.num_bs == 3 * sat.num_clauses + sat.num_vars
        assert net.num_users == sat.num_clauses + 2 * sat.num_vars


def test_mixed_clause_channel_table():
    net = build_network(mixed_clause())
    g = net.gains
    c = [net.clause_bs(0, i) for i in range(3)]
    assert g[c[0], net.variable_user(0, negated=True)] == CROSS_GAIN
    assert g[c[1], net.variable_user(1, negated=False)] == CROSS_GAIN
    assert g[c[2], net.variable_user(2, negated=True)] == CROSS_GAIN
    np.testing.assert_array_equal(g[c, net.clause_user(0)], STRONG_GAIN)
    # the clause user sees nothing else
    assert np.count_nonzero(g[:, net.clause_user(0)]) == 3
    assert set(np.unique(g)) <= {0.0, 1.0, math.sqrt(7.0)}
    for n in range(3):
        for neg in (False, True):
            u = net.variable_user(n, neg)
            col = g[:, u]
            assert np.count_nonzero(col == STRONG_GAIN) == 1 and col[net.variable_bs(n)] == STRONG_GAIN
    assert net.user_name(net.variable_user(1, True)) == "~X2"


def test_lone_variable_rate_is_three_bits():
    res = brute_force_max_sum_rate(build_network(ThreeSatInstance(1, ())))
    assert res.max_rate_bits == 3.0


def test_shared_bs_pair_is_never_optimal():
    # both variable users at full power on their variable BS
    pair = 2.0 * math.log2(1.0 + 7.0 / 8.0)
    assert pair < 3.0


@pytest.mark.parametrize("name,sat,satisfiable", SUITE, ids=[s[0] for s in SUITE])
def test_reduction_suite(name, sat, satisfiable):
    check = check_reduction(sat)
    assert check.sat_decision == satisfiable
    assert check.rate_matches
    target = 3.0 * (sat.num_clauses + sat.num_vars)
    if satisfiable:
        assert abs(check.max_rate_bits - target) <= 1e-9
        assert sat.evaluate(check.assignment)
    else:
        assert check.max_rate_bits < target - 1e-9


@pytest.mark.parametrize("name,sat,satisfiable", SUITE[:4] + SUITE[5:], ids=[s[0] for s in SUITE[:4] + SUITE[5:]])
def test_five_level_grid_agrees_with_on_off(name, sat, satisfiable):
    net = build_network(sat)
    on_off = brute_force_max_sum_rate(net)
    grid = brute_force_max_sum_rate(net, FIVE_LEVELS)
    assert grid.max_rate_bits == pytest.approx(on_off.max_rate_bits, abs=1e-9)


@pytest.mark.parametrize("name,sat,satisfiable", SUITE[:6], ids=[s[0] for s in SUITE[:6]])
def test_optima_avoid_clause_bs_for_variable_users(name, sat, satisfiable):
    net = build_network(sat)
    res = brute_force_max_sum_rate(net, keep_optima=True)
    assert res.optima
    for cfg in res.optima:
        for u, (_, q) in enumerate(cfg):
            if net.is_variable_user(u) and q is not None:
                assert not net.is_clause_bs(q)


def test_brute_force_matches_rate_engine():
    # re-evaluate the optimum with the general MIMO rate code
    net = build_network(mixed_clause())
    res = brute_force_max_sum_rate(net)
    ch = net.to_channel_set()
    covs = [np.array([[p]], dtype=complex) for p, _ in res.config]
    assoc = [0 if q is None else q for _, q in res.config]
    rates = all_rates(NetworkState.zero_prices(covs, assoc, net.num_bs), ch)
    assert rates.sum() / math.log(2.0) == pytest.approx(res.max_rate_bits, abs=1e-9)


def test_gadget_network_runs_through_game():
    net = build_network(mixed_clause())
    ch = net.to_channel_set()
    cfg = ScenarioConfig(num_users=net.num_users, num_bs=net.num_bs, tx_antennas=1, rx_antennas=1, utility_kind="wsr",
                         power_budget=1.0, candidate_bs_limit=0, convergence_eps=1e-8)
    res = game.run(cfg, ch)
    assert res.trace.is_monotone()
    assert res.trace.records[-1].sum_utility / math.log(2.0) <= 12.0 + 1e-9


def test_frontier_values():
    chk = two_user_frontier_check()
    assert chk.f0 == 8.0 and chk.f1 == 3.75
    assert chk.sup_interior < 8.0
    assert chk.holds
    assert chk.argmin == pytest.approx((math.sqrt(42.0) - 1.0) / 7.0, abs=1e-4)
    # analytic derivative sign change at the same point
    p = (math.sqrt(42.0) - 1.0) / 7.0
    h = 1e-6
    assert frontier_value(p - h) > frontier_value(p) < frontier_value(p + h)


def test_parse_dimacs():
    sat = parse_dimacs("c example\np cnf 3 2\n1 -2 3 0\n-1 2 -3 0\n")
    assert sat.num_vars == 3 and sat.num_clauses == 2
    assert sat.clauses[0] == ((0, False), (1, True), (2, False))
    split = parse_dimacs("p cnf 3 1\n1 -2\n3 0\n")
    assert split.clauses == sat.clauses[:1]


@pytest.mark.parametrize(
    "text",
    [
        "1 2 3 0\n",
        "p cnf 3 2\n1 2 3 0\n",
        "p cnf 3 1\n1 2 0\n",
        "p cnf 3 1\n1 2 4 0\n",
        "p cnf 3 1\n1 2 3\n",
        "p dnf 3 1\n1 2 3 0\n",
        "p cnf 2 1\n1 1 2 0\n",
    ],
)
def test_parse_dimacs_errors(text):
    with pytest.raises(ConfigError):
        parse_dimacs(text)


def test_repeated_literals_need_opt_in():
    assert parse_dimacs("p cnf 2 1\n1 1 2 0\n", allow_repeats=True).num_clauses == 1


def test_too_large():
    sat = ThreeSatInstance(7, ())
    with pytest.raises(TooLarge):
        brute_force_max_sum_rate(build_network(sat))


def test_verdict_text():
    check = check_reduction(mixed_clause())
    text = format_verdict(check, build_network(mixed_clause()))
    first = text.splitlines()[0]
    assert first.startswith("reduction holds: formula satisfiable")
    assert "assignment:" in text and "configuration:" in text
