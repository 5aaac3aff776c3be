import numpy as np
import pytest

from hetnet_game.errors import InfeasibleDirection
from hetnet_game.game import fd_gradient
from hetnet_game.linalg import hermitize
from hetnet_game.network import ChannelSet
from hetnet_game.pricing import (
    _prices_and_rates_looped,
    all_prices,
    lemma2_convexity_probe,
    price_matrix,
    price_residual,
    prices_and_rates,
)
from hetnet_game.rates import NetworkState, all_rates
from hetnet_game.utility import UTILITY_KINDS, UtilitySpec

from helpers import crandn, random_channels, random_psd, random_state


def served_utility(state, ch, specs, q, n):
    """``S_n -> sum_{m in N_q minus n} f_m(R_m)`` for finite differences."""
    served = [m for m in np.flatnonzero(state.assoc == q) if m != n]

    def f(cov):
        rates = all_rates(state.replace_user(n, cov), ch)
        return sum(specs[m].value(rates[m]) for m in served)

    return f


def test_scalar_pair_price():
    ch = ChannelSet([[np.ones((1, 1)), np.ones((1, 1))]], [1.0])
    state = NetworkState.zero_prices([np.eye(1, dtype=complex)] * 2, [0, 0], 1)
    specs = [UtilitySpec()] * 2
    assert price_matrix(state, ch, 0, 0, specs)[0, 0].real == pytest.approx(1.0 / 6.0)
    # independent closed form: -dR_2/ds_1 = s_2 / ((1 + s_1)(1 + s_1 + s_2))
    assert all_prices(state, ch, specs)[0][1][0, 0].real == pytest.approx(1.0 / 6.0)


def test_single_user_prices_are_zero():
    rng = np.random.default_rng(0)
    ch = random_channels(rng, 1, 3, 2, 2)
    state = random_state(rng, ch, np.ones(1))
    for row in all_prices(state, ch, [UtilitySpec("proportional_fair")]):
        np.testing.assert_array_equal(row[0], 0.0)


def test_zero_channel_gives_zero_price():
    rng = np.random.default_rng(1)
    ch = random_channels(rng, 3, 2, 2, 3)
    h = [list(row) for row in ch.H]
    h[1][2] = np.zeros((3, 2))
    ch = ChannelSet(h, ch.noise)
    state = random_state(rng, ch, np.ones(3))
    state.assoc[:] = [1, 1, 0]
    np.testing.assert_allclose(all_prices(state, ch, [UtilitySpec()] * 3)[1][2], 0.0, atol=1e-15)


@pytest.mark.parametrize("seed", range(6))
def test_price_matches_finite_difference(seed):
    rng = np.random.default_rng([21, seed])
    ch = random_channels(rng, 4, 2, 2, 2)
    specs = [UtilitySpec(UTILITY_KINDS[(seed + k) % 3], rng.uniform(0.5, 2.0)) for k in range(4)]
    state = random_state(rng, ch, np.full(4, 3.0))
    state.assoc[:] = [0, 0, 1, 0]
    prices = all_prices(state, ch, specs)
    for q in range(2):
        for n in range(4):
            fd = -fd_gradient(served_utility(state, ch, specs, q, n), state.covariances[n])
            scale = max(np.linalg.norm(prices[q][n]), 1e-12)
            assert np.linalg.norm(prices[q][n] - fd) <= 1e-5 * scale + 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_prices_psd_and_residual_zero(seed):
    rng = np.random.default_rng([22, seed])
    ch = random_channels(rng, 5, 3, 2, 3)
    specs = [UtilitySpec("harmonic_mean")] * 5
    state = random_state(rng, ch, np.full(5, 4.0), priced_specs=specs)
    assert price_residual(state, ch, specs) == 0.0
    for n in range(5):
        assert np.linalg.eigvalsh(state.total_price(n)).min() >= -1e-12
        for q in range(3):
            assert np.linalg.eigvalsh(state.prices[q][n]).min() >= -1e-12


def test_price_for_user_independent_of_own_association():
    rng = np.random.default_rng(5)
    ch = random_channels(rng, 4, 3, 2, 3)
    specs = [UtilitySpec("proportional_fair")] * 4
    state = random_state(rng, ch, np.ones(4))
    state.assoc[:] = [0, 1, 2, 0]
    base = all_prices(state, ch, specs)
    # moving user 3 from BS 0 to BS 2 changes what it pays nowhere except through
    # the served sets it leaves or joins, which never include its own term
    moved = state.replace_user(3, bs=2)
    new = all_prices(moved, ch, specs)
    for q in range(3):
        np.testing.assert_allclose(new[q][3], base[q][3], atol=1e-12)


def test_batched_and_looped_prices_agree():
    rng = np.random.default_rng(6)
    ch = random_channels(rng, 6, 3, 2, 4)
    specs = [UtilitySpec(k) for k in UTILITY_KINDS * 2]
    state = random_state(rng, ch, np.full(6, 10.0))
    fast, r1 = prices_and_rates(state, ch, specs)
    slow, r2 = _prices_and_rates_looped(state, ch, specs)
    np.testing.assert_allclose(r1, r2, rtol=1e-12)
    for q in range(3):
        for n in range(6):
            np.testing.assert_allclose(fast[q][n], slow[q][n], rtol=1e-10, atol=1e-13)


def test_mixed_antennas_price_matches_finite_difference():
    rng = np.random.default_rng(7)
    h = [[crandn(rng, r, t) for t in (1, 2, 2)] for r in (2, 3)]
    ch = ChannelSet(h, [1.0, 0.5])
    specs = [UtilitySpec("proportional_fair")] * 3
    state = NetworkState.zero_prices([random_psd(rng, t) for t in (1, 2, 2)], [0, 0, 1], 2)
    prices = all_prices(state, ch, specs)
    fd = -fd_gradient(served_utility(state, ch, specs, 0, 2), state.covariances[2])
    np.testing.assert_allclose(prices[0][2], fd, rtol=1e-5, atol=1e-10)


def test_convexity_probe_zero_direction():
    rng = np.random.default_rng(8)
    ch = random_channels(rng, 3, 1, 2, 2)
    state = random_state(rng, ch, np.ones(3))
    d2 = lemma2_convexity_probe(state, ch, 0, 1, np.zeros((2, 2)), np.linspace(0.0, 1.0, 5))
    np.testing.assert_allclose(d2, 0.0, atol=1e-14)


def test_convexity_probe_scalar_closed_form():
    # scalar case: -E_1^-1(ref) E_1(s_2) = -(1 - s h^2 / (g + t b)) * const, convex in t
    ch = ChannelSet([[np.ones((1, 1)), np.array([[0.8]])]], [1.0])
    state = NetworkState.zero_prices([np.eye(1, dtype=complex)] * 2, [0, 0], 1)
    steps = np.linspace(0.0, 2.0, 9)
    d2 = lemma2_convexity_probe(state, ch, 0, 1, np.eye(1), steps)
    g = 1.0 + 1.0 + 0.64 * (1.0 + steps)
    e_ref = 1.0 - 1.0 / (1.0 + 1.0 + 0.64)
    vals = -(1.0 - 1.0 / g) / e_ref
    np.testing.assert_allclose(d2, np.diff(vals, 2), atol=1e-14)
    assert np.all(d2 > 0)


@pytest.mark.parametrize("seed", range(5))
def test_convexity_probe_random_directions(seed):
    rng = np.random.default_rng([23, seed])
    ch = random_channels(rng, 3, 1, 2, 2)
    state = random_state(rng, ch, np.full(3, 2.0))
    lam = np.linalg.eigvalsh(state.covariances[1]).min()
    for _ in range(20):
        d = hermitize(crandn(rng, 2, 2))
        d *= 0.9 * lam / np.abs(np.linalg.eigvalsh(d)).max()
        assert lemma2_convexity_probe(state, ch, 0, 1, d, np.linspace(-1.0, 1.0, 11)).min() >= -1e-7


def test_convexity_probe_rejects_infeasible():
    ch = ChannelSet([[np.ones((1, 1)), np.ones((1, 1))]], [1.0])
    state = NetworkState.zero_prices([np.eye(1, dtype=complex)] * 2, [0, 0], 1)
    with pytest.raises(InfeasibleDirection):
        lemma2_convexity_probe(state, ch, 0, 1, -np.eye(1), np.linspace(0.0, 2.0, 5))
    with pytest.raises(ValueError):
        lemma2_convexity_probe(state, ch, 0, 0, np.eye(1), np.linspace(0.0, 1.0, 5))
