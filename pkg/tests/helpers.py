"""Random instances and independent oracles shared by the test modules."""

import numpy as np

from hetnet_game.best_response import InnerProblem
from hetnet_game.linalg import project_power_set
from hetnet_game.network import ChannelSet, ScenarioConfig
from hetnet_game.pricing import all_prices
from hetnet_game.rates import NetworkState
from hetnet_game.utility import UTILITY_KINDS, UtilitySpec


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_psd(rng, dim, trace=1.0, rank=None):
    x = crandn(rng, dim, dim if rank is None else rank)
    s = x @ x.conj().T
    return 0.5 * (s + s.conj().T) * (trace / np.trace(s).real)


def random_pd(rng, dim, shift=0.5):
    return random_psd(rng, dim, float(dim)) + shift * np.eye(dim)


def random_channels(rng, num_users, num_bs, tx, rx, scale=(0.3, 1.5), noise=1.0):
    """``ChannelSet`` with CN entries and a random per-link amplitude."""
    h = [[rng.uniform(*scale) * crandn(rng, rx, tx) for _ in range(num_users)] for _ in range(num_bs)]
    return ChannelSet(h, np.full(num_bs, noise))


def random_state(rng, ch, powers, priced_specs=None):
    """Random full-rank covariances and associations; prices optional."""
    covs = [random_psd(rng, ch.tx(n), rng.uniform(0.2, 1.0) * powers[n]) for n in range(ch.num_users)]
    state = NetworkState.zero_prices(covs, rng.integers(0, ch.num_bs, ch.num_users), ch.num_bs)
    if priced_specs is not None:
        state.prices = all_prices(state, ch, priced_specs)
    return state


def game_instance(k, convergence_eps=1e-8):
    """The k-th random game instance: N <= 8, Q <= 4, T <= 2, R <= 4, utility cycling."""
    rng = np.random.default_rng([7, k])
    n = int(rng.integers(2, 9))
    q = int(rng.integers(2, 5))
    t = int(rng.integers(1, 3))
    r = int(rng.integers(max(t, 2), 5))
    cfg = ScenarioConfig(
        num_users=n,
        num_bs=q,
        tx_antennas=t,
        rx_antennas=r,
        utility_kind=UTILITY_KINDS[k % 3],
        snr_db=10.0,
        candidate_bs_limit=min(3, q),
        user_placement="uniform",
        convergence_eps=convergence_eps,
        max_sweeps=500,
    )
    return cfg, random_channels(rng, n, q, t, r)


def random_inner_problem(rng, kind=None, tx=None):
    t = int(rng.integers(1, 5)) if tx is None else tx
    r = int(rng.integers(t, 5))
    kind = UTILITY_KINDS[int(rng.integers(3))] if kind is None else kind
    h = crandn(rng, r, t) * rng.uniform(0.5, 2.0)
    c = random_pd(rng, r)
    a = random_psd(rng, t, rng.uniform(0.05, 1.0), rank=int(rng.integers(1, t + 1)))
    return InnerProblem(h, c, a, float(rng.uniform(0.5, 10.0)), UtilitySpec(kind, float(rng.uniform(0.5, 2.0))))


def frank_wolfe_gap(p, cov, grad=None):
    """Certified optimality gap ``max_{S feasible} <grad, S - cov>`` of a concave objective."""
    g = p.gradient(cov) if grad is None else grad
    top = max(float(np.linalg.eigvalsh(g).max()), 0.0)
    return p.power * top - float(np.real(np.vdot(g, cov)))


def projected_gradient_oracle(p, iters=50000, gap_tol=1e-9):
    """Maximize ``p.objective`` over ``{S >= 0, Tr S <= p.power}`` by accelerated projected gradient.

    Uses only ``p.objective``/``p.gradient`` and Euclidean projections, with a
    backtracking step and a monotone restart. Stops once the Frank-Wolfe gap
    certifies the value to within ``gap_tol``. Returns ``(S, value, gap)``.
    """
    t = p.tx
    x = p.power / t * np.eye(t, dtype=complex)
    fx = p.objective(x)
    y, x_prev, theta, step = x, x, 1.0, 1.0
    for _ in range(iters):
        g = p.gradient(y)
        fy = p.objective(y)
        while True:
            cand, _ = project_power_set(y + step * g, p.power)
            d = cand - y
            lower = fy + np.real(np.vdot(g, d)) - np.linalg.norm(d) ** 2 / (2.0 * step)
            fc = p.objective(cand)
            if fc >= lower - 1e-15:
                break
            step *= 0.5
        if fc < fx:
            if y is x:
                # no progress even from the accepted point: round-off floor
                break
            # restart momentum (and the step, which may have collapsed near
            # the boundary) from the last accepted point
            y, theta, step = x, 1.0, 1.0
            continue
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        x_prev, x, fx = x, cand, fc
        gap = frank_wolfe_gap(p, x)
        if gap < gap_tol:
            break
        y, _ = project_power_set(x + ((theta - 1.0) / theta_next) * (x - x_prev), p.power)
        theta = theta_next
        step *= 1.5
    return x, fx, frank_wolfe_gap(p, x)


def _lits(*spec):
    # 1-based signed literals as in DIMACS
    return tuple((abs(v) - 1, v < 0) for v in spec)


def gadget_suite():
    """Fixed 3-SAT instances (N <= 3, M <= 2): name, instance, satisfiable."""
    from hetnet_game.gadget import ThreeSatInstance

    return [
        ("lone_variable", ThreeSatInstance(1, ()), True),
        ("two_free_variables", ThreeSatInstance(2, ()), True),
        ("one_clause", ThreeSatInstance(3, (_lits(1, 2, 3),)), True),
        ("mixed_signs", ThreeSatInstance(3, (_lits(1, -2, 3),)), True),
        ("two_clauses", ThreeSatInstance(3, (_lits(1, -2, 3), _lits(-1, 2, -3))), True),
        ("repeated_literals", ThreeSatInstance(2, (_lits(1, 1, 2), _lits(-1, -1, 2)), allow_repeats=True), True),
        ("x_and_not_x", ThreeSatInstance(1, (_lits(1, 1, 1), _lits(-1, -1, -1)), allow_repeats=True), False),
        ("x_and_not_x_padded", ThreeSatInstance(2, (_lits(1, 1, 1), _lits(-1, -1, -1)), allow_repeats=True), False),
    ]
