"""Distributed best-response dynamics and equilibrium verification.

One iteration lets a single user re-optimize its covariance (and, in joint
mode, its serving BS) against the current prices; every BS then recomputes
its prices. Users are visited in sweeps, round-robin by default.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .best_response import select_best_bs
from .errors import MaxSweepsExceeded
from .linalg import hermitian_basis, hermitize, project_power_set
from .network import candidate_bs
from .pricing import all_prices, price_residual, prices_and_rates
from .rates import NetworkState, system_utility, user_rate, utility_from_rates

__all__ = [
    "MODES",
    "TraceRecord",
    "GameTrace",
    "GameResult",
    "NEReport",
    "candidate_lists",
    "init_state",
    "user_objective",
    "step",
    "run",
    "verify_ne",
    "fd_gradient",
    "kkt_residual",
]

log = logging.getLogger(__name__)

MODES = ("joint", "fixed")
INIT_SCALE = 0.9


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    user: int
    sum_utility: float
    assoc: tuple
    switches: int
    gap: float
    max_gap: float


@dataclass
class GameTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def sum_utility(self):
        return np.array([r.sum_utility for r in self.records])

    def is_monotone(self, tol=1e-9):
        f = self.sum_utility
        return bool(np.all(np.diff(f) >= -tol))

    def rows(self):
        """CSV-ready rows: iter, user, sum_utility_nats, sum_utility_bits_equiv, switches, max_gap."""
        ln2 = np.log(2.0)
        for r in self.records:
            yield (r.iteration, r.user, r.sum_utility, r.sum_utility / ln2, r.switches, r.max_gap)


@dataclass
class GameResult:
    state: NetworkState
    trace: GameTrace
    sweeps: int
    converged: bool
    initial_assoc: np.ndarray


@dataclass(frozen=True)
class NEReport:
    max_user_gap: float
    max_price_residual: float
    is_ne: bool
    user_gaps: np.ndarray


def candidate_lists(cfg, ch):
    return [candidate_bs(ch, n, cfg.candidate_bs_limit) for n in range(ch.num_users)]


def init_state(cfg, ch, rng=None):
    """Starting point of the dynamics; all prices are zero.

    ``cfg.init == "strongest"`` associates every user with its strongest BS
    and sets ``S_n = 0.9 * p_n / T_n * I``. ``"random"`` draws the BS from the
    candidate list and a random PSD covariance using ``rng``.
    """
    powers = cfg.powers
    cands = candidate_lists(cfg, ch)
    covs, assoc = [], []
    for n in range(ch.num_users):
        t = ch.tx(n)
        if cfg.init == "random":
            if rng is None:
                raise ValueError("random init needs an rng")
            x = rng.standard_normal((t, t)) + 1j * rng.standard_normal((t, t))
            s = x @ x.conj().T
            s *= rng.uniform(0.1, 1.0) * powers[n] / np.trace(s).real
            covs.append(hermitize(s))
            assoc.append(int(rng.choice(cands[n])))
        else:
            covs.append(INIT_SCALE * powers[n] / t * np.eye(t, dtype=complex))
            assoc.append(cands[n][0])
    return NetworkState.zero_prices(covs, np.array(assoc), ch.num_bs)


def user_objective(state, ch, n, specs, q=None, cov=None):
    """``f_n(R_n) - Tr[A_n S_n]`` at the state's prices, optionally at another (BS, covariance)."""
    if q is not None or cov is not None:
        state = state.replace_user(n, cov, q)
    price = state.total_price(n)
    s = state.covariances[n]
    return specs[n].value(user_rate(state, ch, n)) - float(np.real(np.vdot(price, s)))


def _best_response(state, ch, n, cfg, specs, mode, cands, hints=None):
    candidates = cands[n] if mode == "joint" else [int(state.assoc[n])]
    return select_best_bs(state, ch, n, candidates, specs, cfg.powers, cfg.bisection_eps, hints)


def _step(state, ch, cfg, n, mode, specs, cands, hints=None):
    current = user_objective(state, ch, n, specs)
    br = _best_response(state, ch, n, cfg, specs, mode, cands, hints)
    gap = br.value - current
    if gap > 0:
        new = state.replace_user(n, br.cov, br.bs)
    else:
        new = state.replace_user(n)
        gap = 0.0
    switched = bool(new.assoc[n] != state.assoc[n])
    new.prices, rates = prices_and_rates(new, ch, specs)
    return new, switched, gap, rates


def step(state, ch, cfg, n, mode="joint", specs=None, cands=None):
    """Let user ``n`` best-respond, then refresh every price.

    Returns ``(new_state, switched, gap)`` where ``gap`` is the user's
    objective improvement at the prices it faced. A response that does not
    improve the objective leaves the user's strategy untouched.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    specs = cfg.utility_specs() if specs is None else specs
    cands = candidate_lists(cfg, ch) if cands is None else cands
    return _step(state, ch, cfg, n, mode, specs, cands)[:3]


def run(cfg, ch, mode="joint", state=None, rng=None):
    """Iterate best responses until a sweep changes nothing material.

    Convergence: over one full sweep the largest per-user improvement is
    below ``cfg.convergence_eps`` and no user switched BS.

    Raises
    ------
    MaxSweepsExceeded
        After ``cfg.max_sweeps`` sweeps; carries the last state and trace.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    specs = cfg.utility_specs()
    cands = candidate_lists(cfg, ch)
    if state is None:
        state = init_state(cfg, ch, rng)
    # Price the starting point first: a response against all-zero prices
    # ignores the interference it causes and can lower the system utility.
    state = state.replace_user(0)
    state.prices = all_prices(state, ch, specs)
    initial_assoc = state.assoc.copy()
    trace = GameTrace()
    trace.records.append(TraceRecord(0, -1, system_utility(state, ch, specs), tuple(state.assoc), 0, 0.0, 0.0))
    order = np.arange(ch.num_users)
    # last power multiplier per (user, BS); seeds the next bracket
    hints = [{} for _ in range(ch.num_users)]
    it, total_switches = 0, 0
    for sweep in range(1, cfg.max_sweeps + 1):
        if cfg.user_order == "random":
            if rng is None:
                raise ValueError("random user order needs an rng")
            order = rng.permutation(ch.num_users)
        sweep_gap, sweep_switches = 0.0, 0
        for n in order:
            it += 1
            state, switched, gap, rates = _step(state, ch, cfg, int(n), mode, specs, cands, hints[n])
            sweep_gap = max(sweep_gap, gap)
            sweep_switches += switched
            total_switches += switched
            f = utility_from_rates(rates, specs)
            trace.records.append(TraceRecord(it, int(n), f, tuple(state.assoc), total_switches, gap, sweep_gap))
        log.debug("sweep %d: f=%.10g max_gap=%.3e switches=%d", sweep, f, sweep_gap, sweep_switches)
        if sweep_gap < cfg.convergence_eps and sweep_switches == 0:
            return GameResult(state, trace, sweep, True, initial_assoc)
    raise MaxSweepsExceeded(f"no convergence within {cfg.max_sweeps} sweeps", state, trace)


def verify_ne(state, ch, cfg, tol=1e-5, mode="joint"):
    """Check that no user gains more than ``tol`` by deviating and prices are current."""
    specs = cfg.utility_specs()
    cands = candidate_lists(cfg, ch)
    gaps = np.zeros(ch.num_users)
    for n in range(ch.num_users):
        br = _best_response(state, ch, n, cfg, specs, mode, cands)
        gaps[n] = max(br.value - user_objective(state, ch, n, specs), 0.0)
    resid = price_residual(state, ch, specs)
    max_gap = float(gaps.max())
    return NEReport(max_gap, resid, max_gap <= tol and resid <= tol, gaps)


def fd_gradient(func, base, step=None):
    """Central finite-difference Hermitian gradient of ``func`` at Hermitian ``base``.

    The step defaults to ``1e-5 * (1 + ||base||_F)``.
    """
    dim = base.shape[0]
    h = 1e-5 * (1.0 + np.linalg.norm(base)) if step is None else step
    grad = np.zeros((dim, dim), dtype=complex)
    r2 = np.sqrt(2.0)
    for i, j, kind, d in hermitian_basis(dim):
        deriv = (func(base + h * d) - func(base - h * d)) / (2.0 * h)
        if kind == "diag":
            grad[i, i] = deriv
        elif kind == "re":
            grad[i, j] += deriv / r2
            grad[j, i] += deriv / r2
        else:
            grad[i, j] += 1j * deriv / r2
            grad[j, i] -= 1j * deriv / r2
    return grad


def kkt_residual(state, ch, cfg):
    """Per-user KKT residual of the sum-utility problem at the state's association.

    With ``G`` the finite-difference gradient of the system utility in
    ``S_n``, the residual is ``||S_n - P(S_n + G)||_F`` (``P`` projects onto
    the user's feasible set) plus the complementarity slack
    ``tau * (p_n - Tr S_n)`` of that projection's trace multiplier.
    """
    specs = cfg.utility_specs()
    powers = cfg.powers
    out = np.zeros(ch.num_users)
    for n in range(ch.num_users):
        s_n = state.covariances[n]

        def f(cov, n=n):
            return system_utility(state.replace_user(n, cov), ch, specs)

        grad = fd_gradient(f, s_n)
        proj, tau = project_power_set(s_n + grad, powers[n])
        slack = max(powers[n] - np.trace(s_n).real, 0.0)
        out[n] = float(np.linalg.norm(s_n - proj)) + tau * slack
    return out
