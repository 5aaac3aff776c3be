"""Per-user best response: covariance optimization and BS selection.

For a fixed BS the user maximizes ``f(log|I + H S H^H C^-1|) - Tr[A S]`` over
``{S >= 0, Tr S <= p}``. The power constraint is dualized with multiplier
``mu``; for fixed ``mu`` the Lagrangian is whitened by ``A + mu I = L^H L``
and ``C = B B^H`` and diagonalized by the SVD ``B^-1 H L^-1 = F Delta M^H``.
The optimum of the whitened problem is diagonal with entries
``s_i = [c* - 1/Delta_ii^2]^+`` where the water level ``c*`` is the fixed
point ``c = alpha(rate(c))``, found by bisection. An outer bisection on
``mu`` then enforces the power budget.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketFailure,
    DegenerateRegularizer,
    NoPositiveGain,
    NotPositiveDefinite,
    SingularInterferenceCovariance,
)
from .linalg import cholesky_factor, hermitize, logdet
from .rates import interference_cov
from .utility import UtilitySpec

__all__ = [
    "MU_FLOOR",
    "InnerProblem",
    "DiagonalizedProblem",
    "BestResponse",
    "diagonalize",
    "solve_c_star",
    "water_levels",
    "solve_inner_covariance",
    "solve_user_covariance",
    "select_best_bs",
]

MU_FLOOR = 1e-10
MAX_DOUBLINGS = 60
BRACKET_FACTOR = 10.0
HINT_STEPS = 4


@dataclass(frozen=True)
class InnerProblem:
    """User problem at one candidate BS.

    Attributes
    ----------
    channel : ndarray
        Direct channel ``H`` (``R x T``).
    interference : ndarray
        Interference-plus-noise covariance ``C`` at the candidate BS (PD).
    price : ndarray
        Total price ``A = sum_q T_qn`` (PSD, ``T x T``).
    power : float
        Power budget.
    utility : UtilitySpec
    """

    channel: np.ndarray
    interference: np.ndarray
    price: np.ndarray
    power: float
    utility: UtilitySpec = field(default_factory=UtilitySpec)

    @property
    def tx(self):
        return self.channel.shape[1]

    def rate(self, cov):
        c = self.interference
        h = self.channel
        return logdet(c + h @ cov @ h.conj().T) - logdet(c)

    def objective(self, cov):
        """``f(R(S)) - Tr[A S]``."""
        return self.utility.value(self.rate(cov)) - float(np.real(np.vdot(self.price, cov)))

    def gradient(self, cov):
        """Hermitian gradient of :meth:`objective` with respect to ``S``."""
        h = self.channel
        k = self.interference + h @ cov @ h.conj().T
        a = self.utility.alpha(self.rate(cov))
        return hermitize(a * h.conj().T @ np.linalg.solve(k, h) - self.price)


@dataclass(frozen=True)
class DiagonalizedProblem:
    """Whitened and diagonalized Lagrangian at a fixed ``mu``.

    ``gains`` are the singular values ``Delta_ii`` (nonincreasing, padded with
    zeros to length ``T``); ``transform`` is ``L^-1 M`` so that a diagonal
    solution ``diag(s)`` maps back to ``S = transform diag(s) transform^H``.
    """

    gains: np.ndarray
    L: np.ndarray
    M: np.ndarray
    transform: np.ndarray
    c3: float = 0.0


@dataclass(frozen=True)
class BestResponse:
    cov: np.ndarray
    bs: int
    value: float
    values: dict


def _whiten_channel(p):
    # B^-1 H with C = B B^H; independent of mu, so callers may reuse it.
    try:
        b = cholesky_factor(p.interference)
    except NotPositiveDefinite as exc:
        raise SingularInterferenceCovariance("interference covariance is singular") from exc
    return np.linalg.solve(b, p.channel)


def diagonalize(p, mu, whitened=None):
    """Whiten the Lagrangian at ``mu`` and diagonalize it by an SVD.

    ``whitened`` optionally supplies ``B^-1 H`` from a previous call on the
    same problem.

    Raises
    ------
    DegenerateRegularizer
        If ``mu == 0`` and the price matrix is singular.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    t = p.tx
    try:
        # A + mu I = L^H L with L upper triangular, i.e. L = low^H
        low = cholesky_factor(p.price + mu * np.eye(t))
    except NotPositiveDefinite as exc:
        if mu == 0:
            raise DegenerateRegularizer("A is singular and mu == 0") from exc
        raise
    y = _whiten_channel(p) if whitened is None else whitened
    x = np.linalg.solve(low, y.conj().T).conj().T
    _, s, vh = np.linalg.svd(x, full_matrices=True)
    m = vh.conj().T
    gains = np.zeros(t)
    gains[: s.size] = s
    transform = np.linalg.solve(low.conj().T, m)
    return DiagonalizedProblem(gains, low.conj().T, m, transform)


def _rate_at(c, g2, c3):
    # sum_i log(c g_i / (1 - zeta_i(c))) with zeta_i(c) = [1 - c g_i]^+; terms
    # with c g_i <= 1 contribute log 1 = 0.
    total = c3
    for g in g2:
        cg = c * g
        if cg > 1.0:
            total += math.log(cg)
    return total


def solve_c_star(gains, utility, c3=0.0, eps=1e-8, trace=None):
    """Water level ``c*`` solving ``alpha(sum_i log(c Delta_i^2 / (1 - zeta_i(c))) + c3) = c``.

    For the weighted sum rate ``alpha`` is the constant weight and ``c* = w``
    with no search. Otherwise ``c`` is bracketed by doubling while the
    predicate ``alpha(rate(c)) > c`` holds, then refined with Brent's
    method; plain bisection finishes the job if the result is not yet
    within ``eps``. Pass a list as ``trace`` to record every
    ``(c, predicate)`` pair visited.

    Raises
    ------
    NoPositiveGain
        If every gain is zero.
    """
    g2 = [float(d) * float(d) for d in gains if d > 0]
    if not g2:
        raise NoPositiveGain("all effective gains are zero")
    if utility.kind == "wsr" or utility.weight == 0:
        return float(utility.weight)
    alpha = utility.alpha

    def excess(c):
        # alpha(rate(c)) - c, strictly decreasing in c
        a = alpha(_rate_at(c, g2, c3)) - c
        if trace is not None:
            trace.append((c, a > 0))
        return a

    lo, hi = 0.5, 1.0
    if excess(hi) > 0:
        for _ in range(4 * MAX_DOUBLINGS):
            lo, hi = hi, 2.0 * hi
            if not excess(hi) > 0:
                break
        else:
            raise BracketFailure("could not bracket c*")
    else:
        for _ in range(4 * MAX_DOUBLINGS):
            if excess(lo) > 0:
                break
            lo, hi = 0.5 * lo, lo
        else:
            # alpha(rate(c)) <= c even for tiny c: the level is numerically zero
            return lo

    c = brentq(excess, lo, hi, xtol=4.0 * math.ulp(hi), rtol=4 * np.finfo(float).eps, maxiter=200)
    a = excess(c)
    if abs(a) <= eps:
        return c
    if a > 0:
        lo = c
    else:
        hi = c
    while True:
        mid = 0.5 * (lo + hi)
        a = excess(mid)
        if abs(a) <= eps or hi - lo <= 4.0 * math.ulp(hi):
            return mid
        if a > 0:
            lo = mid
        else:
            hi = mid


def water_levels(gains, c):
    """``s_i = [c - 1/Delta_i^2]^+`` (zero where the gain vanishes)."""
    gains = np.asarray(gains, dtype=float)
    s = np.zeros_like(gains)
    pos = gains > 0
    s[pos] = np.maximum(c - 1.0 / gains[pos] ** 2, 0.0)
    return s


def solve_inner_covariance(p, mu, eps=1e-8, whitened=None):
    """Maximizer ``S(mu)`` of the Lagrangian over PSD matrices, and its trace."""
    dp = diagonalize(p, mu, whitened)
    try:
        c = solve_c_star(dp.gains, p.utility, dp.c3, eps)
    except NoPositiveGain:
        return np.zeros((p.tx, p.tx), dtype=complex), 0.0
    s = water_levels(dp.gains, c)
    w = dp.transform
    cov = hermitize((w * s) @ w.conj().T)
    trace = float(np.sum(s * np.sum(np.abs(w) ** 2, axis=0)))
    return cov, trace


def solve_user_covariance(p, eps=1e-8, mu_hint=None):
    """Optimal covariance and power multiplier ``(S*, mu*)`` of one user problem.

    If the unconstrained (``mu = 0``) maximizer already meets the budget it
    is returned with ``mu* = 0``. Otherwise ``mu`` is bracketed by decades
    starting from ``mu = 1`` and the root of ``Tr S(mu) = p`` is refined
    with Brent's method (``Tr S(mu)`` is nonincreasing). A residual
    overshoot is removed by rescaling, so the returned covariance is always
    feasible.

    ``mu_hint`` (e.g. the multiplier from a previous, similar problem)
    seeds a local bracket by doubling/halving; the search falls back to the
    default bracket when no sign change turns up within a few steps.
    """
    t = p.tx
    if not np.any(p.channel):
        return np.zeros((t, t), dtype=complex), 0.0
    y = _whiten_channel(p)
    evals = {}

    def excess(mu):
        if mu not in evals:
            evals[mu] = solve_inner_covariance(p, mu, eps, y)
        return evals[mu][1] - p.power

    lo = hi = None
    if mu_hint is not None and mu_hint > MU_FLOOR:
        # Tr S(lo) > p already rules out mu* = 0, so no mu = 0 solve is needed
        if excess(mu_hint) > 0:
            lo = mu_hint
            for k in range(1, HINT_STEPS + 1):
                if excess(mu_hint * 2.0**k) <= 0:
                    hi = mu_hint * 2.0**k
                    break
                lo = mu_hint * 2.0**k
        else:
            hi = mu_hint
            for k in range(1, HINT_STEPS + 1):
                if excess(mu_hint * 2.0**-k) > 0:
                    lo = mu_hint * 2.0**-k
                    break
                hi = mu_hint * 2.0**-k

    if lo is None or hi is None:
        try:
            mu0 = 0.0
            excess(mu0)
        except DegenerateRegularizer:
            mu0 = MU_FLOOR
            excess(mu0)
        if evals[mu0][1] <= p.power:
            return evals[mu0][0], 0.0
        lo, hi = mu0, 1.0
        if excess(hi) > 0:
            for _ in range(MAX_DOUBLINGS):
                lo, hi = hi, BRACKET_FACTOR * hi
                if excess(hi) <= 0:
                    break
            else:
                raise BracketFailure(f"Tr S(mu) still exceeds the budget at mu = {hi:g}")
        else:
            while hi / BRACKET_FACTOR > mu0:
                if excess(hi / BRACKET_FACTOR) > 0:
                    lo = hi / BRACKET_FACTOR
                    break
                hi = hi / BRACKET_FACTOR

    if abs(excess(hi)) < eps:
        mu = hi
    else:
        mu = brentq(excess, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
        if excess(mu) > eps and abs(excess(hi)) < abs(excess(mu)):
            mu = hi
    cov, tr = evals[mu]
    if tr > p.power:
        cov = cov * (p.power / tr)
    return cov, mu


def select_best_bs(state, ch, n, candidates, specs, powers, eps=1e-8, mu_hints=None):
    """Best joint (covariance, BS) response of user ``n`` at frozen prices.

    Each candidate BS gets its own inner problem with the interference the
    user would see there. Within ``eps`` of the best value the current BS
    is kept. ``mu_hints`` maps a BS to a multiplier guess and is updated in
    place with the multipliers found.
    """
    if not candidates:
        raise ValueError("candidates must be nonempty")
    price = state.total_price(n)
    spec = specs[n]
    results = {}
    for q in candidates:
        prob = InnerProblem(ch.H[q][n], interference_cov(state, ch, n, q), price, float(powers[n]), spec)
        hint = None if mu_hints is None else mu_hints.get(q)
        cov, mu = solve_user_covariance(prob, eps, hint)
        if mu_hints is not None:
            mu_hints[q] = mu
        results[q] = (cov, prob.objective(cov))
    values = {q: v for q, (_, v) in results.items()}
    best = max(candidates, key=lambda q: (values[q], -q))
    current = int(state.assoc[n])
    if current in results and values[current] >= values[best] - eps:
        best = current
    return BestResponse(results[best][0], int(best), values[best], values)
