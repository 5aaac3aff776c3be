"""Interference prices charged by each BS.

BS ``q`` charges user ``n`` the negative gradient, with respect to ``S_n``, of
the summed utility of the *other* users it serves::

    T_qn = H_qn^H [ sum_{m in N_q \\ n} alpha_m G_q^-1 H_qm P_m E_m^-1 P_m^H H_qm^H G_q^-1 ] H_qn

with ``P_m = S_m^{1/2}``. The matrix in brackets depends on ``n`` only through
the excluded term, so it is accumulated once per BS.
"""

import numpy as np

from .errors import (
    InfeasibleDirection,
    NotPositiveDefinite,
    SingularInterferenceCovariance,
    SingularReceivedCovariance,
)
from .linalg import hermitize, inv_pd, psd_sqrt
from .rates import all_rates, received_cov, received_covs

__all__ = [
    "served_terms",
    "price_matrix",
    "prices_and_rates",
    "all_prices",
    "price_residual",
    "mmse_trace_objective",
    "lemma2_convexity_probe",
]


def _g_inv(state, ch, q, g=None):
    try:
        return inv_pd(received_cov(state, ch, q) if g is None else g)
    except NotPositiveDefinite as exc:
        raise SingularReceivedCovariance(f"G_{q} is singular") from exc


def served_terms(state, ch, q, specs, rates=None, g=None):
    """Per-user terms ``alpha_m G^-1 H P E^-1 P^H H^H G^-1`` for users served by ``q``.

    ``P E^-1 P^H`` is evaluated as ``(I - S K)^-1 S`` with ``K = H^H G^-1 H``
    (push-through identity), which needs no matrix square root.

    Returns a dict ``{m: R_q x R_q matrix}``. ``g`` optionally supplies
    ``G_q``.
    """
    served = np.flatnonzero(state.assoc == q)
    if served.size == 0:
        return {}
    if rates is None:
        rates = all_rates(state, ch)
    g_inv = _g_inv(state, ch, q, g)
    terms = {}
    for m in served:
        h = ch.H[q][m]
        s_m = state.covariances[m]
        w = g_inv @ h
        # P E^-1 P^H = (I - S K)^-1 S with K = H^H G^-1 H, so no square root is needed
        k = h.conj().T @ w
        core = np.linalg.solve(np.eye(s_m.shape[0]) - s_m @ k, s_m)
        terms[m] = specs[m].alpha(rates[m]) * hermitize(w @ core @ w.conj().T)
    return terms


def price_matrix(state, ch, q, n, specs):
    """Price ``T_qn`` BS ``q`` charges user ``n`` at the current state (PSD)."""
    terms = served_terms(state, ch, q, specs)
    t = ch.tx(n)
    k = sum((v for m, v in terms.items() if m != n), np.zeros((ch.rx(q), ch.rx(q)), dtype=complex))
    h = ch.H[q][n]
    return hermitize(h.conj().T @ k @ h) if terms else np.zeros((t, t), dtype=complex)


def prices_and_rates(state, ch, specs):
    """All prices ``prices[q][n]`` together with the rates they were built from.

    Users not served by ``q`` are still charged for the interference they
    cause to the users ``q`` does serve.
    """
    if ch.block is not None:
        return _prices_and_rates_batched(state, ch, specs)
    return _prices_and_rates_looped(state, ch, specs)


def _prices_and_rates_looped(state, ch, specs):
    g = received_covs(state, ch)
    rates = all_rates(state, ch, g)
    prices = []
    for q in range(ch.num_bs):
        terms = served_terms(state, ch, q, specs, rates, g[q])
        total = sum(terms.values(), np.zeros((ch.rx(q), ch.rx(q)), dtype=complex))
        row = []
        for n in range(ch.num_users):
            h = ch.H[q][n]
            k = total - terms[n] if n in terms else total
            row.append(hermitize(h.conj().T @ k @ h))
        prices.append(row)
    return prices, rates


def _chol_logdet(m):
    # log-determinants of a stack of PD matrices
    low = np.linalg.cholesky(hermitize(m))
    return 2.0 * np.log(np.abs(np.diagonal(low, axis1=-2, axis2=-1))).sum(axis=-1)


def _prices_and_rates_batched(state, ch, specs):
    # Same quantities as the looped version, vectorized over BSs and users.
    h = ch.block  # (Q, N, R, T)
    hh = np.swapaxes(h, -1, -2).conj()
    covs = np.asarray(state.covariances)  # (N, T, T)
    num_bs, num_users, r, t = h.shape
    users = np.arange(num_users)
    assoc = state.assoc

    rx = h @ covs @ hh  # H_qn S_n H_qn^H
    g = hermitize(ch.noise[:, None, None] * np.eye(r) + rx.sum(axis=1))
    try:
        low_g = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise SingularReceivedCovariance("a received covariance is singular") from exc
    ld_g = 2.0 * np.log(np.abs(np.diagonal(low_g, axis1=-2, axis2=-1))).sum(axis=-1)
    try:
        ld_c = _chol_logdet(g[assoc] - rx[assoc, users])
    except np.linalg.LinAlgError as exc:
        raise SingularInterferenceCovariance("an interference covariance is singular") from exc
    rates = ld_g[assoc] - ld_c

    g_inv = hermitize(np.linalg.inv(g))
    h_own = h[assoc, users]  # (N, R, T)
    w = g_inv[assoc] @ h_own
    core = np.linalg.solve(np.eye(t) - covs @ (np.swapaxes(h_own, -1, -2).conj() @ w), covs)
    alpha = np.array([spec.alpha(rate) for spec, rate in zip(specs, rates)])
    terms = alpha[:, None, None] * hermitize(w @ core @ np.swapaxes(w, -1, -2).conj())
    onehot = (assoc[None, :] == np.arange(num_bs)[:, None]).astype(float)  # (Q, N)
    total = np.tensordot(onehot, terms, axes=(1, 0))  # (Q, R, R)
    k = total[:, None] - onehot[:, :, None, None] * terms[None]
    prices = hermitize(hh @ k @ h)
    return [list(row) for row in prices], rates


def all_prices(state, ch, specs):
    """Prices for every ``(q, n)`` pair, as ``prices[q][n]``."""
    return prices_and_rates(state, ch, specs)[0]


def price_residual(state, ch, specs):
    """Largest Frobenius gap between the stored prices and freshly computed ones."""
    fresh = all_prices(state, ch, specs)
    return max(
        float(np.linalg.norm(state.prices[q][n] - fresh[q][n]))
        for q in range(ch.num_bs)
        for n in range(ch.num_users)
    )


def mmse_trace_objective(state, ch, m, n, cov_n, e_inv_ref):
    """``-Tr[E_m(ref)^-1 E_m(S_n = cov_n, S_-n)]`` for fixed reference ``E_m^-1``."""
    q = state.assoc[m]
    g = received_cov(state, ch, q)
    h_n = ch.H[q][n]
    g = g + h_n @ (cov_n - state.covariances[n]) @ h_n.conj().T
    hp = ch.H[q][m] @ psd_sqrt(state.covariances[m])
    e = np.eye(hp.shape[1]) - hp.conj().T @ np.linalg.solve(g, hp)
    return -float(np.real(np.trace(e_inv_ref @ e)))


def lemma2_convexity_probe(state, ch, m, n, direction, steps):
    """Second differences of the weighted MMSE trace objective along ``S_n + t * direction``.

    ``steps`` is an equally spaced grid of ``t`` values; the result has
    ``len(steps) - 2`` entries, all nonnegative (up to round-off) when the
    objective is convex along the line.

    Raises
    ------
    InfeasibleDirection
        If ``S_n + t * direction`` leaves the PSD cone for some ``t``.
    """
    if m == n:
        raise ValueError("the probe needs two distinct users")
    steps = np.asarray(steps, dtype=float)
    direction = hermitize(direction)
    s_n = state.covariances[n]
    covs = [hermitize(s_n + t * direction) for t in steps]
    for t, c in zip(steps, covs):
        if np.linalg.eigvalsh(c).min() < -1e-12:
            raise InfeasibleDirection(f"S_n + {t:g} * D is not PSD")
    q = state.assoc[m]
    hp = ch.H[q][m] @ psd_sqrt(state.covariances[m])
    g = received_cov(state, ch, q)
    e_ref = np.eye(hp.shape[1]) - hp.conj().T @ np.linalg.solve(g, hp)
    e_inv_ref = np.linalg.inv(hermitize(e_ref))
    vals = np.array([mmse_trace_objective(state, ch, m, n, c, e_inv_ref) for c in covs])
    return np.diff(vals, 2)
