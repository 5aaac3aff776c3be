"""Interference/received covariances, MMSE matrices, rates and system utility."""

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, SingularInterferenceCovariance, SingularReceivedCovariance
from .linalg import hermitize, inv_pd, logdet, psd_sqrt

__all__ = [
    "NetworkState",
    "RateReport",
    "interference_cov",
    "received_cov",
    "mmse_matrix",
    "user_rate",
    "user_rate_mmse",
    "received_covs",
    "all_rates",
    "utility_from_rates",
    "sum_utility",
    "system_utility",
]


@dataclass
class NetworkState:
    """One full game configuration.

    Attributes
    ----------
    covariances : list of ndarray
        ``S_n`` for every user, ``T_n x T_n``.
    assoc : ndarray of int
        Serving BS index (0-based) of every user.
    prices : list of list of ndarray
        ``prices[q][n]`` is the ``T_n x T_n`` price BS ``q`` charges user ``n``.
    """

    covariances: list
    assoc: np.ndarray
    prices: list

    def __post_init__(self):
        self.assoc = np.asarray(self.assoc, dtype=int)

    @classmethod
    def zero_prices(cls, covariances, assoc, num_bs):
        prices = [[np.zeros_like(s) for s in covariances] for _ in range(num_bs)]
        return cls(list(covariances), assoc, prices)

    @property
    def num_users(self):
        return len(self.covariances)

    def copy(self):
        return NetworkState(
            [s.copy() for s in self.covariances],
            self.assoc.copy(),
            [[t.copy() for t in row] for row in self.prices],
        )

    def replace_user(self, n, cov=None, bs=None):
        """Shallow copy with user ``n``'s covariance and/or association swapped."""
        covs = list(self.covariances)
        assoc = self.assoc.copy()
        if cov is not None:
            covs[n] = cov
        if bs is not None:
            assoc[n] = bs
        return NetworkState(covs, assoc, self.prices)

    def total_price(self, n):
        """``A_n``: the sum over BSs of the prices charged to user ``n``."""
        return sum(row[n] for row in self.prices)


@dataclass(frozen=True)
class RateReport:
    per_user_rate: np.ndarray
    per_user_utility: np.ndarray
    sum_utility: float

    @property
    def per_user_rate_bits(self):
        return self.per_user_rate / np.log(2.0)


def _eye(k):
    return np.eye(k, dtype=complex)


def interference_cov(state, ch, n, q=None):
    """Interference-plus-noise covariance user ``n`` sees at BS ``q``.

    ``q`` defaults to the user's current BS; passing another BS gives the
    covariance the user would face *if* it selected that BS.
    """
    q = state.assoc[n] if q is None else q
    if ch.stacked is not None:
        h = ch.H[q][n]
        return hermitize(received_cov(state, ch, q) - h @ state.covariances[n] @ h.conj().T)
    c = ch.noise[q] * _eye(ch.rx(q))
    for m, s in enumerate(state.covariances):
        if m != n:
            h = ch.H[q][m]
            c = c + h @ s @ h.conj().T
    return hermitize(c)


def received_cov(state, ch, q):
    """Total received covariance ``sigma_q^2 I + sum_l H_ql S_l H_ql^H`` at BS ``q``."""
    g = ch.noise[q] * _eye(ch.rx(q))
    if ch.stacked is not None:
        hs = ch.stacked[q]
        g = g + (hs @ np.asarray(state.covariances) @ np.swapaxes(hs, -1, -2).conj()).sum(axis=0)
        return hermitize(g)
    for m, s in enumerate(state.covariances):
        h = ch.H[q][m]
        g = g + h @ s @ h.conj().T
    return hermitize(g)


def mmse_matrix(state, ch, n, g_inv=None):
    """``E_n = I - (S^1/2)^H H^H G^-1 H S^1/2`` at the user's serving BS."""
    q = state.assoc[n]
    h = ch.H[q][n]
    if g_inv is None:
        try:
            g_inv = inv_pd(received_cov(state, ch, q))
        except NotPositiveDefinite as exc:
            raise SingularReceivedCovariance(f"G_{q} is singular") from exc
    hp = h @ psd_sqrt(state.covariances[n])
    return hermitize(_eye(h.shape[1]) - hp.conj().T @ g_inv @ hp)


def user_rate(state, ch, n, q=None):
    """Achievable rate (nats) ``log|I + H S H^H C^-1|`` of user ``n`` at BS ``q``.

    Evaluated as ``log|C + H S H^H| - log|C|``, which stays well defined for
    small non-PSD perturbations of ``S_n`` (used by finite differences).
    """
    q = state.assoc[n] if q is None else q
    c = interference_cov(state, ch, n, q)
    h = ch.H[q][n]
    try:
        return logdet(c + h @ state.covariances[n] @ h.conj().T) - logdet(c)
    except NotPositiveDefinite as exc:
        raise SingularInterferenceCovariance(f"C_{n} at BS {q} is singular") from exc


def user_rate_mmse(state, ch, n):
    """Rate via ``-log|E_n|``; equal to :func:`user_rate` for PSD covariances."""
    return -logdet(mmse_matrix(state, ch, n))


def received_covs(state, ch):
    """``G_q`` for every BS."""
    return [received_cov(state, ch, q) for q in range(ch.num_bs)]


def all_rates(state, ch, g=None):
    """Rates of every user at their serving BSs, sharing one ``G_q`` per BS.

    ``g`` optionally supplies the received covariances from
    :func:`received_covs`.
    """
    n_users = state.num_users
    rates = np.zeros(n_users)
    g_cache = {}
    for n in range(n_users):
        q = state.assoc[n]
        if q not in g_cache:
            g_q = received_cov(state, ch, q) if g is None else g[q]
            try:
                g_cache[q] = (g_q, logdet(g_q))
            except NotPositiveDefinite as exc:
                raise SingularReceivedCovariance(f"G_{q} is singular") from exc
        g_q, ld = g_cache[q]
        h = ch.H[q][n]
        try:
            rates[n] = ld - logdet(g_q - h @ state.covariances[n] @ h.conj().T)
        except NotPositiveDefinite as exc:
            raise SingularInterferenceCovariance(f"C_{n} is singular") from exc
    return rates


def utility_from_rates(rates, specs):
    return float(sum(spec.value(r) for spec, r in zip(specs, rates)))


def sum_utility(state, ch, specs):
    """Per-user rates and utilities plus the system utility ``sum_n f_n(R_n)``."""
    rates = all_rates(state, ch)
    utils = np.array([spec.value(r) for spec, r in zip(specs, rates)])
    return RateReport(rates, utils, float(utils.sum()))


def system_utility(state, ch, specs):
    return sum_utility(state, ch, specs).sum_utility
