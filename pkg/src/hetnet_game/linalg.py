"""Dense complex linear algebra used by the rate, price and solver modules.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. A "Hermitian"
argument is any square array that is conjugate symmetric up to round-off;
functions that need exact symmetry call :func:`hermitize` first.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NotPositiveDefinite

__all__ = [
    "PIVOT_TOL",
    "hermitize",
    "is_hermitian",
    "cholesky_factor",
    "svd",
    "logdet",
    "psd_project",
    "psd_sqrt",
    "inv_pd",
    "project_power_set",
    "hermitian_basis",
    "solve_triangular",
]

PIVOT_TOL = 1e-12


def hermitize(m):
    """Return the Hermitian part ``(m + m^H) / 2`` (over the last two axes)."""
    m = np.asarray(m)
    return 0.5 * (m + np.swapaxes(m, -1, -2).conj())


def is_hermitian(m, atol=1e-12):
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m, m.conj().T, rtol=0.0, atol=atol)


def cholesky_factor(m):
    """Lower-triangular ``L`` with ``L @ L^H == m``.

    Raises
    ------
    NotPositiveDefinite
        If ``m`` is not positive definite or a pivot ``L_ii**2`` falls at or
        below ``PIVOT_TOL``.
    """
    m = np.asarray(m, dtype=complex)
    try:
        low = np.linalg.cholesky(hermitize(m))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    pivots = np.abs(np.diag(low)) ** 2
    if pivots.size and pivots.min() <= PIVOT_TOL:
        raise NotPositiveDefinite(f"pivot {pivots.min():.3e} <= {PIVOT_TOL:g}")
    return low


def svd(m):
    """Thin SVD ``m = U @ diag(s) @ V^H`` with ``s`` nonincreasing.

    ``U`` is ``rows x k`` and ``V`` is ``cols x k`` with ``k = min(rows, cols)``.
    """
    u, s, vh = np.linalg.svd(np.asarray(m, dtype=complex), full_matrices=False)
    return u, s, vh.conj().T


def logdet(m):
    """Natural-log determinant of a positive definite matrix."""
    low = cholesky_factor(m)
    return 2.0 * float(np.sum(np.log(np.abs(np.diag(low)))))


def psd_project(m):
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped to 0)."""
    w, v = np.linalg.eigh(hermitize(m))
    if w.min(initial=0.0) >= 0.0:
        return hermitize(m)
    w = np.clip(w, 0.0, None)
    return hermitize((v * w) @ v.conj().T)


def psd_sqrt(m):
    """Hermitian square root of a PSD matrix (tiny negative eigenvalues clamped)."""
    w, v = np.linalg.eigh(hermitize(m))
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def inv_pd(m):
    """Inverse of a positive definite matrix via its Cholesky factor."""
    low = cholesky_factor(m)
    linv = solve_triangular(low, np.eye(low.shape[0]), lower=True)
    return hermitize(linv.conj().T @ linv)


def _cap_simplex(lam, cap):
    # Euclidean projection of a real vector onto {x >= 0, sum(x) <= cap};
    # returns the projection and the shift tau (0 when the cap is inactive).
    clipped = np.clip(lam, 0.0, None)
    if clipped.sum() <= cap:
        return clipped, 0.0
    u = np.sort(lam)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, u.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.clip(lam - tau, 0.0, None), float(tau)


def project_power_set(m, power):
    """Project a Hermitian matrix onto ``{S >= 0, Tr S <= power}``.

    Returns
    -------
    proj : ndarray
        The Frobenius-nearest feasible covariance.
    tau : float
        Eigenvalue shift applied by the trace cap; it acts as the power
        constraint multiplier of the projection and is 0 when the cap is slack.
    """
    w, v = np.linalg.eigh(hermitize(m))
    lam, tau = _cap_simplex(w, power)
    return hermitize((v * lam) @ v.conj().T), tau


def hermitian_basis(dim):
    """Orthonormal basis of the real vector space of ``dim x dim`` Hermitian matrices.

    Yields ``(i, j, kind, D)`` with ``kind`` in ``{"diag", "re", "im"}``. For a
    Hermitian gradient ``G`` and directional derivative ``d = Tr(G D)``:
    ``G_ii = d`` for ``diag``; ``Re G_ij = d / sqrt(2)`` for ``re`` and
    ``Im G_ij = d / sqrt(2)`` for ``im`` (``i < j``).
    """
    r2 = np.sqrt(0.5)
    for i in range(dim):
        d = np.zeros((dim, dim), dtype=complex)
        d[i, i] = 1.0
        yield i, i, "diag", d
    for i in range(dim):
        for j in range(i + 1, dim):
            d = np.zeros((dim, dim), dtype=complex)
            d[i, j] = d[j, i] = r2
            yield i, j, "re", d
            d = np.zeros((dim, dim), dtype=complex)
            d[i, j] = 1j * r2
            d[j, i] = -1j * r2
            yield i, j, "im", d
