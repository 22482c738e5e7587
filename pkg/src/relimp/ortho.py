"""Orthonormal bases of the predictor space, each stored as a rotation of Johnson's Z.

Every orthogonalization Z~ spans the same column space as X, so Z~ = Z Q for an
orthogonal Q, where Z = X (X^T X)^{-1/2}.  With L_Z = Sigma^{1/2} and
Gamma_Z = Sigma^{-1/2} this gives

    loading = X^T Z~ = L_Z Q,    gamma = Sigma^{-1} X^T Z~ = Gamma_Z Q,

so nothing needs the raw data.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corrmat import AugmentedProblem, CorrelationMatrix, _frozen
from .errors import CholeskyFailure, ConvergenceWarning, DimensionMismatch, ValidationError

METHODS = ("Johnson", "GS", "PC", "VM")


@dataclass(frozen=True, eq=False)
class Orthogonalization:
    method: str
    rotation_q: np.ndarray
    loading: np.ndarray
    gamma: np.ndarray
    converged: bool = True
    iterations: int = 0

    @property
    def p(self) -> int:
        return self.loading.shape[0]


def _build(corr: CorrelationMatrix, method: str, q: np.ndarray, **kw) -> Orthogonalization:
    return Orthogonalization(method, _frozen(q), _frozen(corr.sqrt @ q), _frozen(corr.inv_sqrt @ q), **kw)


def johnson(corr: CorrelationMatrix) -> Orthogonalization:
    """Johnson's minimal transformation, the orthonormal basis closest to X."""
    p = corr.p
    return Orthogonalization("Johnson", _frozen(np.eye(p)), corr.sqrt, corr.inv_sqrt)


def gram_schmidt(corr: CorrelationMatrix) -> Orthogonalization:
    """Gram-Schmidt on x_1, ..., x_p in their natural order.

    The loading is the lower Cholesky factor of Sigma: x_i only loads on z_1..z_i.
    """
    try:
        lower = np.linalg.cholesky(corr.values)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure("Cholesky factorization failed; matrix is numerically semidefinite") from exc
    # Q = Sigma^{-1/2} R^T
    q = corr.inv_sqrt @ lower
    gamma = np.linalg.inv(lower.T)
    return Orthogonalization("GS", _frozen(q), _frozen(lower), _frozen(gamma))


def principal_components(corr: CorrelationMatrix) -> Orthogonalization:
    """Standardized principal components, ordered by decreasing eigenvalue."""
    v = corr.eigvecs
    root = np.sqrt(corr.spectrum)
    return Orthogonalization("PC", _frozen(v), _frozen(v * root), _frozen(v / root))


def varimax_objective(loading) -> float:
    """Raw varimax criterion: the summed column variances of the squared loadings."""
    sq = np.asarray(loading) ** 2
    p = sq.shape[0]
    return float(np.sum(np.sum(sq**2, axis=0) / p - (sq.sum(axis=0) / p) ** 2))


def canonical_columns(loading, q=None):
    """Permute and sign-flip columns to maximize the trace, leaving a nonnegative diagonal.

    The varimax criterion is blind to column order and sign; this picks the
    representative whose k-th column is matched to predictor k.
    Returns ``(loading, q)`` with the same column operation applied to both.
    """
    loading = np.asarray(loading, dtype=float)
    _, perm = linear_sum_assignment(-np.abs(loading))
    signs = np.sign(loading[np.arange(loading.shape[0]), perm])
    signs[signs == 0] = 1.0
    out_l = loading[:, perm] * signs
    out_q = None if q is None else np.asarray(q, dtype=float)[:, perm] * signs
    return out_l, out_q


def varimax(corr: CorrelationMatrix, tol: float = 1e-10, max_iter: int = 1000) -> Orthogonalization:
    """Varimax rotation of the Johnson loading by sweeps of planar (Jacobi) rotations.

    No Kaiser row normalization.  Each planar rotation is the exact maximizer of the
    criterion over that pair of columns, so the criterion never decreases; the
    iteration stops once a full sweep gains less than ``tol``.  The result is put in
    canonical column order (see :func:`canonical_columns`).
    """
    p = corr.p
    lam = np.array(corr.sqrt, dtype=float)
    q = np.eye(p)
    obj = varimax_objective(lam)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        for i in range(p - 1):
            for j in range(i + 1, p):
                x, y = lam[:, i], lam[:, j]
                u = x * x - y * y
                v = 2.0 * x * y
                su, sv = u.sum(), v.sum()
                num = 2.0 * (u @ v - su * sv / p)
                den = (u @ u - v @ v) - (su * su - sv * sv) / p
                theta = 0.25 * np.arctan2(num, den)
                if theta == 0.0:
                    continue
                c, s = np.cos(theta), np.sin(theta)
                rot = np.array([[c, -s], [s, c]])
                lam[:, [i, j]] = lam[:, [i, j]] @ rot
                q[:, [i, j]] = q[:, [i, j]] @ rot
        new_obj = varimax_objective(lam)
        gain = new_obj - obj
        obj = new_obj
        if gain < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"varimax did not converge in {max_iter} sweeps", ConvergenceWarning, stacklevel=2)
    _, q = canonical_columns(corr.sqrt @ q, q)
    return _build(corr, "VM", q, converged=converged, iterations=sweeps)


_DISPATCH = {
    "Johnson": johnson,
    "GS": gram_schmidt,
    "PC": principal_components,
    "VM": varimax,
}


def orthogonalize(corr: CorrelationMatrix, method: str) -> Orthogonalization:
    try:
        fn = _DISPATCH[method]
    except KeyError:
        raise ValidationError(f"unknown orthogonalization {method!r}; choose from {METHODS}") from None
    return fn(corr)


def orthogonal_response_correlations(orth: Orthogonalization, problem: AugmentedProblem) -> np.ndarray:
    """Correlations between the response and each orthogonal predictor.

    Equals Q^T Gamma_Z rho_xy, which is gamma^T rho_xy because Gamma_Z is symmetric.
    """
    if orth.p != problem.p:
        raise DimensionMismatch(f"orthogonalization has p={orth.p}, problem has p={problem.p}")
    if not np.allclose(problem.corr.values @ orth.gamma, orth.loading, atol=1e-8):
        raise DimensionMismatch("orthogonalization was not built from this problem's correlation matrix")
    return orth.gamma.T @ problem.rho_xy
