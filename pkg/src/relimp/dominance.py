"""Exact general dominance (the Shapley value of R^2) by full subset enumeration.

Subsets of predictors are bitmasks: predictor i is in mask ``m`` iff ``m >> i & 1``.
The R^2 of every subset is computed once per target and reused by all p
coordinates, and by every target when several are stacked as columns.
"""
from __future__ import annotations

import warnings
from math import comb

import numpy as np

from .corrmat import AugmentedProblem, CorrelationMatrix
from .errors import TooManyPredictors, ValidationError
from .ortho import Orthogonalization
from .realloc import ImportanceVector, ReallocationMatrix, _finish

MAX_PREDICTORS = 20
WARN_PREDICTORS = 15
_CHUNK = 4096


def _check_size(p: int) -> None:
    if p > MAX_PREDICTORS:
        raise TooManyPredictors(f"exact dominance needs 2^{p} sub-models; the limit is p={MAX_PREDICTORS}")
    if p > WARN_PREDICTORS:
        warnings.warn(f"exact dominance with p={p} enumerates {2**p} sub-models", RuntimeWarning, stacklevel=3)


def popcount(masks: np.ndarray) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64)
    out = np.zeros_like(masks)
    m = masks.copy()
    while np.any(m):
        out += m & 1
        m >>= 1
    return out


def subset_engine(corr: CorrelationMatrix, targets) -> np.ndarray:
    """R^2 of each target column regressed on each predictor subset.

    ``targets`` is p x m: column k holds the correlations of target k with the p
    predictors.  Returns an array of shape (2^p, m) indexed by subset bitmask; row 0
    (the empty model) is zero.
    """
    p = corr.p
    _check_size(p)
    t = np.asarray(targets, dtype=float)
    if t.ndim == 1:
        t = t[:, None]
    if t.shape[0] != p:
        raise ValidationError(f"targets have {t.shape[0]} rows, expected {p}")
    full = np.einsum("im,im->m", t, corr.inverse @ t)
    if np.any(full > 1.0 + 1e-8):
        raise ValidationError("target correlations are inconsistent with the predictor correlations (R^2 > 1)")

    n_sub = 1 << p
    masks = np.arange(n_sub, dtype=np.int64)
    sizes = popcount(masks)
    bits = np.arange(p, dtype=np.int64)
    sigma = corr.values
    out = np.zeros((n_sub, t.shape[1]))
    for k in range(1, p + 1):
        ms = masks[sizes == k]
        member = ((ms[:, None] >> bits) & 1).astype(bool)
        idx = np.nonzero(member)[1].reshape(len(ms), k)
        for start in range(0, len(ms), _CHUNK):
            sl = slice(start, start + _CHUNK)
            ix = idx[sl]
            sub = sigma[ix[:, :, None], ix[:, None, :]]
            rhs = t[ix]
            sol = np.linalg.solve(sub, rhs)
            out[ms[sl]] = np.einsum("nkm,nkm->nm", rhs, sol)
    return out


def shapley_from_table(table: np.ndarray) -> np.ndarray:
    """General dominance of every predictor for every target column of ``table``.

    Returns a p x m array.  Each increment R^2(S + i) - R^2(S) gets weight
    1 / (p * C(p-1, |S|)).
    """
    table = np.asarray(table, dtype=float)
    if table.ndim == 1:
        table = table[:, None]
    n_sub = table.shape[0]
    p = n_sub.bit_length() - 1
    if 1 << p != n_sub:
        raise ValidationError("table must have 2^p rows")
    masks = np.arange(n_sub, dtype=np.int64)
    sizes = popcount(masks)
    pascal = np.array([comb(p - 1, k) for k in range(p)], dtype=float)
    weights = 1.0 / (p * pascal)
    gd = np.empty((p, table.shape[1]))
    for i in range(p):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        gd[i] = weights[sizes[without]] @ (table[without | bit] - table[without])
    return gd


def general_dominance(problem: AugmentedProblem) -> ImportanceVector:
    table = subset_engine(problem.corr, problem.rho_xy)
    return ImportanceVector(shapley_from_table(table)[:, 0], "GD")


def gda_reallocation(orth: Orthogonalization, corr: CorrelationMatrix) -> ReallocationMatrix:
    """a_ij = general dominance of x_i when predicting the orthogonal predictor z~_j.

    The correlations of z~_j with X are the j-th loading column, and z~_j lies in the
    span of X, so every column has full-model R^2 of one.
    """
    if orth.p != corr.p:
        raise ValidationError("orthogonalization and correlation matrix differ in size")
    table = subset_engine(corr, orth.loading)
    return _finish(shapley_from_table(table), "GDA", orth.method)
