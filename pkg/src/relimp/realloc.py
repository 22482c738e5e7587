"""Reallocation matrices and the orthogonalization-reallocation measure (ORM).

An ORM scores predictor i as D_i = sum_j a_ij * rho(z~_j, y)^2, i.e. the squared
response correlations of the orthogonal predictors pushed back through a
nonnegative, column-stochastic matrix A.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corrmat import AugmentedProblem, _frozen
from .errors import DegenerateColumn, DimensionMismatch, ValidationError
from .ortho import Orthogonalization, johnson, orthogonal_response_correlations

REALLOCATIONS = ("GDA", "CorPA", "RegPA", "IdA")

_CLAMP = 1e-12
_DEGENERATE = 1e-14


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    values: np.ndarray
    measure: str

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def total(self) -> float:
        return float(np.sum(self.values))

    def normalized(self) -> np.ndarray:
        """Shares in percent of the total."""
        return 100.0 * np.asarray(self.values) / self.total


@dataclass(frozen=True, eq=False)
class ReallocationMatrix:
    values: np.ndarray
    method: str
    orth_method: Optional[str] = None

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)


def _finish(a: np.ndarray, method: str, orth_method: Optional[str]) -> ReallocationMatrix:
    a = np.array(a, dtype=float)
    a[(a < 0) & (a >= -_CLAMP)] = 0.0
    return ReallocationMatrix(_frozen(a), method, orth_method)


def _proportional(m: np.ndarray, method: str, orth: Orthogonalization) -> ReallocationMatrix:
    sq = np.asarray(m) ** 2
    col = sq.sum(axis=0)
    if np.any(col < _DEGENERATE):
        raise DegenerateColumn(f"{method}: column {int(np.argmin(col))} has (near) zero mass")
    return _finish(sq / col, method, orth.method)


def ida(p: int) -> ReallocationMatrix:
    """Identity reallocation: z~_j is credited entirely to x_j."""
    if p < 2:
        raise ValidationError("p must be at least 2")
    return _finish(np.eye(p), "IdA", None)


def regpa(orth: Orthogonalization) -> ReallocationMatrix:
    """Column-normalized squared regression coefficients of z~ on X."""
    return _proportional(orth.gamma, "RegPA", orth)


def corpa(orth: Orthogonalization) -> ReallocationMatrix:
    """Column-normalized squared correlations between X and z~."""
    return _proportional(orth.loading, "CorPA", orth)


def evaluate_orm(realloc: ReallocationMatrix, rho_zy) -> ImportanceVector:
    rho = np.asarray(rho_zy, dtype=float)
    if rho.shape[0] != realloc.p:
        raise DimensionMismatch(f"rho_zy has length {rho.shape[0]}, matrix is {realloc.p}x{realloc.p}")
    return ImportanceVector(realloc.values @ rho**2, realloc.method)


def reallocate(method: str, orth: Orthogonalization, corr=None) -> ReallocationMatrix:
    """Build the named reallocation for ``orth``; GDA additionally needs ``corr``."""
    if method == "IdA":
        return _finish(np.eye(orth.p), "IdA", orth.method)
    if method == "RegPA":
        return regpa(orth)
    if method == "CorPA":
        return corpa(orth)
    if method == "GDA":
        from .dominance import gda_reallocation

        if corr is None:
            raise ValidationError("GDA reallocation needs the correlation matrix")
        return gda_reallocation(orth, corr)
    raise ValidationError(f"unknown reallocation {method!r}; choose from {REALLOCATIONS}")


def named_measures(problem: AugmentedProblem, include_dominance: bool = True) -> dict:
    """GD and the classical Johnson-Z-based ORMs for one problem.

    RW is CorPA, GCD is RegPA and CAR is IdA, all on Johnson's Z; GDA_ORM is the
    GD-based reallocation on Johnson's Z.  With ``include_dominance=False`` the
    two exponential-cost entries (GD and GDA_ORM) are skipped.
    """
    from .dominance import general_dominance, gda_reallocation

    jz = johnson(problem.corr)
    rho_zy = orthogonal_response_correlations(jz, problem)
    out = {}
    if include_dominance:
        out["GD"] = general_dominance(problem)
    out["RW"] = ImportanceVector(evaluate_orm(corpa(jz), rho_zy).values, "RW")
    out["GCD"] = ImportanceVector(evaluate_orm(regpa(jz), rho_zy).values, "GCD")
    out["CAR"] = ImportanceVector(evaluate_orm(ida(problem.p), rho_zy).values, "CAR")
    if include_dominance:
        out["GDA_ORM"] = ImportanceVector(evaluate_orm(gda_reallocation(jz, problem.corr), rho_zy).values, "GDA_ORM")
    return out
