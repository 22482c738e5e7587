"""Correlation-matrix domain types and the quantities computed directly on them.

Everything in this package works on correlations only: the data matrix is never
needed once the (p+1)x(p+1) augmented correlation matrix of predictors and
response is known.  Predictor indices are 0-based throughout.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DiagonalNotUnit,
    IndexOutOfRange,
    MissingValues,
    NotPositiveDefinite,
    NotSquare,
    OffDiagonalOutOfRange,
    RankDeficient,
    ResponseColumnNotFound,
    ValidationError,
)

EIGEN_FLOOR = 1e-10
LAMBDA1_THRESHOLD = 1.5
VIF_THRESHOLD = 4.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    # flip each column so that its largest-magnitude entry is positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """A validated, positive-definite predictor correlation matrix.

    Build instances with :func:`validate`; the constructor does not check anything.
    ``spectrum`` is sorted in descending order and ``eigvecs[:, k]`` belongs to
    ``spectrum[k]``.
    """

    values: np.ndarray
    spectrum: np.ndarray
    eigvecs: np.ndarray

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @cached_property
    def inverse(self) -> np.ndarray:
        v = self.eigvecs
        return _frozen((v / self.spectrum) @ v.T)

    @cached_property
    def sqrt(self) -> np.ndarray:
        """Symmetric square root V diag(sqrt(lambda)) V^T."""
        v = self.eigvecs
        return _frozen((v * np.sqrt(self.spectrum)) @ v.T)

    @cached_property
    def inv_sqrt(self) -> np.ndarray:
        v = self.eigvecs
        return _frozen((v / np.sqrt(self.spectrum)) @ v.T)

    def __repr__(self) -> str:
        return f"CorrelationMatrix(p={self.p}, spectrum={np.round(self.spectrum, 4).tolist()})"


def validate(matrix, tolerance: float = 1e-10) -> CorrelationMatrix:
    """Check that ``matrix`` is a usable correlation matrix and decompose it.

    The matrix is symmetrized by averaging with its transpose.  A diagonal within
    ``tolerance`` of one is snapped to exactly one; anything else is rejected, as is
    any matrix whose smallest eigenvalue is at or below ``EIGEN_FLOOR``.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {a.shape}")
    p = a.shape[0]
    if p < 2:
        raise NotSquare("need at least two predictors")
    if not np.all(np.isfinite(a)):
        raise MissingValues("matrix contains non-finite entries")
    a = 0.5 * (a + a.T)
    diag_err = np.max(np.abs(np.diag(a) - 1.0))
    if diag_err > tolerance:
        raise DiagonalNotUnit(f"max |diag - 1| = {diag_err:.3e} exceeds {tolerance:.1e}")
    np.fill_diagonal(a, 1.0)
    off = a[~np.eye(p, dtype=bool)]
    if off.size and np.max(np.abs(off)) > 1.0:
        raise OffDiagonalOutOfRange(f"off-diagonal entry {off[np.argmax(np.abs(off))]:.6g} outside [-1, 1]")
    lam, vecs = np.linalg.eigh(a)
    # descending; exact ties keep the solver's order so the identity maps to I
    order = np.argsort(-lam, kind="stable")
    lam, vecs = lam[order], vecs[:, order]
    if lam[-1] <= EIGEN_FLOOR:
        raise NotPositiveDefinite(lam[-1])
    vecs = _canonical_signs(vecs)
    return CorrelationMatrix(_frozen(a), _frozen(lam), _frozen(vecs))


def equicorrelation(p: int, rho: float) -> np.ndarray:
    """The p x p matrix with unit diagonal and every off-diagonal equal to ``rho``."""
    return np.full((p, p), float(rho)) + (1.0 - rho) * np.eye(p)


@dataclass(frozen=True, eq=False)
class AugmentedProblem:
    """Predictor correlations plus the predictor-response correlations."""

    corr: CorrelationMatrix
    rho_xy: np.ndarray
    r_squared: float
    labels: Optional[tuple] = field(default=None)

    @property
    def p(self) -> int:
        return self.corr.p

    @classmethod
    def from_correlations(cls, corr: CorrelationMatrix, rho_xy, labels: Optional[Sequence[str]] = None):
        rho = np.asarray(rho_xy, dtype=float).reshape(-1)
        if rho.shape[0] != corr.p:
            raise ValidationError(f"rho_xy has length {rho.shape[0]}, expected {corr.p}")
        if not np.all(np.isfinite(rho)) or np.any(np.abs(rho) > 1.0 + 1e-12):
            raise ValidationError("predictor-response correlations must lie in [-1, 1]")
        r2 = float(rho @ corr.inverse @ rho)
        if r2 > 1.0 + 1e-10:
            raise NotPositiveDefinite(
                1.0 - r2, f"augmented matrix is not positive semi-definite (implied R^2 = {r2:.6g} > 1)"
            )
        r2 = min(max(r2, 0.0), 1.0)
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != corr.p:
                raise ValidationError("need one label per predictor")
        return cls(corr, _frozen(rho), r2, labels)

    @classmethod
    def from_augmented(cls, matrix, labels: Optional[Sequence[str]] = None, tolerance: float = 1e-10):
        """Split a (p+1)x(p+1) matrix whose last row/column is the response."""
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NotSquare(f"expected a square augmented matrix, got shape {a.shape}")
        a = 0.5 * (a + a.T)
        if abs(a[-1, -1] - 1.0) > tolerance:
            raise DiagonalNotUnit("response diagonal entry is not 1")
        corr = validate(a[:-1, :-1], tolerance)
        return cls.from_correlations(corr, a[:-1, -1], labels)

    def augmented(self) -> np.ndarray:
        p = self.p
        out = np.empty((p + 1, p + 1))
        out[:p, :p] = self.corr.values
        out[:p, p] = out[p, :p] = self.rho_xy
        out[p, p] = 1.0
        return out


def vif(corr: CorrelationMatrix) -> np.ndarray:
    """Variance inflation factors: the diagonal of the inverse correlation matrix."""
    return np.diag(corr.inverse).copy()


def subset_r_squared(problem: AugmentedProblem, subset: Iterable[int]) -> float:
    """Squared multiple correlation of the response on the predictors in ``subset``."""
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        return 0.0
    if idx[0] < 0 or idx[-1] >= problem.p:
        raise IndexOutOfRange(f"subset {idx} not within 0..{problem.p - 1}")
    sub = problem.corr.values[np.ix_(idx, idx)]
    r = problem.rho_xy[idx]
    return float(r @ np.linalg.solve(sub, r))


@dataclass(frozen=True)
class Scenario:
    label: str
    lambda1_ratio: float
    vif_ratio: float

    @property
    def strong_first_component(self) -> bool:
        return self.lambda1_ratio >= LAMBDA1_THRESHOLD

    @property
    def severe_multicollinearity(self) -> bool:
        return self.vif_ratio >= VIF_THRESHOLD


def scenario_label(lambda1_ratio: float, vif_ratio: float) -> str:
    major = "2" if vif_ratio >= VIF_THRESHOLD else "1"
    minor = "2" if lambda1_ratio >= LAMBDA1_THRESHOLD else "1"
    return f"{major}.{minor}"


def classify_scenario(corr: CorrelationMatrix) -> Scenario:
    p = corr.p
    l_ratio = float(corr.spectrum[0] / math.sqrt(p))
    v_ratio = float(np.max(vif(corr)) / p)
    return Scenario(scenario_label(l_ratio, v_ratio), l_ratio, v_ratio)


# ---------------------------------------------------------------------------
# ingestion


def ingest_dataset(rows, names: Sequence[str], response: str) -> AugmentedProblem:
    """Standardize raw observations and build the augmented correlation problem.

    Columns are centered and scaled to unit Euclidean norm, so inner products are
    correlations.  ``names`` labels the columns of ``rows``.
    """
    data = np.asarray(rows, dtype=float)
    names = [str(n) for n in names]
    if data.ndim != 2 or data.shape[1] != len(names):
        raise ValidationError("rows must be a 2-D array with one column per name")
    if response not in names:
        raise ResponseColumnNotFound(f"response column {response!r} not in {names}")
    if np.isnan(data).any():
        raise MissingValues(f"{int(np.isnan(data).sum())} missing values in dataset")
    if not np.all(np.isfinite(data)):
        raise MissingValues("dataset contains infinite values")
    j = names.index(response)
    order = [k for k in range(len(names)) if k != j] + [j]
    data = data[:, order]
    n, k = data.shape
    p = k - 1
    if p < 2:
        raise ValidationError("need at least two predictors")
    if n <= p:
        raise RankDeficient(f"{n} observations cannot support {p} predictors")
    centered = data - data.mean(axis=0)
    norms = np.linalg.norm(centered, axis=0)
    scale = np.max(np.abs(data), axis=0) * math.sqrt(n)
    flat = norms <= 1e-12 * np.maximum(scale, 1.0)
    if flat.any():
        bad = [names[order[i]] for i in np.flatnonzero(flat)]
        raise RankDeficient(f"constant columns: {bad}")
    std = centered / norms
    gram = std.T @ std
    try:
        corr = validate(gram[:p, :p], tolerance=1e-8)
    except NotPositiveDefinite as exc:
        raise RankDeficient(f"predictors are linearly dependent (lambda_min={exc.lambda_min:.3e})") from exc
    return AugmentedProblem.from_correlations(corr, gram[:p, p], [names[i] for i in order[:p]])


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_matrix_csv(path) -> tuple[Optional[list], np.ndarray]:
    """Read a numeric square matrix; a header row and/or a label column are optional."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValidationError(f"{path}: empty file")
    labels = None
    if not all(_is_number(c) for c in rows[0] if c.strip()):
        labels = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if rows and all(not _is_number(r[0]) for r in rows):
        row_labels = [r[0].strip() for r in rows]
        rows = [r[1:] for r in rows]
        if labels is not None and len(labels) == len(rows) + 1:
            labels = labels[1:]
        if labels is None:
            labels = row_labels
    try:
        values = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric matrix entry ({exc})") from exc
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise NotSquare(f"{path}: matrix is {values.shape[0]} rows by {values.shape[-1] if values.ndim == 2 else '?'} columns")
    if labels is not None and len(labels) != values.shape[0]:
        raise ValidationError(f"{path}: {len(labels)} labels for a {values.shape[0]}-variable matrix")
    return labels, values


_MISSING = {"", "na", "nan", "null", "none", "?"}


def read_data_csv(path) -> tuple[list, np.ndarray]:
    """Read raw observations: a header of variable names then one row per observation."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for c in row:
                c = c.strip()
                if c.lower() in _MISSING:
                    vals.append(math.nan)
                else:
                    try:
                        vals.append(float(c))
                    except ValueError:
                        raise ValidationError(f"{path}:{lineno}: non-numeric value {c!r}") from None
            out.append(vals)
    return header, np.array(out, dtype=float).reshape(len(out), len(header))
