"""Agreement metrics between importance vectors, win-loss tests, and table aggregation."""
from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, fields
from typing import Iterable, NamedTuple, Optional

import numpy as np
from scipy.stats import norm, rankdata

from .errors import AllTiedWarning, DimensionMismatch, EmptyGroup, UnpairedGroup, ValidationError

EXACT_MAX_N = 25


def _pair(reference, candidate):
    a = np.asarray(reference, dtype=float)
    b = np.asarray(candidate, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def rmse(reference, candidate) -> float:
    a, b = _pair(reference, candidate)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def rmse_columns(reference: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    """RMSE down each column of two p x m arrays."""
    a, b = _pair(reference, candidate)
    return np.sqrt(np.mean((a - b) ** 2, axis=0))


def tau_b_columns(reference: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    """Kendall's tau-b down each column of two p x m arrays.

    Columns where either side is constant get 0.
    """
    a, b = _pair(reference, candidate)
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    n = a.shape[0]
    if n < 2:
        raise DimensionMismatch("Kendall's tau needs at least two items")
    i, j = np.triu_indices(n, k=1)
    sa = np.sign(a[i] - a[j])
    sb = np.sign(b[i] - b[j])
    s = np.sum(sa * sb, axis=0)
    n0 = len(i)
    untied_a = n0 - np.sum(sa == 0, axis=0)
    untied_b = n0 - np.sum(sb == 0, axis=0)
    denom = np.sqrt(untied_a.astype(float) * untied_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.where(denom > 0, s / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(tau, -1.0, 1.0)


def kendall_tau(reference, candidate) -> float:
    """Kendall's tau-b; with no ties it equals tau-a.

    If either ranking is entirely tied the coefficient is undefined: 0.0 is
    returned and an :class:`AllTiedWarning` is issued.
    """
    a, b = _pair(reference, candidate)
    if a.ndim != 1:
        raise DimensionMismatch("expected 1-D vectors")
    if np.all(a == a[0]) or np.all(b == b[0]):
        warnings.warn("one ranking is constant; tau set to 0", AllTiedWarning, stacklevel=2)
        return 0.0
    return float(tau_b_columns(a, b)[0])


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank


class WilcoxonResult(NamedTuple):
    winner: str  # "A", "B" or "tie"
    statistic: float  # min(W+, W-)
    p_value: float
    n: int  # pairs left after dropping zero differences


def _signed_rank_null(doubled_ranks: np.ndarray) -> np.ndarray:
    """Null distribution of 2*W+ when each rank's sign is a fair coin."""
    total = int(doubled_ranks.sum())
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for r in doubled_ranks:
        r = int(r)
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[: total + 1 - r]
        dist = 0.5 * (dist + shifted)
    return dist


def signed_rank_p_value(diffs) -> tuple[float, float, int]:
    """Two-sided p-value of the signed-rank statistic for nonzero ``diffs``.

    Exact (including with tied magnitudes) for up to ``EXACT_MAX_N`` pairs; the
    tie-corrected normal approximation with continuity correction beyond that.
    Returns ``(statistic, p_value, n)``.
    """
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0, 0
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(int)
        dist = _signed_rank_null(doubled)
        k = int(round(2 * w_plus))
        lower = dist[: k + 1].sum()
        upper = dist[k:].sum()
        p = min(1.0, 2.0 * min(lower, upper))
    else:
        mu = n * (n + 1) / 4.0
        _, counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(counts**3 - counts) / 48.0
        z = max(abs(w_plus - mu) - 0.5, 0.0) / math.sqrt(var)
        p = float(min(1.0, 2.0 * norm.sf(z)))
    return stat, float(p), n


def wilcoxon_signed_rank(paired_a, paired_b, alpha: float = 0.05, lower_is_better: bool = True) -> WilcoxonResult:
    """Paired two-sided signed-rank test on ``a - b``.

    The winner is the side with the better mean when the test is significant at
    ``alpha``; pairs with zero difference are dropped before ranking.
    """
    a, b = _pair(paired_a, paired_b)
    if a.ndim != 1:
        raise DimensionMismatch("expected 1-D paired samples")
    stat, p, n = signed_rank_p_value(a - b)
    winner = "tie"
    if n and p < alpha:
        a_better = a.mean() < b.mean() if lower_is_better else a.mean() > b.mean()
        winner = "A" if a_better else "B"
    return WilcoxonResult(winner, stat, p, n)


# ---------------------------------------------------------------------------
# simulation records


@dataclass(frozen=True)
class SimulationRecord:
    p: int
    ev_index: int
    seed_index: int
    orth: str
    realloc: str
    lambda1: float
    lambda1_ratio: float
    vif_max: float
    vif_ratio: float
    scenario: str
    mean_rmse: float
    mean_tau: float
    n_responses: int

    @classmethod
    def field_names(cls) -> list:
        return [f.name for f in fields(cls)]


def aggregate_table1(records: Iterable[SimulationRecord]) -> dict:
    """Mean RMSE and tau per (realloc, orth, p), averaged over every cell.

    Sums use ``math.fsum`` so the result does not depend on record order.
    """
    groups = defaultdict(lambda: ([], []))
    for r in records:
        g = groups[(r.realloc, r.orth, r.p)]
        g[0].append(r.mean_rmse)
        g[1].append(r.mean_tau)
    if not groups:
        raise EmptyGroup("no records to aggregate")
    return {k: (math.fsum(v[0]) / len(v[0]), math.fsum(v[1]) / len(v[1])) for k, v in groups.items()}


# ---------------------------------------------------------------------------
# win-loss


@dataclass(frozen=True)
class EigenSetOutcome:
    p: int
    ev_index: int
    lambda1_ratio: float
    winner: str  # "RW", "GCD" or "tie"
    statistic: float
    p_value: float
    n_pairs: int


@dataclass(frozen=True)
class WinLossOutcome:
    comparison: str
    wins_rw: int
    wins_gcd: int
    ties: int
    alpha: float

    @property
    def total(self) -> int:
        return self.wins_rw + self.wins_gcd + self.ties

    @property
    def rw_fraction(self) -> float:
        return self.wins_rw / self.total if self.total else math.nan


RW_KEY = ("Johnson", "CorPA")
GCD_KEY = ("Johnson", "RegPA")


def win_loss(
    records: Iterable[SimulationRecord],
    metric: str = "rmse",
    alpha: float = 0.05,
    multicollinearity: Optional[str] = None,
) -> list:
    """RW versus GCD per eigenvalue set, over the seeds (eigenvector draws) of that set.

    ``multicollinearity`` restricts each set to seeds whose matrix is ``"mild"``
    (VIF_max/p < 4) or ``"severe"``; sets left with no seeds are skipped.
    """
    if metric not in ("rmse", "tau"):
        raise ValidationError(f"metric must be 'rmse' or 'tau', not {metric!r}")
    if multicollinearity not in (None, "mild", "severe"):
        raise ValidationError("multicollinearity must be 'mild', 'severe' or None")
    attr = "mean_rmse" if metric == "rmse" else "mean_tau"
    sets = defaultdict(lambda: {RW_KEY: {}, GCD_KEY: {}})
    ratios = {}
    for r in records:
        key = (r.orth, r.realloc)
        if key not in (RW_KEY, GCD_KEY):
            continue
        if multicollinearity is not None and (r.scenario.startswith("2")) != (multicollinearity == "severe"):
            continue
        sets[(r.p, r.ev_index)][key][r.seed_index] = getattr(r, attr)
        ratios[(r.p, r.ev_index)] = r.lambda1_ratio
    out = []
    for (p, ev) in sorted(sets):
        rw, gcd = sets[(p, ev)][RW_KEY], sets[(p, ev)][GCD_KEY]
        if set(rw) != set(gcd):
            raise UnpairedGroup(f"p={p} ev={ev}: RW seeds {sorted(rw)} != GCD seeds {sorted(gcd)}")
        seeds = sorted(rw)
        res = wilcoxon_signed_rank(
            [rw[s] for s in seeds], [gcd[s] for s in seeds], alpha=alpha, lower_is_better=(metric == "rmse")
        )
        winner = {"A": "RW", "B": "GCD", "tie": "tie"}[res.winner]
        out.append(EigenSetOutcome(p, ev, ratios[(p, ev)], winner, res.statistic, res.p_value, res.n))
    return out


def tally(outcomes: Iterable[EigenSetOutcome], comparison: str, alpha: float) -> WinLossOutcome:
    rw = gcd = ties = 0
    for o in outcomes:
        if o.winner == "RW":
            rw += 1
        elif o.winner == "GCD":
            gcd += 1
        else:
            ties += 1
    return WinLossOutcome(comparison, rw, gcd, ties, alpha)


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Pooled two-proportion z statistic for k1/n1 - k2/n2 and its two-sided p-value."""
    if n1 == 0 or n2 == 0:
        return math.nan, math.nan
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0, 1.0
    z = (k1 / n1 - k2 / n2) / se
    return z, float(2 * norm.sf(abs(z)))


def threshold_split(outcomes: list, alpha: float, threshold: float = 1.5, label: str = "") -> dict:
    """Tally outcomes below and at-or-above a lambda_1/sqrt(p) threshold and compare RW win rates."""
    below = tally([o for o in outcomes if o.lambda1_ratio < threshold], f"{label}lambda1_ratio<{threshold}", alpha)
    above = tally([o for o in outcomes if o.lambda1_ratio >= threshold], f"{label}lambda1_ratio>={threshold}", alpha)
    z, p = two_proportion_z(below.wins_rw, below.total, above.wins_rw, above.total)
    return {"below": below, "above": above, "z": z, "p_value": p}


def binned_tally(outcomes: list, alpha: float, width: float = 0.25) -> list:
    """Win-loss tallies in consecutive lambda_1/sqrt(p) bins of ``width``; for plotting."""
    bins = defaultdict(list)
    for o in outcomes:
        bins[math.floor(o.lambda1_ratio / width)].append(o)
    return [
        (k * width, (k + 1) * width, tally(bins[k], f"[{k * width:.2f},{(k + 1) * width:.2f})", alpha))
        for k in sorted(bins)
    ]
