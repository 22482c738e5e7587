"""The simulation universe: spectra, correlation matrices, responses, and the run loop.

Randomness is drawn from :class:`RngStream` objects.  A stream is a master seed plus
a path of ``(role, index)`` pairs, hashed into a ``numpy.random.SeedSequence``
spawn key, so every cell of the nested loop owns an independent, reproducible
generator no matter which worker evaluates it or in what order.
"""
from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np

from .config import SimulationConfig
from .corrmat import AugmentedProblem, CorrelationMatrix, _frozen, classify_scenario, validate, vif
from .dominance import shapley_from_table, subset_engine
from .errors import InvalidR2, NoConvergence, SamplerStuck, ValidationError
from .metrics import SimulationRecord, rmse_columns, tau_b_columns
from .ortho import johnson, orthogonalize
from .realloc import _finish, corpa, regpa

SPECTRUM_FLOOR = 1e-8


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    path: tuple = ()

    def child(self, role: str, index: int = 0) -> "RngStream":
        return RngStream(self.master_seed, self.path + ((str(role), int(index)),))

    def generator(self) -> np.random.Generator:
        key = []
        for role, index in self.path:
            key.extend((zlib.crc32(role.encode()), index))
        seq = np.random.SeedSequence(int(self.master_seed) & (2**64 - 1), spawn_key=tuple(key))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    lambdas: np.ndarray

    @property
    def p(self) -> int:
        return len(self.lambdas)

    @classmethod
    def of(cls, lambdas) -> "EigenSpectrum":
        lam = np.sort(np.asarray(lambdas, dtype=float))[::-1]
        p = len(lam)
        if p < 2:
            raise ValidationError("a spectrum needs at least two eigenvalues")
        if abs(lam.sum() - p) > 1e-9 * p:
            raise ValidationError(f"eigenvalues sum to {lam.sum():.12g}, expected {p}")
        if lam[-1] <= SPECTRUM_FLOOR:
            raise ValidationError(f"smallest eigenvalue {lam[-1]:.3e} is not positive")
        return cls(_frozen(lam))


def sample_simplex(p: int, stream: RngStream, max_attempts: int = 1000) -> EigenSpectrum:
    """A spectrum uniform on {lambda : sum = p, lambda_1 >= ... >= lambda_p > 0}.

    Kraemer's method: the spacings of p-1 sorted uniforms cut [0, 1] into p
    pieces uniformly distributed on the simplex; scaling by p and sorting gives the
    ordered spectrum.  Draws with lambda_p <= 1e-8 are redrawn.
    """
    if p < 2:
        raise ValidationError("p must be at least 2")
    rng = stream.generator()
    for _ in range(max_attempts):
        cuts = np.sort(rng.random(p - 1))
        lam = np.diff(np.concatenate(([0.0], cuts, [1.0]))) * p
        lam = np.sort(lam)[::-1]
        if lam[-1] > SPECTRUM_FLOOR:
            return EigenSpectrum(_frozen(lam))
    raise SamplerStuck(f"no admissible spectrum after {max_attempts} draws")


def random_orthogonal(p: int, stream: RngStream) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix, signs fixed by R)."""
    if p < 2:
        raise ValidationError("p must be at least 2")
    g = stream.generator().standard_normal((p, p))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def map_correlation(
    spectrum: EigenSpectrum,
    seed_index: int,
    stream: RngStream,
    tol: float = 1e-8,
    max_iter: int = 1000,
    restarts: int = 5,
) -> CorrelationMatrix:
    """Correlation matrix with a prescribed spectrum by alternating projections.

    Starts from Q diag(lambda) Q^T with a random orthogonal Q, then alternates
    between resetting the diagonal to one and replacing the eigenvalues by the
    target (keeping the eigenvectors).  Iteration stops once the spectral iterate's
    diagonal and the unit-diagonal iterate's spectrum are both within ``tol``; the
    returned matrix is the unit-diagonal one.

    A start that has not converged after ``max_iter`` cycles is abandoned for a new
    random start drawn from a child stream, at most ``restarts`` times.
    """
    lam = np.asarray(spectrum.lambdas, dtype=float)
    p = len(lam)
    base = stream.child("map", seed_index)
    diag_res = spec_res = math.inf
    for attempt in range(restarts + 1):
        q = random_orthogonal(p, base if attempt == 0 else base.child("restart", attempt))
        r = (q * lam) @ q.T
        for _ in range(max_iter):
            diag_res = float(np.max(np.abs(np.diag(r) - 1.0)))
            np.fill_diagonal(r, 1.0)
            w, v = np.linalg.eigh(r)
            spec_res = float(np.max(np.abs(w[::-1] - lam)))
            if spec_res < tol and diag_res < tol:
                return validate(r)
            r = (v * lam[::-1]) @ v.T
    raise NoConvergence(
        f"alternating projections did not converge after {restarts + 1} starts of {max_iter} iterations",
        diag_residual=diag_res,
        spectrum_residual=spec_res,
    )


def sample_sphere(p: int, stream: RngStream) -> np.ndarray:
    """Uniform point on the unit sphere in R^p."""
    if p < 2:
        raise ValidationError("p must be at least 2")
    g = stream.generator().standard_normal(p)
    return g / np.linalg.norm(g)


def build_response(corr: CorrelationMatrix, u, r_squared: float = 0.8):
    """Response whose explainable part is sqrt(r_squared) * Z u for Johnson's Z.

    Returns ``(problem, rho_zy)`` with rho_zy = sqrt(r_squared) u and
    rho_xy = L_Z rho_zy.
    """
    if not (0.0 < r_squared <= 1.0):
        raise InvalidR2(f"r_squared must lie in (0, 1], got {r_squared}")
    u = np.asarray(u, dtype=float)
    if u.shape != (corr.p,) or abs(np.linalg.norm(u) - 1.0) > 1e-10:
        raise ValidationError("u must be a unit vector of length p")
    rho_zy = math.sqrt(r_squared) * u
    rho_xy = corr.sqrt @ rho_zy
    return AugmentedProblem.from_correlations(corr, rho_xy), rho_zy


# ---------------------------------------------------------------------------
# the run loop


def evaluate_cell(corr: CorrelationMatrix, responses: np.ndarray, r_squared: float, orth_set, realloc_set) -> dict:
    """Score every (orth, realloc) ORM against GD for a batch of responses.

    ``responses`` is n_u x p, one unit vector u per row.  Returns a dict mapping
    ``(orth, realloc)`` to a pair of length-n_u arrays (rmse, tau).  All subset
    regressions for the responses and for the GDA targets share one enumeration.
    """
    n_u = responses.shape[0]
    p = corr.p
    rho_zy = math.sqrt(r_squared) * np.asarray(responses, dtype=float).T
    rho_xy = corr.sqrt @ rho_zy
    orths = {m: (johnson(corr) if m == "Johnson" else orthogonalize(corr, m)) for m in orth_set}
    targets = [rho_xy]
    if "GDA" in realloc_set:
        targets.extend(orths[m].loading for m in orth_set)
    shap = shapley_from_table(subset_engine(corr, np.hstack(targets)))
    gd = shap[:, :n_u]
    out = {}
    for k, m in enumerate(orth_set):
        orth = orths[m]
        sq = (orth.gamma.T @ rho_xy) ** 2
        for a in realloc_set:
            if a == "IdA":
                d = sq
            else:
                if a == "GDA":
                    mat = _finish(shap[:, n_u + k * p : n_u + (k + 1) * p], "GDA", m)
                elif a == "CorPA":
                    mat = corpa(orth)
                else:
                    mat = regpa(orth)
                d = mat.values @ sq
            out[(m, a)] = (rmse_columns(gd, d), tau_b_columns(gd, d))
    return out


def _streams(config: SimulationConfig, p: int, ev: int):
    root = RngStream(config.master_seed)
    return (
        root.child("simplex", p).child("ev", ev),
        # eigenvector starts depend on (p, seed_index) only, as with rMAP(seed=j)
        root.child("eigvecs", p),
        root.child("response", p).child("ev", ev),
    )


def simulate_unit(config: SimulationConfig, p: int, ev: int):
    """All records for one eigenvalue set: n_seeds matrices x |orth| x |realloc|.

    Returns ``(records, detail)``; ``detail`` holds per-response rows when
    ``config.per_response`` is set.
    """
    s_simplex, s_eig, s_resp = _streams(config, p, ev)
    spectrum = sample_simplex(p, s_simplex)
    records, detail = [], []
    for seed in range(config.n_seeds):
        corr = map_correlation(spectrum, seed, s_eig, tol=config.map_tol, max_iter=config.map_max_iter)
        scen = classify_scenario(corr)
        vmax = float(np.max(vif(corr)))
        cell = s_resp.child("seed", seed)
        u = np.vstack([sample_sphere(p, cell.child("u", i)) for i in range(config.n_responses)])
        scores = evaluate_cell(corr, u, config.r_squared, config.orth_set, config.realloc_set)
        for m in config.orth_set:
            for a in config.realloc_set:
                r, t = scores[(m, a)]
                records.append(
                    SimulationRecord(
                        p=p,
                        ev_index=ev,
                        seed_index=seed,
                        orth=m,
                        realloc=a,
                        lambda1=float(corr.spectrum[0]),
                        lambda1_ratio=scen.lambda1_ratio,
                        vif_max=vmax,
                        vif_ratio=scen.vif_ratio,
                        scenario=scen.label,
                        mean_rmse=math.fsum(r) / len(r),
                        mean_tau=math.fsum(t) / len(t),
                        n_responses=config.n_responses,
                    )
                )
                if config.per_response:
                    detail.extend((p, ev, seed, m, a, i, float(r[i]), float(t[i])) for i in range(len(r)))
    return records, detail


def _unit_job(args):
    config, p, ev = args
    return (p, ev), simulate_unit(config, p, ev)


def units(config: SimulationConfig) -> list:
    return [(p, ev) for p in range(config.p_min, config.p_max + 1) for ev in range(config.n_ev_for(p))]


def worker_count(explicit: Optional[int] = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("RELIMP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"RELIMP_THREADS must be an integer, got {env!r}") from None
    return 1


def run_simulation(
    config: SimulationConfig, workers: Optional[int] = None, skip: Iterable = ()
) -> Iterator:
    """Yield ``((p, ev_index), records, detail)`` for every eigenvalue set, in key order.

    Units listed in ``skip`` are not computed.  Output is identical for any number
    of workers: each unit derives its own streams, and results are yielded in order.
    """
    config.validate()
    skip = set(skip)
    todo = [u for u in units(config) if u not in skip]
    n = worker_count(workers)
    if n == 1 or len(todo) < 2:
        for p, ev in todo:
            recs, detail = simulate_unit(config, p, ev)
            yield (p, ev), recs, detail
        return
    with ProcessPoolExecutor(max_workers=n) as pool:
        jobs = ((config, p, ev) for p, ev in todo)
        for key, (recs, detail) in pool.map(_unit_job, jobs, chunksize=max(1, len(todo) // (8 * n))):
            yield key, recs, detail
