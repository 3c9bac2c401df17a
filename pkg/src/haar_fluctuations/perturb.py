"""
Limiting eigenvalues, perturbation terms and fluctuation-exponent estimation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linear_sum_assignment
from scipy.stats import linregress

from haar_fluctuations.model import ModelKind, ModelSpec, build_reduced, sample_nontrivial_eigenvalues
from haar_fluctuations.ncpoly import decompose, eval_univariate
from haar_fluctuations.randmat import ComplexMatrix, RngStream

logger = logging.getLogger(__name__)

CLUSTER_TOL = 1e-9
EXACT_TOL = 1e-12
MIN_GRID_RATIO = 4.0


class RepeatedEigenvalueError(ValueError):
    """Second-order term requested for a non-simple eigenvalue."""


class MultipleLimitError(ValueError):
    """The series needs simple limits; multiplicities are handled by the laws module."""


class DegenerateGridError(ValueError):
    """The N-grid cannot support a slope fit."""


# ============================================================================
# LIMITS
# ============================================================================

@dataclass(frozen=True)
class LimitSpectrum:
    """Limits μ_i in canonical order, grouped into clusters of equal value.

    ``values`` has one entry per nontrivial eigenvalue; ``clusters`` lists the
    indices of ``values`` sharing a limit, in index order. Rank r of a cluster
    is its r-th largest eigenvalue (by real part).
    """
    values: tuple[complex, ...]
    clusters: tuple[tuple[int, ...], ...]

    @classmethod
    def from_values(cls, values, tol: float = CLUSTER_TOL) -> "LimitSpectrum":
        values = tuple(complex(v) for v in values)
        clusters: list[list[int]] = []
        for i, v in enumerate(values):
            for cluster in clusters:
                if abs(values[cluster[0]] - v) <= tol:
                    cluster.append(i)
                    break
            else:
                clusters.append([i])
        return cls(values=values, clusters=tuple(tuple(c) for c in clusters))

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def distinct(self) -> tuple[complex, ...]:
        return tuple(self.values[c[0]] for c in self.clusters)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.clusters)

    @property
    def simple(self) -> bool:
        return all(m == 1 for m in self.multiplicities)

    def cluster_of(self, index: int) -> tuple[int, ...]:
        for cluster in self.clusters:
            if index in cluster:
                return cluster
        raise IndexError(f"Limit index {index} out of range for {self.dim} limits")

    def rank_of(self, index: int) -> int:
        """1-based rank of ``index`` within its cluster."""
        return self.cluster_of(index).index(index) + 1

    def index_of(self, limit: complex, rank: int = 1, tol: float = 1e-6) -> int:
        """Index of the rank-th eigenvalue converging to ``limit``.

        Raises:
            ValueError: No such limit, or rank beyond its multiplicity.
        """
        for cluster in self.clusters:
            if abs(self.values[cluster[0]] - complex(limit)) <= tol:
                if not 1 <= rank <= len(cluster):
                    raise ValueError(
                        f"Rank {rank} out of range for limit {limit} with multiplicity {len(cluster)}"
                    )
                return cluster[rank - 1]
        raise ValueError(f"{limit} is not a limiting eigenvalue; limits are {list(self.distinct)}")

    def label(self, index: int) -> str:
        value = self.values[index]
        text = f"{value.real:g}" if value.imag == 0 else f"{value:g}"
        return f"{text}#{self.rank_of(index)}"


def limiting_eigenvalues(spec: ModelSpec) -> LimitSpectrum:
    """Almost-sure limits of the nontrivial eigenvalues.

    Closed forms for Conjugation (P1(α_i), Q1(β_j)), Rotation (±α_i) and
    SumConjugation (α_i, β_j); eigenvalues of M̃ for GeneralTwoVar.
    """
    if spec.kind is ModelKind.ROTATION:
        values = [*spec.alphas, *(-a for a in spec.alphas)]
    elif spec.kind is ModelKind.SUM_CONJUGATION:
        values = [*spec.alphas, *spec.betas]
    elif spec.kind is ModelKind.CONJUGATION:
        parts = decompose(spec.poly)
        values = [eval_univariate(parts.p1, a) for a in spec.alphas]
        values += [eval_univariate(parts.q1, b) for b in spec.betas]
    else:
        m_part = build_reduced(spec, np.zeros(spec.u_hat_shape, dtype=complex)).m_part
        eigs = np.linalg.eigvals(m_part)
        values = sorted(eigs, key=lambda z: (-round(z.real, 12), -round(z.imag, 12)))
    return LimitSpectrum.from_values(values)


# ============================================================================
# PERTURBATION TERMS
# ============================================================================

def _check_square(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {x.shape}")
    return x


def pi1(x: ComplexMatrix, p: int) -> complex:
    """First-order term: the diagonal entry x_pp."""
    x = _check_square(x)
    if not 0 <= p < x.shape[0]:
        raise IndexError(f"Index {p} out of range for a {x.shape[0]}x{x.shape[0]} matrix")
    return complex(x[p, p])


def pi2(lambdas, x: ComplexMatrix, p: int) -> complex:
    """Second-order term Σ_{i≠p} x_ip x_pi / (λ_p − λ_i).

    Raises:
        RepeatedEigenvalueError: If two of the λ coincide.
    """
    x = _check_square(x)
    lam = np.asarray(lambdas, dtype=complex)
    n = x.shape[0]
    if lam.shape != (n,):
        raise ValueError(f"Expected {n} eigenvalues, got {lam.shape}")
    if not 0 <= p < n:
        raise IndexError(f"Index {p} out of range for a {n}x{n} matrix")
    gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(n)
    if np.any(gaps == 0):
        i, j = np.argwhere(gaps == 0)[0]
        raise RepeatedEigenvalueError(f"Eigenvalues {i} and {j} coincide ({lam[i]})")
    others = np.arange(n) != p
    return complex(np.sum(x[others, p] * x[p, others] / (lam[p] - lam[others])))


def _normalize_columns(r: np.ndarray) -> np.ndarray:
    r = r / np.linalg.norm(r, axis=0)
    for j in range(r.shape[1]):
        nonzero = np.flatnonzero(np.abs(r[:, j]) > 1e-14)
        if nonzero.size:
            lead = r[nonzero[0], j]
            r[:, j] *= abs(lead) / lead
    return r


def match_to_limits(eigs, limits: LimitSpectrum) -> np.ndarray:
    """Reorders eigenvalues so that entry k belongs to ``limits.values[k]``.

    Minimal total distance assignment; inside a cluster the matched
    eigenvalues are sorted by decreasing real part (then imaginary part).
    Ties are broken by the solver, deterministically in index order.

    Raises:
        ValueError: If the counts differ.
    """
    eigs = np.asarray(eigs, dtype=complex).ravel()
    targets = np.asarray(limits.values, dtype=complex)
    if eigs.size != targets.size:
        raise ValueError(f"Expected {targets.size} eigenvalues, got {eigs.size}")
    cost = np.abs(eigs[:, None] - targets[None, :])
    rows, cols = linear_sum_assignment(cost)
    matched = np.empty_like(targets)
    matched[cols] = eigs[rows]
    for cluster in limits.clusters:
        if len(cluster) > 1:
            idx = list(cluster)
            group = matched[idx]
            order = np.lexsort((-group.imag, -group.real))
            matched[idx] = group[order]
    return matched


def fluctuation_series_approx(spec: ModelSpec, u_hat: ComplexMatrix, i: int) -> complex:
    """μ_i + Π_{i,1}(W) + Π_{i,2}(W) with W = R̃⁻¹ Ṽ R̃.

    Raises:
        MultipleLimitError: If some limit is not simple.
    """
    limits = limiting_eigenvalues(spec)
    if not limits.simple:
        raise MultipleLimitError(
            "Series approximation needs simple limits; use laws.law_for_target for multiplicities"
        )
    reduced = build_reduced(spec, u_hat)
    w, r = np.linalg.eig(reduced.m_part)
    # align eigenvectors with the canonical limit order
    cost = np.abs(w[:, None] - np.asarray(limits.values)[None, :])
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(w.size, dtype=int)
    order[cols] = rows
    r = _normalize_columns(r[:, order])
    x = np.linalg.solve(r, reduced.v_part @ r)
    return limits.values[i] + pi1(x, i) + pi2(limits.values, x, i)


# ============================================================================
# EXPONENT ESTIMATION
# ============================================================================

@dataclass(frozen=True)
class ExponentEstimate:
    """κ̂ from the slope of log median|μ^(N) − μ| against log N."""
    kappa_hat: float
    stderr: float
    n_grid: tuple[int, ...]
    medians: tuple[float, ...]
    exact: bool = False

    def as_kappa(self) -> int:
        """Nearest admissible integer exponent (at least 1)."""
        if self.exact:
            raise ValueError("Deviations vanish on the whole grid; there is no scaling exponent")
        return max(1, int(round(self.kappa_hat)))


def check_grid(n_grid) -> tuple[int, ...]:
    grid = tuple(sorted({int(n) for n in n_grid}))
    if len(grid) < 3:
        raise DegenerateGridError(f"Need at least 3 distinct sizes, got {grid}")
    if grid[-1] / grid[0] < MIN_GRID_RATIO:
        raise DegenerateGridError(
            f"Grid {grid} spans a factor {grid[-1] / grid[0]:.2f} < {MIN_GRID_RATIO}"
        )
    return grid


def auto_grid(spec: ModelSpec) -> tuple[int, ...]:
    """Small grid ending at spec.n, used by ``kappa: auto``."""
    n = spec.n
    floor = 2 * max(spec.r, spec.s) + 2
    return tuple(sorted({max(floor, n // 8), max(floor, n // 4), max(floor, n // 2), n}))


def sample_chunks(count: int, n_jobs: int) -> list[range]:
    n_chunks = max(1, min(count, 4 * max(1, n_jobs)))
    bounds = np.linspace(0, count, n_chunks + 1).astype(int)
    return [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _abs_deviations(spec: ModelSpec, limits: LimitSpectrum, index: int,
                    stream: RngStream, indices: range) -> np.ndarray:
    out = np.empty(len(indices))
    for pos, k in enumerate(indices):
        eigs = sample_nontrivial_eigenvalues(spec, stream.child(k))
        out[pos] = abs(match_to_limits(eigs, limits)[index] - limits.values[index])
    return out


def estimate_exponent(
    spec: ModelSpec,
    i: int,
    n_grid,
    samples_per_n: int,
    rng: RngStream,
    n_jobs: int = 1,
) -> ExponentEstimate:
    """Estimates the fluctuation exponent κ of limit index i.

    Args:
        spec (ModelSpec): Model (its N is replaced by each grid size).
        i (int): Index into ``limiting_eigenvalues(spec).values``.
        n_grid: At least 3 sizes with max/min >= 4.
        samples_per_n (int): Samples per grid size.
        rng (RngStream): Base stream; grid point g, sample k use ``rng.child(g).child(k)``.
        n_jobs (int): joblib workers; the result does not depend on it.

    Returns:
        ExponentEstimate: ``exact`` is set when all medians are below 1e-12.

    Raises:
        DegenerateGridError: If the grid is too small or too narrow.
    """
    grid = check_grid(n_grid)
    if samples_per_n < 1:
        raise ValueError(f"samples_per_n must be positive, got {samples_per_n}")
    limits = limiting_eigenvalues(spec)
    if not 0 <= i < limits.dim:
        raise IndexError(f"Limit index {i} out of range for {limits.dim} limits")

    medians = []
    with Parallel(n_jobs=n_jobs) as parallel:
        for g, n in enumerate(grid):
            spec_n = spec.with_n(n)
            stream = rng.child(g)
            parts = parallel(
                delayed(_abs_deviations)(spec_n, limits, i, stream, chunk)
                for chunk in sample_chunks(samples_per_n, n_jobs)
            )
            median = float(np.median(np.concatenate(parts)))
            logger.debug(f"N={n}: median |deviation| = {median:.4e}")
            medians.append(median)

    medians_arr = np.asarray(medians)
    if np.all(medians_arr < EXACT_TOL):
        logger.info(f"Limit {limits.label(i)}: deviations at solver noise, flagged exact")
        return ExponentEstimate(math.inf, 0.0, grid, tuple(medians), exact=True)

    fit = linregress(np.log(grid), np.log(np.maximum(medians_arr, 1e-300)))
    estimate = ExponentEstimate(
        kappa_hat=-2.0 * fit.slope,
        stderr=2.0 * fit.stderr,
        n_grid=grid,
        medians=tuple(medians),
    )
    logger.info(f"Limit {limits.label(i)}: kappa_hat = {estimate.kappa_hat:.3f} ± {estimate.stderr:.3f}")
    return estimate
