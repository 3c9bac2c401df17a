"""
Repeated-sample experiments: scaled deviations, histograms and KS verdicts.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from haar_fluctuations.laws import ORACLE_DRAWS, FluctuationLaw
from haar_fluctuations.model import ModelSpec, sample_nontrivial_eigenvalues
from haar_fluctuations.perturb import LimitSpectrum, limiting_eigenvalues, match_to_limits, sample_chunks
from haar_fluctuations.randmat import RngLike, RngStream

logger = logging.getLogger(__name__)

MIN_KS_SAMPLES = 100
KS_QUANTILE_1PCT = 1.628
AMBIGUITY_FACTOR = 10.0
SAMPLE_COLUMNS = ["sample_index", "limit_label", "scaled_deviation_re", "scaled_deviation_im"]

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "ExperimentSamples",
    "HistogramData",
    "InsufficientSamplesError",
    "evaluate",
    "histogram",
    "ks_one_sample",
    "ks_two_sample",
    "match_to_limits",
    "run_experiment",
]


class InsufficientSamplesError(ValueError):
    """Too few samples for a KS verdict."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment panel.

    ``target`` indexes ``limiting_eigenvalues(spec).values``; use
    ``for_limit`` to address it by limit value and rank instead.
    """
    spec: ModelSpec
    target: int
    kappa: float
    num_samples: int
    seed: int
    normalizer: complex = 1.0

    def __post_init__(self) -> None:
        if int(self.num_samples) < 1:
            raise ValueError(f"num_samples must be positive, got {self.num_samples}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if complex(self.normalizer) == 0:
            raise ValueError("normalizer must be nonzero")
        dim = self.spec.reduced_dim
        if not 0 <= int(self.target) < dim:
            raise ValueError(f"Target index {self.target} out of range for {dim} limits")
        RngStream(int(self.seed))  # seed range check
        object.__setattr__(self, "normalizer", complex(self.normalizer))

    @classmethod
    def for_limit(cls, spec: ModelSpec, limit: complex, rank: int = 1, **kwargs) -> "ExperimentConfig":
        index = limiting_eigenvalues(spec).index_of(limit, rank)
        return cls(spec=spec, target=index, **kwargs)

    @property
    def scale(self) -> float:
        return self.spec.n ** (self.kappa / 2.0)


# ============================================================================
# SAMPLING
# ============================================================================

@dataclass(frozen=True)
class ExperimentSamples:
    """Matched eigenvalues of every sample plus the target's scaled deviations."""
    config: ExperimentConfig
    limits: LimitSpectrum
    matched: np.ndarray
    deviations: np.ndarray
    runtime: float

    @property
    def label(self) -> str:
        return self.limits.label(self.config.target)

    def channel(self, part: str) -> np.ndarray:
        return self.deviations.real if part == "re" else self.deviations.imag

    def retarget(self, target: int, kappa: float, normalizer: complex = 1.0) -> "ExperimentSamples":
        """Same draws, deviations of another limit (panels sharing one run)."""
        config = replace(self.config, target=target, kappa=kappa, normalizer=normalizer)
        deviations = config.scale * (self.matched[:, target] - self.limits.values[target]) / config.normalizer
        return replace(self, config=config, deviations=deviations)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "sample_index": np.arange(self.deviations.size),
                "limit_label": self.label,
                "scaled_deviation_re": self.deviations.real,
                "scaled_deviation_im": self.deviations.imag,
            },
            columns=SAMPLE_COLUMNS,
        )


def _matched_chunk(spec: ModelSpec, limits: LimitSpectrum, seed: int, indices: range) -> np.ndarray:
    out = np.empty((len(indices), limits.dim), dtype=complex)
    for pos, k in enumerate(indices):
        eigs = sample_nontrivial_eigenvalues(spec, RngStream(seed, k))
        out[pos] = match_to_limits(eigs, limits)
    return out


def _warn_ambiguity(config: ExperimentConfig, limits: LimitSpectrum) -> None:
    distinct = np.asarray(limits.distinct)
    if distinct.size < 2:
        return
    window = AMBIGUITY_FACTOR * config.spec.n ** (-config.kappa / 2.0)
    gaps = np.abs(distinct[:, None] - distinct[None, :]) + np.diag(np.full(distinct.size, np.inf))
    if np.min(gaps) < window:
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        logger.warning(
            f"Limits {distinct[i]:.6g} and {distinct[j]:.6g} lie within {window:.3g} "
            f"(10 N^(-kappa/2) at N={config.spec.n}); eigenvalue assignment may be ambiguous"
        )


def run_experiment(config: ExperimentConfig, n_jobs: int = 1) -> ExperimentSamples:
    """Draws ``num_samples`` models and scales the target's deviation.

    Sample k uses ``RngStream(seed, k)``, so the output is identical for any
    ``n_jobs``. Each deviation is N^(κ/2)(μ^(N) − μ) / normalizer.
    """
    spec = config.spec
    limits = limiting_eigenvalues(spec)
    _warn_ambiguity(config, limits)

    start = time.perf_counter()
    logger.info(
        f"Running {config.num_samples} samples of {spec.kind.value} at N={spec.n}, "
        f"target {limits.label(config.target)}, kappa={config.kappa}"
    )
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_matched_chunk)(spec, limits, config.seed, chunk)
        for chunk in sample_chunks(config.num_samples, n_jobs)
    )
    matched = np.concatenate(parts, axis=0)
    target = config.target
    deviations = config.scale * (matched[:, target] - limits.values[target]) / config.normalizer
    runtime = time.perf_counter() - start
    logger.info(f"Finished {config.num_samples} samples in {runtime:.2f}s")
    return ExperimentSamples(
        config=config,
        limits=limits,
        matched=matched,
        deviations=deviations,
        runtime=runtime,
    )


# ============================================================================
# GOODNESS OF FIT
# ============================================================================

def _check_count(name: str, values: np.ndarray) -> None:
    if values.size < MIN_KS_SAMPLES:
        raise InsufficientSamplesError(
            f"{name} has {values.size} samples; KS verdicts need at least {MIN_KS_SAMPLES}"
        )


def ks_one_sample(samples, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    values = np.asarray(samples, dtype=float).ravel()
    _check_count("Sample", values)
    return float(stats.kstest(values, cdf).statistic)


def ks_two_sample(a, b) -> float:
    """Sup distance between two empirical CDFs."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    _check_count("First sample", a)
    _check_count("Second sample", b)
    return float(stats.ks_2samp(a, b).statistic)


def ks_threshold(n: int, m: int | None = None) -> float:
    """Twice the asymptotic 1% KS quantile (finite-N allowance)."""
    effective = n if m is None else n * m / (n + m)
    return 2.0 * KS_QUANTILE_1PCT / math.sqrt(effective)


# ============================================================================
# HISTOGRAMS
# ============================================================================

@dataclass(frozen=True)
class HistogramData:
    """Area-normalized histogram; ``out_of_range`` counts samples outside the edges."""
    edges: np.ndarray
    counts: np.ndarray
    heights: np.ndarray
    out_of_range: int = 0

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def area(self) -> float:
        return float(np.sum(self.heights * self.widths))

    def to_frame(self, overlay: Callable | None = None) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "left": self.edges[:-1],
                "right": self.edges[1:],
                "center": self.centers,
                "count": self.counts,
                "height": self.heights,
            }
        )
        if overlay is not None:
            frame["theory"] = np.asarray(overlay(self.centers), dtype=float)
        return frame


def histogram(
    samples,
    bins: int | None = None,
    bin_width: float | None = None,
    value_range: tuple[float, float] | None = None,
) -> HistogramData:
    """Histogram with area-1 heights; default bin count ceil(2 n^(1/3)).

    All-equal samples (including a single sample) give one bin of width 1
    centred on the value.
    """
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("histogram needs at least one sample")
    if bins is not None and bin_width is not None:
        raise ValueError("Pass either bins or bin_width, not both")

    lo, hi = value_range if value_range is not None else (values.min(), values.max())
    if value_range is not None and not lo < hi:
        raise ValueError(f"Invalid range {value_range}")
    inside = values[(values >= lo) & (values <= hi)]
    out_of_range = values.size - inside.size
    if out_of_range:
        logger.warning(f"{out_of_range} of {values.size} samples fall outside [{lo:g}, {hi:g}]")

    if lo == hi:
        edges = np.array([lo - 0.5, hi + 0.5])
    elif bin_width is not None:
        if bin_width <= 0:
            raise ValueError(f"bin_width must be positive, got {bin_width}")
        n_bins = max(1, math.ceil((hi - lo) / bin_width))
        edges = lo + bin_width * np.arange(n_bins + 1)
    else:
        n_bins = bins if bins is not None else math.ceil(2 * values.size ** (1 / 3))
        edges = np.linspace(lo, hi, int(n_bins) + 1)

    counts, edges = np.histogram(inside, bins=edges)
    total = counts.sum()
    heights = counts / (total * np.diff(edges)) if total else np.zeros(counts.size)
    return HistogramData(edges=edges, counts=counts, heights=heights, out_of_range=int(out_of_range))


# ============================================================================
# REPORTS
# ============================================================================

@dataclass(frozen=True)
class ExperimentReport:
    """Samples, histogram and KS verdict of one panel."""
    label: str
    samples: np.ndarray
    histogram: HistogramData
    ks_statistic: float
    threshold: float
    method: str
    law: dict = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return self.ks_statistic < self.threshold

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def evaluate(
    samples: ExperimentSamples,
    law: FluctuationLaw,
    threshold: float | None = None,
    channel: str = "re",
    bins: int | None = None,
    bin_width: float | None = None,
    value_range: tuple[float, float] | None = None,
    rng: RngLike | None = None,
    oracle_draws: int = ORACLE_DRAWS,
) -> ExperimentReport:
    """Compares the scaled deviations with ``law`` (rescaled by the normalizer).

    One-sample KS against the closed-form CDF when there is one, otherwise a
    two-sample KS against ``oracle_draws`` draws of the law.
    """
    start = time.perf_counter()
    target_law = law.rescaled(samples.config.normalizer).channel(channel)
    values = samples.channel(channel)

    if target_law.has_closed_form:
        statistic = ks_one_sample(values, target_law.cdf)
        method = "one-sample"
        default_threshold = ks_threshold(values.size)
    else:
        oracle_rng = rng if rng is not None else RngStream(samples.config.seed).child(1 << 20)
        oracle = np.asarray(target_law.sample(oracle_rng, oracle_draws), dtype=float)
        statistic = ks_two_sample(values, oracle)
        method = "two-sample"
        default_threshold = ks_threshold(values.size, oracle.size)

    report = ExperimentReport(
        label=samples.label,
        samples=values,
        histogram=histogram(values, bins=bins, bin_width=bin_width, value_range=value_range),
        ks_statistic=statistic,
        threshold=default_threshold if threshold is None else float(threshold),
        method=method,
        law=target_law.describe(),
        runtime=samples.runtime + time.perf_counter() - start,
    )
    logger.info(
        f"{report.label}: {method} KS = {statistic:.4f} vs threshold {report.threshold:.4f} -> {report.verdict}"
    )
    return report


def save_samples(samples: ExperimentSamples, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples.to_frame().to_csv(path, index=False)
    return path


def load_samples(path: Path) -> pd.DataFrame:
    """Reads a samples CSV written by ``save_samples``.

    Raises:
        ValueError: If required columns are missing.
    """
    frame = pd.read_csv(path)
    missing = sorted(set(SAMPLE_COLUMNS) - set(frame.columns))
    if missing:
        raise ValueError(f"Missing columns in {path}: {missing}")
    return frame
