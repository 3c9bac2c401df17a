"""
Limiting fluctuation laws of the nontrivial eigenvalues.

Each law describes the limit of N^(κ/2) (μ^(N) − μ) for one target limit and
carries an oracle sampler; closed-form densities and CDFs are provided where
they exist (Gaussian, exponential mixtures, shared-eigenvalue and equal-pair
components).
"""
from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import pandas as pd
from scipy import stats

from haar_fluctuations.model import ModelKind, ModelSpec
from haar_fluctuations.ncpoly import NCPolynomial, decompose, eval_component, eval_univariate
from haar_fluctuations.perturb import CLUSTER_TOL, LimitSpectrum, limiting_eigenvalues
from haar_fluctuations.randmat import RngLike, RngStream, as_generator, ginibre

logger = logging.getLogger(__name__)

ORACLE_DRAWS = 100_000
COINCIDENCE_RTOL = 1e-9
PARTS = ("re", "im")


class MultiplicityRegimeError(ValueError):
    """Coincident limits: the simple-eigenvalue formulas do not apply."""


class DegenerateMixtureError(ValueError):
    """Exponential-mixture coefficients that are zero or (nearly) coincide."""


class UnsupportedRegimeError(ValueError):
    """No fluctuation law is implemented for this target."""


def _check_part(part: str) -> str:
    if part not in PARTS:
        raise ValueError(f"Channel must be one of {PARTS}, got {part!r}")
    return part


def _as_output(values: np.ndarray, x) -> np.ndarray | float:
    return float(values.reshape(-1)[0]) if np.ndim(x) == 0 else values


def _real_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if np.any(arr.imag != 0):
        raise ValueError(f"{name} must be real")
    return arr.real.astype(float)


# ============================================================================
# LAW TYPES
# ============================================================================

class FluctuationLaw(ABC):
    """Limit law of the scaled deviation of one nontrivial eigenvalue."""

    variant = "FluctuationLaw"

    @property
    @abstractmethod
    def kappa(self) -> int:
        """Scaling exponent: deviations are multiplied by N^(κ/2)."""

    @property
    def is_real(self) -> bool:
        return True

    @property
    def has_closed_form(self) -> bool:
        return False

    @abstractmethod
    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        """Draws ``size`` independent values from the law."""

    def density(self, x):
        raise NotImplementedError(f"{self.variant} has no closed-form density; use sample()")

    def cdf(self, x):
        raise NotImplementedError(f"{self.variant} has no closed-form CDF; use sample()")

    def channel(self, part: str) -> "FluctuationLaw":
        """Law of the real or imaginary part of the deviation."""
        _check_part(part)
        if not self.is_real:
            return ChannelView(self, part)
        if part == "re":
            return self
        raise ValueError(f"{self.variant} is real-valued; its imaginary channel is identically zero")

    def rescaled(self, factor: complex) -> "FluctuationLaw":
        """Law of X / factor."""
        factor = complex(factor)
        if factor == 0:
            raise ValueError("Cannot rescale by zero")
        if factor == 1:
            return self
        return Rescaled(self, factor)

    @abstractmethod
    def _parameters(self) -> dict:
        ...

    def describe(self) -> dict:
        return {
            "variant": self.variant,
            "kappa": self.kappa,
            "closed_form": self.has_closed_form,
            **self._parameters(),
        }


@dataclass(frozen=True)
class GaussianScaled(FluctuationLaw):
    """Law of c·x with x standard normal."""
    coefficient: complex

    variant = "GaussianScaled"

    def __post_init__(self) -> None:
        c = complex(self.coefficient)
        if c == 0:
            raise ValueError("GaussianScaled needs a nonzero coefficient")
        object.__setattr__(self, "coefficient", c)

    @property
    def kappa(self) -> int:
        return 1

    @property
    def is_real(self) -> bool:
        return self.coefficient.imag == 0

    @property
    def has_closed_form(self) -> bool:
        return self.is_real

    def _dist(self):
        if not self.is_real:
            raise NotImplementedError("Complex Gaussian coefficient: use channel() first")
        return stats.norm(scale=abs(self.coefficient.real))

    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        x = as_generator(rng).standard_normal(size)
        return self.coefficient.real * x if self.is_real else self.coefficient * x

    def density(self, x):
        return self._dist().pdf(x)

    def cdf(self, x):
        return self._dist().cdf(x)

    def channel(self, part: str) -> FluctuationLaw:
        _check_part(part)
        value = self.coefficient.real if part == "re" else self.coefficient.imag
        if value == 0:
            raise ValueError(f"The {part} channel of {self.coefficient} x is identically zero")
        return GaussianScaled(value)

    def rescaled(self, factor: complex) -> FluctuationLaw:
        if complex(factor) == 0:
            raise ValueError("Cannot rescale by zero")
        return GaussianScaled(self.coefficient / complex(factor))

    def _parameters(self) -> dict:
        return {"coefficient": self.coefficient, "variance": abs(self.coefficient) ** 2}


def _partial_fraction_weights(coeffs: np.ndarray) -> np.ndarray:
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise DegenerateMixtureError("Need at least one coefficient")
    if np.any(coeffs == 0):
        raise DegenerateMixtureError("Mixture coefficients must be nonzero")
    scale = np.max(np.abs(coeffs))
    off = ~np.eye(coeffs.size, dtype=bool)
    gaps = np.abs(coeffs[:, None] - coeffs[None, :])
    if np.any(gaps[off] < COINCIDENCE_RTOL * scale):
        raise DegenerateMixtureError(
            f"Coefficients {coeffs.tolist()} (nearly) coincide; no partial-fraction density, "
            "fall back to oracle sampling and a two-sample test"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(off, coeffs[:, None] / (coeffs[:, None] - coeffs[None, :]), 1.0)
    return np.prod(ratios, axis=1)


def expmixture_density(coeffs, x):
    """Density of Σ c_j E_j (E_j iid standard exponential) by partial fractions.

    f(x) = Σ_j A_j / |c_j| · exp(−x / c_j) on the half-line of sign(c_j),
    A_j = Π_{k≠j} c_j / (c_j − c_k). Positive coefficients contribute on
    x >= 0, negative ones on x < 0.

    Raises:
        DegenerateMixtureError: Zero or nearly coincident coefficients.
    """
    c = _real_array(coeffs, "Mixture coefficients")
    weights = _partial_fraction_weights(c)
    xs = np.atleast_1d(np.asarray(x, dtype=float))[..., None]
    active = np.where(c > 0, xs >= 0, xs < 0)
    exponent = np.where(active, -xs / c, -np.inf)
    values = np.sum(weights / np.abs(c) * np.exp(exponent), axis=-1)
    return _as_output(values, x)


def expmixture_cdf(coeffs, x):
    """Exact CDF of Σ c_j E_j, the integral of ``expmixture_density``."""
    c = _real_array(coeffs, "Mixture coefficients")
    weights = _partial_fraction_weights(c)
    xs = np.atleast_1d(np.asarray(x, dtype=float))[..., None]
    left = (c < 0) & (xs < 0)
    right = (c > 0) & (xs >= 0)
    left_tail = np.sum(weights * np.exp(np.where(left, -xs / c, -np.inf)), axis=-1)
    right_tail = np.sum(weights * np.exp(np.where(right, -xs / c, -np.inf)), axis=-1)
    values = np.where(xs[..., 0] < 0, left_tail, 1.0 - right_tail)
    return _as_output(np.clip(values, 0.0, 1.0), x)


@dataclass(frozen=True)
class ExpMixture(FluctuationLaw):
    """Law of Σ c_j E_j with distinct nonzero c_j."""
    coefficients: tuple[complex, ...]

    variant = "ExpMixture"

    def __post_init__(self) -> None:
        coeffs = tuple(complex(c) for c in self.coefficients)
        arr = np.asarray(coeffs, dtype=complex)
        if arr.size == 0 or np.any(arr == 0):
            raise DegenerateMixtureError("Mixture coefficients must be nonzero")
        off = ~np.eye(arr.size, dtype=bool)
        gaps = np.abs(arr[:, None] - arr[None, :])
        if np.any(gaps[off] < COINCIDENCE_RTOL * np.max(np.abs(arr))):
            raise DegenerateMixtureError(f"Mixture coefficients must be distinct, got {coeffs}")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def kappa(self) -> int:
        return 2

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.coefficients)

    @property
    def has_closed_form(self) -> bool:
        return self.is_real

    @property
    def real_coefficients(self) -> tuple[float, ...]:
        return tuple(c.real for c in self.coefficients)

    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        e = as_generator(rng).standard_exponential((size, len(self.coefficients)))
        if self.is_real:
            return e @ np.asarray(self.real_coefficients)
        return e @ np.asarray(self.coefficients)

    def density(self, x):
        return expmixture_density(self.real_coefficients, x)

    def cdf(self, x):
        return expmixture_cdf(self.real_coefficients, x)

    def channel(self, part: str) -> FluctuationLaw:
        _check_part(part)
        if self.is_real:
            return super().channel(part)
        values = [c.real if part == "re" else c.imag for c in self.coefficients]
        values = [v for v in values if v != 0]
        if not values:
            raise ValueError(f"The {part} channel of this mixture is identically zero")
        try:
            return ExpMixture(tuple(values))
        except DegenerateMixtureError:
            return ChannelView(self, part)

    def rescaled(self, factor: complex) -> FluctuationLaw:
        if complex(factor) == 0:
            raise ValueError("Cannot rescale by zero")
        return ExpMixture(tuple(c / complex(factor) for c in self.coefficients))

    def _parameters(self) -> dict:
        return {"coefficients": list(self.coefficients)}


def sample_matrix_spectral(gamma, m: int, rng: RngLike, size: int | None = None) -> np.ndarray:
    """Eigenvalues of Z Γ Z* (Z m×s standard complex Gaussian), decreasing.

    Returns one draw of shape (m,), or (size, m) when ``size`` is given.
    """
    g = _real_array(gamma, "Gamma")
    if g.ndim != 1 or g.size == 0:
        raise ValueError("Gamma must be a non-empty diagonal")
    z = ginibre(m, g.size, rng, size=1 if size is None else size)
    mats = (z * g) @ np.conj(np.swapaxes(z, -1, -2))
    eigs = np.linalg.eigvalsh(mats)[..., ::-1]
    return eigs[0] if size is None else eigs


@dataclass(frozen=True)
class MatrixSpectral(FluctuationLaw):
    """Law of the rank-th largest eigenvalue of Z Γ Z*, Z of size m×s."""
    gamma: tuple[float, ...]
    m: int
    rank: int = 1

    variant = "MatrixSpectral"

    def __post_init__(self) -> None:
        gamma = tuple(float(v) for v in _real_array(self.gamma, "Gamma"))
        if not gamma:
            raise ValueError("Gamma must not be empty")
        if int(self.m) < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 1 <= int(self.rank) <= int(self.m):
            raise ValueError(f"rank must lie in [1, {self.m}], got {self.rank}")
        object.__setattr__(self, "gamma", gamma)

    @property
    def kappa(self) -> int:
        return 2

    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        return sample_matrix_spectral(self.gamma, self.m, rng, size=size)[:, self.rank - 1]

    def _parameters(self) -> dict:
        return {"gamma": list(self.gamma), "m": self.m, "rank": self.rank}


SHARED_COMPONENTS = ("zeta", "xi1", "xi3", "xi2")
_SHARED_KAPPA = {"zeta": 2, "xi1": 1, "xi3": 2, "xi2": 1}


def _scaling_name(kappa: int) -> str:
    return "N" if kappa == 2 else "sqrt(N)"


def sample_shared_eigen(alpha1: float, beta2: float, rng: RngLike, size: int | None = None) -> np.ndarray:
    """Joint draw of (ζ, ξ1, ξ3, ξ2) from one 2×2 Gaussian Z.

    ``alpha1`` is the shared limit (α1 = α2 = β1), ``beta2`` the remaining one.
    """
    if alpha1 == 0 or beta2 == 0 or alpha1 == beta2:
        raise ValueError("Need nonzero alpha1 != beta2")
    z = ginibre(2, 2, rng, size=1 if size is None else size)
    z11, z12, z21, z22 = z[:, 0, 0], z[:, 0, 1], z[:, 1, 0], z[:, 1, 1]
    first = np.abs(z11) ** 2 + np.abs(z21) ** 2
    second = np.abs(z12) ** 2 + np.abs(z22) ** 2
    det2 = np.abs(z11 * z22 - z12 * z21) ** 2

    zeta = alpha1 * beta2 / (beta2 - alpha1) * second
    xi1 = abs(alpha1) * np.sqrt(first)
    xi3 = -alpha1 * beta2 * det2 / ((beta2 - alpha1) * first)
    out = np.stack([zeta, xi1, xi3, -xi1], axis=-1).real
    return out[0] if size is None else out


@dataclass(frozen=True)
class SharedEigen(FluctuationLaw):
    """One component of the shared-eigenvalue limit (α1 = α2 = β1 ≠ β2).

    ζ is the β2 deviation (scale N); around α1 the cluster splits into
    ξ1 > ξ3 > ξ2 with ξ1 = −ξ2 at scale √N and ξ3 at scale N.
    """
    alpha1: float
    beta2: float
    component: str

    variant = "SharedEigen"

    def __post_init__(self) -> None:
        a = float(_real_array(self.alpha1, "alpha1"))
        b = float(_real_array(self.beta2, "beta2"))
        if a == 0 or b == 0 or a == b:
            raise ValueError(f"Need nonzero alpha1 != beta2, got {a}, {b}")
        if self.component not in SHARED_COMPONENTS:
            raise ValueError(f"component must be one of {SHARED_COMPONENTS}, got {self.component!r}")
        object.__setattr__(self, "alpha1", a)
        object.__setattr__(self, "beta2", b)

    @property
    def kappa(self) -> int:
        return _SHARED_KAPPA[self.component]

    @property
    def has_closed_form(self) -> bool:
        return True

    @property
    def zeta_scale(self) -> float:
        return self.alpha1 * self.beta2 / (self.beta2 - self.alpha1)

    @property
    def xi3_scale(self) -> float:
        return self.alpha1 * self.beta2 / (self.alpha1 - self.beta2)

    def _signed_dist(self):
        if self.component == "zeta":
            g = self.zeta_scale
            return stats.gamma(a=2, scale=abs(g)), math.copysign(1.0, g)
        if self.component == "xi3":
            h = self.xi3_scale
            return stats.expon(scale=abs(h)), math.copysign(1.0, h)
        chi = stats.chi(df=4, scale=abs(self.alpha1) / math.sqrt(2.0))
        return chi, (1.0 if self.component == "xi1" else -1.0)

    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        column = SHARED_COMPONENTS.index(self.component)
        return sample_shared_eigen(self.alpha1, self.beta2, rng, size=size)[:, column]

    def density(self, x):
        dist, sign = self._signed_dist()
        return dist.pdf(sign * np.asarray(x, dtype=float))

    def cdf(self, x):
        dist, sign = self._signed_dist()
        x = np.asarray(x, dtype=float)
        return dist.cdf(x) if sign > 0 else dist.sf(-x)

    def _parameters(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "beta2": self.beta2,
            "component": self.component,
            "components": [
                {"name": name, "kappa": k, "scaling": _scaling_name(k)}
                for name, k in _SHARED_KAPPA.items()
            ],
        }


def sample_equal_pairs(alpha1: float, alpha2: float, rng: RngLike, size: int | None = None) -> np.ndarray:
    """Joint draw of (|α2 z22|, −|α2 z22|, |α1 z11|, −|α1 z11|)."""
    if alpha1 == 0 or alpha2 == 0 or alpha1 == alpha2:
        raise ValueError("Need nonzero alpha1 != alpha2")
    z = ginibre(1, 2, rng, size=1 if size is None else size)
    upper = abs(alpha2) * np.abs(z[:, 0, 1])
    lower = abs(alpha1) * np.abs(z[:, 0, 0])
    out = np.stack([upper, -upper, lower, -lower], axis=-1)
    return out[0] if size is None else out


@dataclass(frozen=True)
class EqualPairs(FluctuationLaw):
    """±|α z| for a limit shared by exactly one α_i and one β_j."""
    alpha: float
    component: str

    variant = "EqualPairs"

    def __post_init__(self) -> None:
        a = float(_real_array(self.alpha, "alpha"))
        if a == 0:
            raise ValueError("alpha must be nonzero")
        if self.component not in ("top", "bottom"):
            raise ValueError(f"component must be 'top' or 'bottom', got {self.component!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def kappa(self) -> int:
        return 1

    @property
    def has_closed_form(self) -> bool:
        return True

    @property
    def _sign(self) -> float:
        return 1.0 if self.component == "top" else -1.0

    def _dist(self):
        return stats.rayleigh(scale=abs(self.alpha) / math.sqrt(2.0))

    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        z = ginibre(1, 1, rng, size=size)[:, 0, 0]
        return self._sign * abs(self.alpha) * np.abs(z)

    def density(self, x):
        return self._dist().pdf(self._sign * np.asarray(x, dtype=float))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return self._dist().cdf(x) if self._sign > 0 else self._dist().sf(-x)

    def _parameters(self) -> dict:
        return {
            "alpha": self.alpha,
            "component": self.component,
            "components": [
                {"name": "top", "kappa": 1, "scaling": "sqrt(N)"},
                {"name": "bottom", "kappa": 1, "scaling": "sqrt(N)"},
            ],
        }


@dataclass(frozen=True)
class Rescaled(FluctuationLaw):
    """Law of X / factor for X ~ base."""
    base: FluctuationLaw
    factor: complex

    variant = "Rescaled"

    @property
    def kappa(self) -> int:
        return self.base.kappa

    @property
    def is_real(self) -> bool:
        return self.base.is_real and complex(self.factor).imag == 0

    @property
    def has_closed_form(self) -> bool:
        return self.base.has_closed_form and complex(self.factor).imag == 0

    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        values = np.asarray(self.base.sample(rng, size)) / complex(self.factor)
        return values.real if self.is_real else values

    def density(self, x):
        f = complex(self.factor).real
        return abs(f) * np.asarray(self.base.density(f * np.asarray(x, dtype=float)))

    def cdf(self, x):
        f = complex(self.factor).real
        values = np.asarray(self.base.cdf(f * np.asarray(x, dtype=float)))
        return values if f > 0 else 1.0 - values

    def rescaled(self, factor: complex) -> FluctuationLaw:
        return self.base.rescaled(complex(self.factor) * complex(factor))

    def _parameters(self) -> dict:
        return {"factor": complex(self.factor), "base": self.base.describe()}


@dataclass(frozen=True)
class ChannelView(FluctuationLaw):
    """Real or imaginary part of a complex-valued law (oracle only)."""
    base: FluctuationLaw
    part: str

    variant = "ChannelView"

    @property
    def kappa(self) -> int:
        return self.base.kappa

    def sample(self, rng: RngLike, size: int) -> np.ndarray:
        values = np.asarray(self.base.sample(rng, size))
        return values.real if self.part == "re" else values.imag

    def _parameters(self) -> dict:
        return {"part": self.part, "base": self.base.describe()}


# ============================================================================
# COEFFICIENTS AND CONSTRUCTORS
# ============================================================================

def gaussian_law(alpha_i: complex) -> GaussianScaled:
    """Law of √N(μ − α_i) in the rotation model: (α_i / √2)·x."""
    alpha_i = complex(alpha_i)
    if alpha_i == 0:
        raise ValueError("alpha_i = 0 gives a degenerate Gaussian law")
    return GaussianScaled(alpha_i / math.sqrt(2.0))


def mixture_coefficients(
    p: NCPolynomial,
    alphas,
    betas,
    *,
    side: str,
    index: int,
) -> tuple[complex, ...]:
    """Exponential-mixture coefficients of P(A, UBU*) at a simple limit.

    For the A-side limit P1(α_i) returns p_{i,j}, j over betas:
    P2 + P3 + (P1 + P2)(Q1 + Q2) / (P1 − Q1). For the B-side limit Q1(β_j)
    returns q_{i,j}, i over alphas: Q2 + Q3 − (P1 + P2)(Q1 + Q2) / (P1 − Q1).
    Monomials of length >= 4 do not contribute.

    Raises:
        MultiplicityRegimeError: If P1(α_i) = Q1(β_j) for a pair involved.
    """
    if side not in ("a", "b"):
        raise ValueError(f"side must be 'a' or 'b', got {side!r}")
    alphas = [complex(a) for a in alphas]
    betas = [complex(b) for b in betas]
    parts = decompose(p)
    if side == "a":
        if not 0 <= index < len(alphas):
            raise IndexError(f"A-side index {index} out of range")
        pairs = [(alphas[index], b) for b in betas]
    else:
        if not 0 <= index < len(betas):
            raise IndexError(f"B-side index {index} out of range")
        pairs = [(a, betas[index]) for a in alphas]

    out = []
    for a, b in pairs:
        p1 = eval_univariate(parts.p1, a)
        q1 = eval_univariate(parts.q1, b)
        if abs(p1 - q1) <= CLUSTER_TOL * max(1.0, abs(p1), abs(q1)):
            raise MultiplicityRegimeError(
                f"P1({a}) = Q1({b}) = {p1}: coincident limits, multiplicity regime"
            )
        p2 = eval_component(parts, "p2", a, b)
        q2 = eval_component(parts, "q2", a, b)
        cross = (p1 + p2) * (q1 + q2) / (p1 - q1)
        if side == "a":
            out.append(p2 + eval_component(parts, "p3", a, b) + cross)
        else:
            out.append(q2 + eval_component(parts, "q3", a, b) - cross)
    return tuple(out)


def gamma_matrix(alpha_prime: complex, betas) -> np.ndarray:
    """Diagonal of Γ: γ_j = α′β_j / (α′ − β_j).

    Called with roles swapped (``gamma_matrix(beta_prime, alphas)``) it gives
    the diagonal of H for a multiple B-side limit.

    Raises:
        MultiplicityRegimeError: If α′ equals some β_j (shared eigenvalue regime).
    """
    a = complex(alpha_prime)
    b = np.asarray(betas, dtype=complex)
    if np.any(np.abs(a - b) <= CLUSTER_TOL * max(1.0, abs(a))):
        raise MultiplicityRegimeError(
            f"{a} is also a limit on the other side: shared eigenvalue regime (see SharedEigen)"
        )
    g = a * b / (a - b)
    return g.real if np.all(g.imag == 0) else g


def charpoly_minors(alphas, betas, u_hat, lam: complex) -> complex:
    """det(λ − X̃) of the reduced SumConjugation matrix by minor expansion.

    Σ_n (−1)^n Σ_{|I|=|J|=n} Π_{i∉I}(λ−α_i) Π_{j∉J}(λ−β_j) Π_I α_i Π_J β_j |det Û_{I,J}|².
    """
    a = np.asarray(alphas, dtype=complex)
    b = np.asarray(betas, dtype=complex)
    u = np.asarray(u_hat, dtype=complex)
    if u.shape != (a.size, b.size):
        raise ValueError(f"u_hat must be {a.size}x{b.size}, got {u.shape}")
    lam = complex(lam)
    rows_all, cols_all = set(range(a.size)), set(range(b.size))

    total = 0j
    for n in range(min(a.size, b.size) + 1):
        inner = 0j
        for rows in combinations(range(a.size), n):
            rest_a = sorted(rows_all - set(rows))
            left = np.prod(lam - a[rest_a]) * np.prod(a[list(rows)])
            for cols in combinations(range(b.size), n):
                rest_b = sorted(cols_all - set(cols))
                minor = np.linalg.det(u[np.ix_(rows, cols)]) if n else 1.0
                inner += left * np.prod(lam - b[rest_b]) * np.prod(b[list(cols)]) * abs(minor) ** 2
        total += (-1) ** n * inner
    return complex(total)


def rescaled_charpoly_coefficients(z, gamma) -> np.ndarray:
    """Coefficients of ψ(τ) = det(τ − Z Γ Z*) from minor sums, highest degree first.

    The coefficient of τ^(m−n) is (−1)^n Σ_{|I|=|J|=n} Π_J γ_j |det Z_{I,J}|².
    """
    z = np.asarray(z, dtype=complex)
    g = np.asarray(gamma, dtype=complex)
    m, s = z.shape
    if g.shape != (s,):
        raise ValueError(f"gamma must have {s} entries, got {g.shape}")
    coeffs = np.zeros(m + 1, dtype=complex)
    coeffs[0] = 1.0
    for n in range(1, min(m, s) + 1):
        acc = 0j
        for rows in combinations(range(m), n):
            for cols in combinations(range(s), n):
                acc += np.prod(g[list(cols)]) * abs(np.linalg.det(z[np.ix_(rows, cols)])) ** 2
        coeffs[n] = (-1) ** n * acc
    return coeffs


def _mixture_law(coeffs) -> FluctuationLaw:
    nonzero = tuple(complex(c) for c in coeffs if complex(c) != 0)
    if not nonzero:
        raise UnsupportedRegimeError(
            "All mixture coefficients vanish; the fluctuations live at a higher order"
        )
    try:
        return ExpMixture(nonzero)
    except DegenerateMixtureError:
        if any(c.imag != 0 for c in nonzero):
            raise UnsupportedRegimeError(f"Repeated complex mixture coefficients {nonzero}")
        # Σ c_j |z_j|² is the 1×1 case of Z Γ Z*
        logger.info(f"Repeated mixture coefficients {nonzero}; using the oracle sampler")
        return MatrixSpectral(tuple(c.real for c in nonzero), m=1, rank=1)


def _require_real(*values: complex) -> None:
    if any(complex(v).imag != 0 for v in values):
        raise UnsupportedRegimeError("Multiplicity laws are implemented for real alphas and betas only")


def _sum_conjugation_law(spec: ModelSpec, limits: LimitSpectrum, index: int) -> FluctuationLaw:
    members = limits.cluster_of(index)
    rank = limits.rank_of(index)
    value = limits.values[index]
    on_a = [k for k in members if k < spec.r]
    on_b = [k for k in members if k >= spec.r]

    if spec.r == 2 and spec.s == 2 and sorted(limits.multiplicities) == [1, 3]:
        shared = next(c for c in limits.clusters if len(c) == 3)
        single = next(c for c in limits.clusters if len(c) == 1)
        shared_value, other_value = limits.values[shared[0]], limits.values[single[0]]
        _require_real(shared_value, other_value)
        component = "zeta" if len(members) == 1 else ("xi1", "xi3", "xi2")[rank - 1]
        return SharedEigen(shared_value.real, other_value.real, component)

    if len(members) == 1:
        others = spec.betas if on_a else spec.alphas
        return _mixture_law(np.atleast_1d(gamma_matrix(value, others)))

    if len(on_a) == 1 and len(on_b) == 1:
        _require_real(value)
        return EqualPairs(value.real, "top" if rank == 1 else "bottom")

    if not on_b:
        _require_real(value, *spec.betas)
        return MatrixSpectral(tuple(gamma_matrix(value, spec.betas)), m=len(members), rank=rank)
    if not on_a:
        _require_real(value, *spec.alphas)
        return MatrixSpectral(tuple(gamma_matrix(value, spec.alphas)), m=len(members), rank=rank)

    raise UnsupportedRegimeError(
        f"Limit {value} is shared by {len(on_a)} alphas and {len(on_b)} betas; no law implemented"
    )


def law_for_target(spec: ModelSpec, index: int) -> FluctuationLaw:
    """Fluctuation law (with its exponent κ) of limit ``index``.

    Raises:
        UnsupportedRegimeError: Regimes without an implemented law.
    """
    limits = limiting_eigenvalues(spec)
    if not 0 <= index < limits.dim:
        raise IndexError(f"Limit index {index} out of range for {limits.dim} limits")
    members = limits.cluster_of(index)

    if spec.kind is ModelKind.ROTATION:
        if len(members) > 1:
            raise UnsupportedRegimeError("Rotation model with repeated limits is not covered")
        return gaussian_law(spec.alphas[index % spec.r])

    if spec.kind is ModelKind.CONJUGATION:
        if len(members) > 1:
            raise UnsupportedRegimeError("Multiple limits of P(A, UBU*) are not covered")
        if index < spec.r:
            coeffs = mixture_coefficients(spec.poly, spec.alphas, spec.betas, side="a", index=index)
        else:
            coeffs = mixture_coefficients(spec.poly, spec.alphas, spec.betas, side="b", index=index - spec.r)
        return _mixture_law(coeffs)

    if spec.kind is ModelKind.SUM_CONJUGATION:
        return _sum_conjugation_law(spec, limits, index)

    raise UnsupportedRegimeError(
        "No closed-form law for GeneralTwoVar; estimate the exponent and use Monte Carlo"
    )


def tabulate_law(law: FluctuationLaw, xs, rng: RngLike | None = None) -> pd.DataFrame:
    """Density/CDF table with columns x, f(x), F(x).

    Laws without a closed form are tabulated from ``ORACLE_DRAWS`` samples
    (histogram density interpolated at xs, empirical CDF).
    """
    xs = np.asarray(xs, dtype=float)
    if law.has_closed_form:
        f, big_f = law.density(xs), law.cdf(xs)
    else:
        if not law.is_real:
            raise ValueError("Tabulate a real channel of a complex-valued law")
        draws = np.sort(np.asarray(law.sample(rng if rng is not None else RngStream(0), ORACLE_DRAWS)))
        heights, edges = np.histogram(draws, bins="auto", density=True)
        centers = 0.5 * (edges[:-1] + edges[1:])
        f = np.interp(xs, centers, heights, left=0.0, right=0.0)
        big_f = np.searchsorted(draws, xs, side="right") / draws.size
    return pd.DataFrame({"x": xs, "f(x)": np.asarray(f, dtype=float), "F(x)": np.asarray(big_f, dtype=float)})
