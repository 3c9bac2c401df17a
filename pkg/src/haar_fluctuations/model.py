"""
Random-matrix models built from diagonal finite-rank A, B and a Haar U.

Four kinds are supported:

- ``GeneralTwoVar``: P(AU*, UB)
- ``Conjugation``: P(A, UBU*)
- ``SumConjugation``: A + UBU*
- ``Rotation``: UA + AU*

In the basis (e_1, ..., e_r, u_1, ..., u_s, ...) every model is block upper
triangular with a zero trailing block, so its nonzero spectrum is the spectrum
of a small reduced matrix built from the corner Û of U. The reduced matrix is
the primary spectral path; ``build_full`` is kept for cross-validation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import linear_sum_assignment

from haar_fluctuations.ncpoly import NCPolynomial, eval_matrix
from haar_fluctuations.randmat import ComplexMatrix, RngLike, haar_columns, truncate

logger = logging.getLogger(__name__)

TRIVIAL_ZERO_TOL = 1e-4
MAX_FULL_N = 200


class ModelKind(str, Enum):
    GENERAL = "GeneralTwoVar"
    CONJUGATION = "Conjugation"
    SUM_CONJUGATION = "SumConjugation"
    ROTATION = "Rotation"


_NEEDS_POLY = (ModelKind.GENERAL, ModelKind.CONJUGATION)


@dataclass(frozen=True)
class ModelSpec:
    """One random-matrix experiment: kind, diagonal data and dimension N."""
    kind: ModelKind
    alphas: tuple[complex, ...]
    betas: tuple[complex, ...] = ()
    n: int = 400
    poly: NCPolynomial | None = None

    def __post_init__(self) -> None:
        kind = ModelKind(self.kind)
        alphas = tuple(complex(a) for a in self.alphas)
        betas = tuple(complex(b) for b in self.betas)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)

        if not alphas:
            raise ValueError("alphas must not be empty")
        if not all(np.isfinite(v) for v in alphas + betas):
            raise ValueError("alphas and betas must be finite")

        if kind in _NEEDS_POLY and self.poly is None:
            raise ValueError(f"{kind.value} requires a polynomial")
        if kind not in _NEEDS_POLY and self.poly is not None:
            raise ValueError(f"{kind.value} does not take a polynomial")
        if kind is ModelKind.ROTATION and betas:
            raise ValueError("Rotation does not take betas")
        if kind is not ModelKind.ROTATION and not betas:
            raise ValueError(f"{kind.value} requires betas")
        if kind in (ModelKind.CONJUGATION, ModelKind.SUM_CONJUGATION):
            if any(v == 0 for v in alphas + betas):
                raise ValueError("Conjugation models require nonzero alphas and betas")

        min_n = 2 * max(self.r, self.s) + 2
        if int(self.n) < min_n:
            raise ValueError(f"N must be at least {min_n} for r={self.r}, s={self.s}, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def r(self) -> int:
        return len(self.alphas)

    @property
    def s(self) -> int:
        return len(self.betas)

    @property
    def padded_size(self) -> int:
        """Common size k = max(r, s) used by GeneralTwoVar."""
        return max(self.r, self.s)

    @property
    def u_hat_shape(self) -> tuple[int, int]:
        if self.kind is ModelKind.ROTATION:
            return (self.r, self.r)
        if self.kind is ModelKind.GENERAL:
            return (self.padded_size, self.padded_size)
        return (self.r, self.s)

    @property
    def reduced_dim(self) -> int:
        if self.kind is ModelKind.ROTATION:
            return 2 * self.r
        if self.kind is ModelKind.GENERAL:
            return 2 * self.padded_size
        return self.r + self.s

    def with_n(self, n: int) -> "ModelSpec":
        return replace(self, n=n)

    def scaled(self, factor: complex) -> "ModelSpec":
        """Same model with every alpha and beta multiplied by ``factor``."""
        return replace(
            self,
            alphas=tuple(factor * a for a in self.alphas),
            betas=tuple(factor * b for b in self.betas),
        )

    def padded_alphas(self) -> np.ndarray:
        out = np.zeros(self.padded_size, dtype=complex)
        out[: self.r] = self.alphas
        return out

    def padded_betas(self) -> np.ndarray:
        out = np.zeros(self.padded_size, dtype=complex)
        out[: self.s] = self.betas
        return out


@dataclass(frozen=True)
class ReducedMatrix:
    """M̃ + Ṽ: the Û-free main part and the Û-dependent perturbation."""
    m_part: np.ndarray
    v_part: np.ndarray

    @property
    def dim(self) -> int:
        return self.m_part.shape[0]

    @property
    def total(self) -> np.ndarray:
        return self.m_part + self.v_part


def _full_diag(values: tuple[complex, ...], n: int) -> np.ndarray:
    d = np.zeros(n, dtype=complex)
    d[: len(values)] = values
    return np.diag(d)


def build_full(spec: ModelSpec, u: ComplexMatrix) -> ComplexMatrix:
    """Literal N×N model matrix (cross-validation only).

    Raises:
        ValueError: If u is not N×N.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (spec.n, spec.n):
        raise ValueError(f"Expected a {spec.n}x{spec.n} unitary, got shape {u.shape}")
    a = _full_diag(spec.alphas, spec.n)
    u_star = u.conj().T

    if spec.kind is ModelKind.ROTATION:
        return u @ a + a @ u_star
    b = _full_diag(spec.betas, spec.n)
    if spec.kind is ModelKind.SUM_CONJUGATION:
        return a + u @ b @ u_star
    if spec.kind is ModelKind.CONJUGATION:
        return eval_matrix(spec.poly, a, u @ b @ u_star)
    return eval_matrix(spec.poly, a @ u_star, u @ b)


def _check_u_hat(spec: ModelSpec, u_hat: ComplexMatrix) -> np.ndarray:
    u_hat = np.asarray(u_hat, dtype=complex)
    if u_hat.shape != spec.u_hat_shape:
        raise ValueError(
            f"{spec.kind.value} expects Û of shape {spec.u_hat_shape}, got {u_hat.shape}"
        )
    return u_hat


def _reduced_total(spec: ModelSpec, u_hat: np.ndarray) -> np.ndarray:
    a_hat = np.diag(np.asarray(spec.alphas, dtype=complex))

    if spec.kind is ModelKind.ROTATION:
        return np.block([[a_hat @ u_hat.conj().T, a_hat], [a_hat, a_hat @ u_hat]])

    if spec.kind is ModelKind.GENERAL:
        k = spec.padded_size
        a_pad, b_pad = np.diag(spec.padded_alphas()), np.diag(spec.padded_betas())
        zero = np.zeros((k, k), dtype=complex)
        # third block rows of A' and B' vanish, so the 2k corner is exact
        a_prime = np.block([[a_pad @ u_hat.conj().T, a_pad], [zero, zero]])
        b_prime = np.block([[zero, zero], [b_pad, b_pad @ u_hat]])
        return eval_matrix(spec.poly, a_prime, b_prime)

    b_hat = np.diag(np.asarray(spec.betas, dtype=complex))
    r, s = spec.r, spec.s
    if spec.kind is ModelKind.SUM_CONJUGATION:
        return np.block([[a_hat, a_hat @ u_hat], [b_hat @ u_hat.conj().T, b_hat]])

    a_tilde = np.block([[a_hat, a_hat @ u_hat], [np.zeros((s, r)), np.zeros((s, s))]])
    b_tilde = np.block([[np.zeros((r, r)), np.zeros((r, s))], [b_hat @ u_hat.conj().T, b_hat]])
    return eval_matrix(spec.poly, a_tilde, b_tilde)


def build_reduced(spec: ModelSpec, u_hat: ComplexMatrix) -> ReducedMatrix:
    """Reduced representation matrix, exact at finite N.

    Args:
        spec (ModelSpec): Model.
        u_hat (ComplexMatrix): Corner of U with shape ``spec.u_hat_shape``.

    Returns:
        ReducedMatrix: ``m_part`` is the value at Û = 0, ``v_part`` the rest.
    """
    u_hat = _check_u_hat(spec, u_hat)
    m_part = _reduced_total(spec, np.zeros_like(u_hat))
    v_part = _reduced_total(spec, u_hat) - m_part
    return ReducedMatrix(m_part=m_part, v_part=v_part)


def nontrivial_eigenvalues(spec: ModelSpec, u: ComplexMatrix) -> np.ndarray:
    """Eigenvalues of the reduced matrix (unordered).

    ``u`` may be the full N×N unitary or any block holding its leading corner
    (e.g. the output of ``haar_columns``).
    """
    rows, cols = spec.u_hat_shape
    u_hat = truncate(np.asarray(u), rows, cols)
    return np.linalg.eigvals(build_reduced(spec, u_hat).total)


def sample_nontrivial_eigenvalues(spec: ModelSpec, rng: RngLike) -> np.ndarray:
    """Draws the Haar columns the model needs and returns its nontrivial eigenvalues."""
    _, cols = spec.u_hat_shape
    return nontrivial_eigenvalues(spec, haar_columns(spec.n, cols, rng))


def spectrum_consistency_check(
    spec: ModelSpec,
    u: ComplexMatrix,
    tol: float = TRIVIAL_ZERO_TOL,
) -> bool:
    """Checks full spectrum == reduced spectrum ∪ {0}^(N - dim) by optimal matching.

    Raises:
        ValueError: If N exceeds the size allowed for a full eigensolve.
    """
    if spec.n > MAX_FULL_N:
        raise ValueError(f"Full eigensolve limited to N <= {MAX_FULL_N}, got {spec.n}")
    full = np.linalg.eigvals(build_full(spec, u))
    reduced = nontrivial_eigenvalues(spec, u)
    expected = np.concatenate([reduced, np.zeros(spec.n - reduced.size, dtype=complex)])

    cost = np.abs(full[:, None] - expected[None, :])
    rows, cols = linear_sum_assignment(cost)
    distances = cost[rows, cols]
    worst = int(np.argmax(distances))
    if distances[worst] > tol:
        logger.warning(
            f"Spectrum mismatch for {spec.kind.value} (N={spec.n}): "
            f"full eigenvalue {full[rows[worst]]:.6g} vs expected {expected[cols[worst]]:.6g}, "
            f"distance {distances[worst]:.3e} > tol {tol:.1e}"
        )
        return False
    return True
