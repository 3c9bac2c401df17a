"""
Seeded sampling of complex Ginibre matrices and Haar unitaries.

Every random draw takes either an ``RngStream`` (a counter-derived stream,
the unit of reproducibility for experiments) or a ready
``numpy.random.Generator``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

ComplexMatrix = np.ndarray

_SEED_LIMIT = 2**64


@dataclass(frozen=True)
class RngStream:
    """Independent stream identified by (master_seed, stream_index).

    Sub-streams come from ``SeedSequence`` spawn keys, so sample k of an
    experiment is the same no matter which worker produced it.
    """
    master_seed: int
    stream_index: int = 0
    parent: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.master_seed) < _SEED_LIMIT:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if int(self.stream_index) < 0:
            raise ValueError(f"stream_index must be nonnegative, got {self.stream_index}")

    @property
    def spawn_key(self) -> tuple[int, ...]:
        return (*self.parent, int(self.stream_index))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=self.spawn_key)

    def generator(self) -> np.random.Generator:
        """Fresh generator; repeated calls replay the same numbers."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))

    def child(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, index, self.spawn_key)


RngLike = RngStream | np.random.Generator


def as_generator(rng: RngLike | int) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"Expected RngStream or numpy Generator, got {type(rng).__name__}")


def _check_dim(name: str, value: int) -> int:
    if int(value) < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return int(value)


def _complex_normal(gen: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    # real/imag pairs drawn interleaved so a prefix of the stream is a prefix of the matrix
    pairs = gen.standard_normal((*shape, 2))
    return (pairs[..., 0] + 1j * pairs[..., 1]) / np.sqrt(2.0)


def ginibre(m: int, n: int, rng: RngLike, size: int | None = None) -> ComplexMatrix:
    """m×n matrix of iid standard complex Gaussians (Re, Im each N(0, 1/2)).

    With ``size`` set, returns a stack of shape (size, m, n).
    """
    m, n = _check_dim("m", m), _check_dim("n", n)
    shape = (m, n) if size is None else (_check_dim("size", size), m, n)
    return _complex_normal(as_generator(rng), shape)


def _fix_phases(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    d = np.diagonal(r, axis1=-2, axis2=-1)
    modulus = np.abs(d)
    phase = np.where(modulus == 0, 1.0, d / np.where(modulus == 0, 1.0, modulus))
    return q * phase[..., None, :]


def haar_columns(n: int, k: int, rng: RngLike) -> ComplexMatrix:
    """First k columns of a Haar unitary of size n.

    Uses the thin QR of an n×k Gaussian block; for the same stream the result
    matches ``haar_unitary(n, rng)[:, :k]`` up to rounding.
    """
    n, k = _check_dim("n", n), _check_dim("k", k)
    if k > n:
        raise ValueError(f"Cannot take {k} columns of a {n}x{n} unitary")
    z = _complex_normal(as_generator(rng), (k, n)).T
    q, r = np.linalg.qr(z, mode="reduced")
    return _fix_phases(q, r)


def haar_unitary(n: int, rng: RngLike) -> ComplexMatrix:
    """Haar-distributed n×n unitary (QR of a Ginibre matrix, phase-corrected)."""
    return haar_columns(n, n, rng)


def haar_unitaries(n: int, count: int, rng: RngLike) -> np.ndarray:
    """Stack of ``count`` independent Haar unitaries, shape (count, n, n)."""
    n, count = _check_dim("n", n), _check_dim("count", count)
    z = np.swapaxes(_complex_normal(as_generator(rng), (count, n, n)), -1, -2)
    q, r = np.linalg.qr(z)
    return _fix_phases(q, r)


def truncate(u: ComplexMatrix, r: int, s: int) -> ComplexMatrix:
    """Top-left r×s corner of u, copied.

    Raises:
        ValueError: If r or s is out of range.
    """
    u = np.asarray(u)
    if u.ndim != 2:
        raise ValueError(f"Expected a matrix, got shape {u.shape}")
    rows, cols = u.shape
    if not (1 <= r <= rows and 1 <= s <= cols):
        raise ValueError(f"Cannot truncate a {rows}x{cols} matrix to {r}x{s}")
    return u[:r, :s].copy()


def unitarity_defect(u: ComplexMatrix) -> float:
    """Frobenius norm of U*U - I."""
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1]), "fro"))
