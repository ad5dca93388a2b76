"""Truncated Fock-space linear algebra.

Operators on the first ``dim`` Fock states are dense complex ``dim x dim``
matrices. Two-mode objects use mode 1 as the slow index of the Kronecker
product, i.e. basis state ``|i>|j>`` sits at position ``i * d2 + j``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

HERMITIAN_TOL = 1e-12
PSD_TOL = -1e-10
TRACE_TOL = 1e-12
NORM_TOL = 1e-12


class Provenance(enum.Enum):
    CLOSED_FORM = "closed-form"
    RECURRENT = "recurrent"
    TAME = "tame"
    PLAIN_EXPM = "expm"
    ALGEBRAIC = "algebraic"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TruncatedOperator:
    """Dense operator on a truncated Fock space, tagged with how it was built."""

    entries: np.ndarray
    provenance: Provenance = Provenance.ALGEBRAIC

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"operator must be square, got shape {a.shape}")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.entries).all())

    def truncate(self, dim: int) -> "TruncatedOperator":
        """Top-left ``dim x dim`` block, keeping the provenance."""
        if dim > self.dim or dim < 1:
            raise DimensionError(f"cannot truncate dim {self.dim} to {dim}")
        return TruncatedOperator(self.entries[:dim, :dim], self.provenance)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class PureState:
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim != 1 or c.size == 0:
            raise DimensionError("state coefficients must be a non-empty vector")
        if np.linalg.norm(c) > 1 + NORM_TOL:
            raise ValueError("pure state norm exceeds 1")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.coeffs, self.coeffs.conj()))


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, trace in (0, 1] matrix.

    Hermiticity and trace are checked on construction; positivity is an
    eigendecomposition and only runs when ``check_psd`` is set.
    """

    entries: np.ndarray
    check_psd: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        r = _frozen(self.entries)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise DimensionError(f"density matrix must be square, got {r.shape}")
        if np.abs(r - r.conj().T).max() > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(r).real
        if not 0 < tr <= 1 + TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} outside (0, 1]")
        object.__setattr__(self, "entries", r)
        if self.check_psd and not self.is_psd():
            raise ValueError("density matrix has negative eigenvalues")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.entries, self.entries).real)

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return bool(np.linalg.eigvalsh(self.entries).min() >= tol)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def as_matrix(g) -> np.ndarray:
    """Return the raw complex matrix behind an operator-like argument."""
    if isinstance(g, (TruncatedOperator, DensityOperator)):
        return g.entries
    return np.asarray(g, dtype=complex)


def _check_dim(dim: int) -> None:
    if int(dim) != dim or dim < 1:
        raise DimensionError(f"dimension must be a positive integer, got {dim!r}")


def make_annihilation(dim: int) -> TruncatedOperator:
    _check_dim(dim)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    return TruncatedOperator(a, Provenance.ALGEBRAIC)


def make_creation(dim: int) -> TruncatedOperator:
    _check_dim(dim)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), -1).astype(complex)
    return TruncatedOperator(a, Provenance.ALGEBRAIC)


def kron(a, b) -> TruncatedOperator:
    """Two-mode tensor product with mode 1 (``a``) as the slow index."""
    return TruncatedOperator(np.kron(as_matrix(a), as_matrix(b)), Provenance.ALGEBRAIC)


def partial_trace(rho, keep: int, dims: tuple[int, int]) -> DensityOperator:
    """Reduce a two-mode density matrix to mode ``keep`` (1 or 2).

    ``dims`` gives ``(d1, d2)``; the layout must follow :func:`kron`.
    """
    r = as_matrix(rho)
    d1, d2 = dims
    if r.shape != (d1 * d2, d1 * d2):
        raise DimensionError(f"matrix of shape {r.shape} does not match dims {dims}")
    t = r.reshape(d1, d2, d1, d2)
    if keep == 1:
        out = np.einsum("ijkj->ik", t)
    elif keep == 2:
        out = np.einsum("ijil->jl", t)
    else:
        raise ValueError(f"keep must be 1 or 2, got {keep}")
    return DensityOperator(out)


def cutoff_error(coeffs, F: int) -> float:
    """One minus the squared norm retained by the first ``F`` coefficients."""
    c = np.asarray(coeffs)
    return float(1.0 - np.sum(np.abs(c[:F]) ** 2))


def column_norms(g) -> np.ndarray:
    """2-norm of every column, i.e. the norms of the images of ``|j>``."""
    return np.linalg.norm(as_matrix(g), axis=0)


def one_norm(g) -> float:
    """Maximum absolute column sum."""
    m = as_matrix(g)
    if m.size == 0:
        return 0.0
    return float(np.abs(m).sum(axis=0).max())


def max_norm(g) -> float:
    """Largest absolute entry."""
    return float(np.abs(as_matrix(g)).max())


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    return a @ b - b @ a
