"""Truncated approximate matrix exponential (TAME) for displacement operators.

``tame_build(xi, d1, d0)`` exponentiates the displacement generator on a
working dimension ``d1`` and keeps the top-left ``d0 x d0`` block, discarding
the region polluted by truncation of the generator.  :func:`find_dimension`
scans ``d1`` upward until two consecutive working dimensions agree on that
block, and :func:`error_matrix` checks a candidate matrix against the
neighbour relations of the exact displacement elements.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, NoSolutionError
from .expm import expm_array
from .fock import Provenance, TruncatedOperator, as_matrix, make_annihilation

log = logging.getLogger(__name__)

# stands in for log10(0) in error-matrix statistics
LOG_ZERO = -400.0


@dataclass(frozen=True)
class TameConfig:
    d0: int
    epsilon1: float = 1e-13
    h: float = 10

    def __post_init__(self):
        if self.d0 < 1:
            raise ValueError("d0 must be at least 1")
        if not self.epsilon1 > 0:
            raise ValueError("epsilon1 must be positive")
        if not self.h > 1:
            raise ValueError("search depth factor h must exceed 1")


@dataclass(frozen=True)
class ErrorMatrixStats:
    """Column-wise statistics of ``log10|E|`` over the row index."""

    mean: np.ndarray
    std: np.ndarray
    max: np.ndarray

    def to_rows(self) -> list[dict]:
        return [
            {"column": j, "mean": float(a), "std": float(s), "max": float(m)}
            for j, (a, s, m) in enumerate(zip(self.mean, self.std, self.max))
        ]


def displacement_generator(xi: complex, dim: int) -> TruncatedOperator:
    """Anti-Hermitian generator ``xi a^dag - conj(xi) a`` on ``dim`` Fock states."""
    if dim < 2:
        raise DimensionError("generator needs dim >= 2")
    a = as_matrix(make_annihilation(dim))
    xi = complex(xi)
    return TruncatedOperator(xi * a.T - np.conj(xi) * a, Provenance.ALGEBRAIC)


def _tame_array(xi: complex, d1: int, d0: int) -> np.ndarray:
    if d1 < 2:
        # the generator truncated to a single Fock state is zero
        return np.eye(d0, dtype=complex)
    return expm_array(displacement_generator(xi, d1).entries)[:d0, :d0]


def tame_build(xi: complex, d1: int, d0: int) -> TruncatedOperator:
    """Top-left ``d0`` block of ``expm`` of the generator truncated at ``d1``."""
    if d0 < 1:
        raise DimensionError("d0 must be at least 1")
    if d1 < d0:
        raise DimensionError(f"working dimension d1={d1} is below target d0={d0}")
    return TruncatedOperator(_tame_array(xi, d1, d0), Provenance.TAME)


def plain_expm_displacement(xi: complex, dim: int) -> TruncatedOperator:
    """``expm`` of the generator truncated at the target dimension itself."""
    return TruncatedOperator(_tame_array(xi, dim, dim), Provenance.PLAIN_EXPM)


def find_dimension(xi: complex, config: TameConfig) -> int:
    """Least working dimension whose TAME block agrees with the next one.

    Starting at ``q = d0 + 1`` the search compares ``tame_build(xi, q, d0)``
    with ``tame_build(xi, q + 1, d0)`` in the max-norm and returns ``q`` at
    the first difference below ``epsilon1``.  The larger matrix of each pair
    is reused as the smaller one of the next.

    Raises
    ------
    NoSolutionError
        If no match is found for ``q < h * d0``.
    """
    d0 = config.d0
    q = d0 + 1
    Mq = _tame_array(xi, q, d0)
    while q < config.h * d0:
        p = q + 1
        Mp = _tame_array(xi, p, d0)
        diff = np.abs(Mq - Mp).max()
        if diff < config.epsilon1:
            log.debug("find_dimension xi=%s d0=%d -> %d (diff %.3e)", xi, d0, q, diff)
            return q
        q, Mq = p, Mp
    raise NoSolutionError(
        f"No solution found: no working dimension below {config.h} * {d0} matches "
        f"to {config.epsilon1:g} for xi={complex(xi)}"
    )


def error_matrix(g, xi: complex) -> tuple[np.ndarray, ErrorMatrixStats]:
    """Residuals of ``g`` against the displacement neighbour relations.

    Every residual is computed directly from neighbouring entries of ``g``,
    so rounding errors are not propagated from one cell to the next.
    """
    G = as_matrix(g)
    dim = G.shape[0]
    if dim < 2:
        raise DimensionError("error matrix needs dim >= 2")
    xi = complex(xi)
    E = np.empty_like(G)
    E[0, 0] = G[0, 0] - math.exp(-0.5 * abs(xi) ** 2)
    i = np.arange(1, dim)
    down = xi / np.sqrt(i)
    right = -np.conj(xi) / np.sqrt(i)
    # scalar products, as in the sequential first-column recurrence; the
    # vectorized kernel may round differently in the last bit
    E[1:, 0] = [G[k, 0] - down[k - 1] * G[k - 1, 0] for k in range(1, dim)]
    pred = right[None, :] * G[:, :-1]
    pred[1:, :] += np.sqrt(i[:, None] / i[None, :]) * G[:-1, :-1]
    E[:, 1:] = G[:, 1:] - pred

    absE = np.abs(E)
    with np.errstate(divide="ignore"):
        L = np.where(absE > 0, np.log10(absE), LOG_ZERO)
    stats = ErrorMatrixStats(mean=L.mean(axis=0), std=L.std(axis=0), max=L.max(axis=0))
    return E, stats


class D1Cache:
    """Persisted lookup table ``(|xi|, d0, epsilon1) -> d1``.

    File format: a JSON object ``{"version": 1, "entries": [...]}`` where each
    entry is ``{"abs_xi": float, "d0": int, "epsilon1": float, "d1": int}`` and
    ``abs_xi`` is rounded to 6 decimals.  Entries are written sorted by key.
    """

    VERSION = 1

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._table: dict[tuple[float, int, float], int] = {}
        if self.path is not None and self.path.exists():
            self.load()

    @staticmethod
    def key(xi: complex, d0: int, epsilon1: float) -> tuple[float, int, float]:
        return (round(abs(complex(xi)), 6), int(d0), float(epsilon1))

    def load(self) -> None:
        data = json.loads(self.path.read_text())
        if data.get("version") != self.VERSION:
            raise ValueError(f"unsupported d1 cache version in {self.path}")
        for e in data["entries"]:
            self._table[(float(e["abs_xi"]), int(e["d0"]), float(e["epsilon1"]))] = int(e["d1"])

    def save(self) -> None:
        if self.path is None:
            return
        entries = [
            {"abs_xi": k[0], "d0": k[1], "epsilon1": k[2], "d1": v}
            for k, v in sorted(self._table.items())
        ]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps({"version": self.VERSION, "entries": entries}, indent=1) + "\n")
        tmp.replace(self.path)

    def get(self, xi, d0, epsilon1):
        return self._table.get(self.key(xi, d0, epsilon1))

    def __len__(self):
        return len(self._table)

    def lookup(self, xi: complex, config: TameConfig) -> int:
        """Cached ``d1``, running :func:`find_dimension` on a miss."""
        k = self.key(xi, config.d0, config.epsilon1)
        if k not in self._table:
            self._table[k] = find_dimension(xi, config)
            self.save()
        return self._table[k]
