"""Direct constructions of the truncated displacement matrix.

Two builders live here:

* :func:`displacement_closed_form` evaluates the Cahill-Glauber formula for
  ``<m|D(xi)|n>`` with ``m >= n`` and mirrors the upper triangle.  The
  magnitude prefactor is assembled in log-space, and cells whose value would
  leave the normal double range are zeroed and reported in a
  :class:`GuardReport`.  The guard is a conservative runtime stand-in for an
  analytic validity map; it does not try to be tight.
* :func:`displacement_recurrent` runs the neighbour recurrence as a generator.
  It amplifies rounding error for large ``|xi|`` and high columns and is kept
  only as a comparison subject; the circuit never uses it.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .fock import Provenance, TruncatedOperator, _check_dim

LOG_TINY = math.log(sys.float_info.min)
LOG_HUGE = math.log(sys.float_info.max)


@dataclass(frozen=True)
class GuardReport:
    """Cells ``(m, n)`` zeroed by the closed-form guards.

    ``invalid_cells`` are the sites where a naive evaluation would compute
    ``0 * inf``; they are listed under both underflow and overflow as well.
    """

    underflow_cells: list = field(default_factory=list)
    overflow_cells: list = field(default_factory=list)
    invalid_cells: list = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.underflow_cells or self.overflow_cells or self.invalid_cells)

    def flagged(self) -> set:
        return set(self.underflow_cells) | set(self.overflow_cells) | set(self.invalid_cells)

    def mask(self, dim: int) -> np.ndarray:
        """Boolean ``dim x dim`` array, True on flagged cells."""
        m = np.zeros((dim, dim), dtype=bool)
        for i, j in self.flagged():
            m[i, j] = True
        return m

    def to_dict(self) -> dict:
        return {
            "underflow_cells": [list(c) for c in self.underflow_cells],
            "overflow_cells": [list(c) for c in self.overflow_cells],
            "invalid_cells": [list(c) for c in self.invalid_cells],
        }


def laguerre_assoc(n: int, alpha, x):
    """Associated Laguerre polynomial ``L_n^(alpha)(x)``.

    Uses the ascending three-term recurrence in ``n``.  ``alpha`` and ``x``
    broadcast against each other.
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    prev = np.ones(np.broadcast(alpha, x).shape)
    if n == 0:
        return prev[()] if prev.ndim else float(prev)
    cur = 1.0 + alpha - x + np.zeros_like(prev)
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur[()] if cur.ndim else float(cur)


def _laguerre_table(dim: int, x: float) -> np.ndarray:
    """``table[n, a] = L_n^(a)(x)`` for ``n + a < dim``; other cells unused."""
    alpha = np.arange(dim, dtype=float)
    table = np.zeros((dim, dim))
    with np.errstate(over="ignore", invalid="ignore"):
        table[0] = 1.0
        if dim > 1:
            table[1] = 1.0 + alpha - x
        for k in range(1, dim - 1):
            table[k + 1] = ((2 * k + 1 + alpha - x) * table[k] - (k + alpha) * table[k - 1]) / (k + 1)
    return table


def displacement_closed_form(xi: complex, dim: int) -> tuple[TruncatedOperator, GuardReport]:
    """Truncated displacement matrix from the closed-form Laguerre expression.

    Parameters
    ----------
    xi : complex
        Displacement amplitude.
    dim : int
        Fock cutoff of the returned matrix.

    Returns
    -------
    (TruncatedOperator, GuardReport)
        The matrix, with guarded cells set to zero, and the list of those cells.
    """
    _check_dim(dim)
    xi = complex(xi)
    r2 = abs(xi) ** 2
    phase = np.angle(xi)
    log_r = math.log(abs(xi)) if xi != 0 else -math.inf

    lag = _laguerre_table(dim, r2)
    G = np.zeros((dim, dim), dtype=complex)
    under, over, invalid = [], [], []

    for n in range(dim):
        m = np.arange(n, dim)
        a = m - n
        with np.errstate(divide="ignore", invalid="ignore"):
            # log of sqrt(n!/m!) |xi|^(m-n) exp(-|xi|^2/2); 0 * -inf only at a == 0
            log_pref = (
                0.5 * (math.lgamma(n + 1) - np.array([math.lgamma(k + 1) for k in m]))
                + np.where(a == 0, 0.0, a * log_r)
                - 0.5 * r2
            )
        L = lag[n, a]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log_L = np.log(np.abs(L))
            total = log_pref + log_L
            vals = np.sign(L) * np.exp(total) * np.exp(1j * a * phase)

        exact_zero = np.isneginf(log_pref) & np.isfinite(L)
        lag_bad = ~np.isfinite(L)
        total_over = np.isfinite(total) & (total > LOG_HUGE)
        total_under = np.isfinite(total) & (total < LOG_TINY) & (L != 0)
        pref_under = log_pref < LOG_TINY

        is_invalid = lag_bad & pref_under
        is_over = lag_bad | total_over
        is_under = (total_under | is_invalid) & ~exact_zero
        bad = is_over | is_under

        vals = np.where(bad | exact_zero | (L == 0), 0.0, vals)
        G[m, n] = vals
        for k in np.flatnonzero(is_under):
            under.append((int(m[k]), n))
        for k in np.flatnonzero(is_over):
            over.append((int(m[k]), n))
        for k in np.flatnonzero(is_invalid):
            invalid.append((int(m[k]), n))

    # upper triangle: <m|D|n> = (-1)^(m-n) conj(<n|D|m>) for m < n
    i, j = np.triu_indices(dim, k=1)
    G[i, j] = (-1.0) ** (j - i) * np.conj(G[j, i])
    mirror = lambda cells: cells + [(c[1], c[0]) for c in cells if c[0] != c[1]]
    report = GuardReport(mirror(under), mirror(over), mirror(invalid))
    return TruncatedOperator(G, Provenance.CLOSED_FORM), report


def displacement_recurrent(xi: complex, dim: int) -> TruncatedOperator:
    """Displacement matrix generated column by column from the neighbour recurrence.

    Numerically unstable for large ``|xi|``: rounding errors grow
    exponentially with the column index.
    """
    _check_dim(dim)
    xi = complex(xi)
    G = np.zeros((dim, dim), dtype=complex)
    G[0, 0] = math.exp(-0.5 * abs(xi) ** 2)
    # coefficient vectors shared with tame.error_matrix, so the residual of
    # this builder is exactly zero
    k = np.arange(1, dim)
    down = xi / np.sqrt(k)
    right = -np.conj(xi) / np.sqrt(k)
    for i in range(1, dim):
        G[i, 0] = down[i - 1] * G[i - 1, 0]
    rows = np.arange(dim)
    for j in range(1, dim):
        col = right[j - 1] * G[:, j - 1]
        col[1:] += np.sqrt(rows[1:] / j) * G[:-1, j - 1]
        G[:, j] = col
    return TruncatedOperator(G, Provenance.RECURRENT)
