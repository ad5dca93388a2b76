"""Dense matrix exponential by scaling and squaring with diagonal Padé approximants.

This is the fixed-order variant: the Padé degree is chosen from
``{3, 5, 7, 9, 13}`` by comparing the 1-norm against the backward-error
thresholds, and for larger norms the argument is scaled by ``2**-s`` before a
degree-13 approximant is squared ``s`` times.  No balancing and no norm
estimation are performed, which keeps the result a deterministic function of
the input.
"""

from __future__ import annotations

import math

import numpy as np

from .fock import Provenance, TruncatedOperator, as_matrix, one_norm

PADE_ORDERS = (3, 5, 7, 9, 13)

# Backward-error bounds for each degree in double precision.
THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}


def expm_cost_estimate(norm: float) -> int:
    """Number of squarings used for an argument with the given 1-norm."""
    if norm < 0:
        raise ValueError("norm must be nonnegative")
    if norm <= THETA[13]:
        return 0
    return max(0, math.ceil(math.log2(norm / THETA[13])))


def select_order(norm: float) -> tuple[int, int]:
    """Return ``(pade_degree, squarings)`` for a given 1-norm."""
    for m in PADE_ORDERS[:-1]:
        if norm <= THETA[m]:
            return m, 0
    return 13, expm_cost_estimate(norm)


def _pade_low(A, ident, m):
    b = PADE_COEFFS[m]
    A2 = A @ A
    powers = [ident, A2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ A2)
    U = A @ sum(b[2 * k + 1] * P for k, P in enumerate(powers))
    V = sum(b[2 * k] * P for k, P in enumerate(powers))
    return U, V


def _pade13(A, ident):
    b = PADE_COEFFS[13]
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    return U, V


def expm_array(a: np.ndarray) -> np.ndarray:
    """Matrix exponential of a square complex array."""
    A = np.array(a, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("expm argument has non-finite entries")
    n = A.shape[0]
    ident = np.eye(n, dtype=complex)
    if n == 0:
        return ident
    m, s = select_order(one_norm(A))
    if m == 13:
        A = A / 2.0 ** s
        U, V = _pade13(A, ident)
    else:
        U, V = _pade_low(A, ident, m)
    F = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        F = F @ F
    return F


def expm(a) -> TruncatedOperator:
    """Matrix exponential of an operator, tagged as a plain (untruncated) expm."""
    return TruncatedOperator(expm_array(as_matrix(a)), Provenance.PLAIN_EXPM)
