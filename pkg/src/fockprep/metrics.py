"""Figures of merit for prepared states.

Nonlinear squeezing
-------------------
The cubic-state quality measure is the variance of the nonlinear quadrature
``Y = mu P - 2**-0.5 mu**-2 X**2``, minimized over ``mu`` and divided by the
Gaussian optimum ``LAMBDA_G = 0.75``.  Moments are read from density-matrix
elements through normal-ordered ladder expectations ``<a^dag^p a^q>``, which
are exact for a state supported on the truncated space; no truncated
quadrature matrices are multiplied.

Quadratures are ``X = (a e^{-i t} + a^dag e^{i t}) / sqrt(2)`` and ``P`` the
same with ``t + pi/2``, so ``[X, P] = i`` for every frame angle ``t``.  The
default ``t = pi/2`` puts ``X`` orthogonal to real displacements.  States
heralded with a real displacement have real Fock amplitudes; in this frame
their wave function carries the cubic-like phase that ``Y`` rewards.  With
``t = 0`` the ``P``-``X**2`` correlation of any real-amplitude state
vanishes identically and ``M`` can barely drop below one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .fock import DensityOperator, PureState, as_matrix

LAMBDA_G = 0.75
KAPPA = 1.0 / math.sqrt(2.0)
DEFAULT_FRAME = math.pi / 2


@dataclass(frozen=True)
class QuadratureMoments:
    mean_P: float
    mean_X2: float
    mean_P2: float
    mean_X4: float
    mean_sym_PX2: float

    @property
    def var_P(self) -> float:
        return self.mean_P2 - self.mean_P ** 2

    @property
    def var_X2(self) -> float:
        return self.mean_X4 - self.mean_X2 ** 2

    def variance_coeffs(self) -> tuple[float, float, float]:
        """``(A, B, C)`` with ``V(mu) = A mu^2 + B mu^-4 + C mu^-1``."""
        A = self.var_P
        B = KAPPA ** 2 * self.var_X2
        C = -KAPPA * (self.mean_sym_PX2 - 2.0 * self.mean_P * self.mean_X2)
        return A, B, C


def _falling(n: np.ndarray, k: int) -> np.ndarray:
    out = np.ones(n.shape)
    for j in range(k):
        out = out * np.clip(n - j, 0, None)
    return out


def ladder_moment(rho, p: int, q: int) -> complex:
    """``Tr(rho a^dag^p a^q)`` read from the ``(p - q)``-th diagonal of ``rho``."""
    r = as_matrix(rho)
    off = p - q
    diag = np.diagonal(r, offset=off)
    n = np.arange(diag.size) + max(0, -off)
    m = n + off
    return complex(np.sum(diag * np.sqrt(_falling(n, q) * _falling(m, p))))


def _assemble(lad, frame: float) -> QuadratureMoments:
    rot = lambda p, q: lad(p, q) * np.exp(1j * (p - q) * frame)
    m01, m02, m11 = rot(0, 1), rot(0, 2), rot(1, 1).real
    m03, m12, m04, m13, m22 = rot(0, 3), rot(1, 2), rot(0, 4), rot(1, 3), rot(2, 2).real

    mean_P = math.sqrt(2.0) * m01.imag
    mean_X2 = m02.real + m11 + 0.5
    mean_P2 = -m02.real + m11 + 0.5
    # X^4 = (1/4)(:(a+a^dag)^4: + 6 :(a+a^dag)^2: + 3)
    mean_X4 = 0.25 * (2 * m04.real + 8 * m13.real + 6 * m22 + 12 * m02.real + 12 * m11 + 3)
    # {P, X^2} = -i/sqrt(2) (a^3 + a^dag a^2 + a - h.c.)
    mean_sym = math.sqrt(2.0) * (m03 + m12 + m01).imag
    return QuadratureMoments(mean_P, mean_X2, mean_P2, mean_X4, mean_sym)


def quadrature_moments(rho, frame: float = DEFAULT_FRAME) -> QuadratureMoments:
    r = as_matrix(rho)
    return _assemble(lambda p, q: ladder_moment(r, p, q), frame)


def pure_quadrature_moments(psi, frame: float = DEFAULT_FRAME) -> QuadratureMoments:
    """Same as :func:`quadrature_moments` for ``|psi><psi|``, from ``a^k psi``."""
    psi = np.asarray(psi, dtype=complex)
    shifted = [psi]
    root = np.sqrt(np.arange(1, psi.size))
    for _ in range(4):
        nxt = np.zeros_like(psi)
        nxt[:-1] = root * shifted[-1][1:]
        shifted.append(nxt)
    return _assemble(lambda p, q: complex(np.vdot(shifted[p], shifted[q])), frame)


def minimize_variance(moments: QuadratureMoments) -> tuple[float, float]:
    """Minimum over real ``mu != 0`` of the nonlinear-quadrature variance.

    Stationary points satisfy ``2A t^2 - C t - 4B = 0`` with ``t = mu^3``;
    both roots are tried, negative ones giving negative ``mu``.

    Returns
    -------
    (V_min, mu_opt)
    """
    A, B, C = moments.variance_coeffs()
    if not A > 0:
        raise ValueError("degenerate state: momentum variance is not positive")
    V = lambda mu: A * mu * mu + B / mu ** 4 + C / mu
    disc = math.sqrt(max(C * C + 32.0 * A * B, 0.0))
    best = (math.inf, math.nan)
    for t in ((C + disc) / (4 * A), (C - disc) / (4 * A)):
        if t == 0.0:
            continue
        mu = math.copysign(abs(t) ** (1.0 / 3.0), t)
        # strict comparison: on a tie the larger root (positive mu) wins
        if V(mu) < best[0]:
            best = (V(mu), mu)
    if not math.isfinite(best[0]):
        raise ValueError("no finite stationary point of the nonlinear variance")
    return best


def nonlinear_variance(rho, frame: float = DEFAULT_FRAME) -> tuple[float, float]:
    """Gaussian-normalized nonlinear squeezing ``M`` and the optimal ``mu``."""
    v, mu = minimize_variance(quadrature_moments(rho, frame))
    return v / LAMBDA_G, mu


def fidelity_qubit(rho, theta: float) -> float:
    """Overlap with ``cos(theta)|0> + sin(theta)|1>``."""
    r = as_matrix(rho)
    if r.shape[0] < 2:
        raise ValueError("qubit fidelity needs at least two Fock states")
    c, s = math.cos(theta), math.sin(theta)
    return float(c * c * r[0, 0].real + s * s * r[1, 1].real + 2 * c * s * r[0, 1].real)


def edge_population(rho, width: int = 4) -> float:
    """Population of the top ``width`` Fock states, a cutoff-bias indicator."""
    d = np.real(np.diagonal(as_matrix(rho)))
    return float(d[-width:].sum())


def _state_M(x: np.ndarray, frame: float) -> float:
    psi = x / np.linalg.norm(x)
    try:
        return minimize_variance(pure_quadrature_moments(psi, frame))[0] / LAMBDA_G
    except ValueError:
        return math.inf


def optimal_cubic_state(
    v: int,
    starts: int = 16,
    seed: int = 0,
    frame: float = DEFAULT_FRAME,
) -> tuple[PureState, float]:
    """Best real-amplitude state on the first ``v`` Fock states for ``M``.

    Multi-start BFGS over unnormalized real amplitudes (normalized inside the
    objective); start ``s`` draws from ``default_rng([seed, s])``.
    """
    if v < 1:
        raise ValueError("need at least one Fock state")
    if v == 1:
        vac = np.array([1.0])
        return PureState(vac), nonlinear_variance(np.outer(vac, vac), frame)[0]
    best_x, best_val = None, math.inf
    for s in range(starts):
        x0 = np.random.default_rng([seed, s]).normal(size=v)
        res = minimize(_state_M, x0, args=(frame,), method="BFGS", options={"gtol": 1e-10})
        if res.fun < best_val:
            best_x, best_val = res.x, float(res.fun)
    psi = best_x / np.linalg.norm(best_x)
    return PureState(psi), best_val


def vacuum(dim: int) -> DensityOperator:
    r = np.zeros((dim, dim), dtype=complex)
    r[0, 0] = 1.0
    return DensityOperator(r)
