"""Conditional state preparation: TMSV source, loss, displacement, Fock-diagonal POVM.

The measured mode of a two-mode squeezed vacuum is attenuated, displaced and
detected; the other mode is kept.  Because every detector here is diagonal in
the Fock basis, the conditional state never needs the two-mode density
matrix.  With displacement ``D``, loss Kraus operators ``M(k)`` and POVM
weights ``w``,

    rho[i, j] ∝ mu_i mu_j  sum_k sum_m  w_m (D M(k))[m, i] conj((D M(k))[m, j])

and ``M(k)`` only shifts columns of ``D`` by ``k``, so the double sum collapses
onto the single kernel ``H = D^T diag(w) conj(D)``.  The kernel depends on
``xi`` and the detector only; loss and squeezing enter as cheap elementwise
factors (see :func:`conditional_kernel` and :func:`prepare_from_kernel`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, NoSolutionError
from .fock import DensityOperator, Provenance, TruncatedOperator, as_matrix
from .tame import tame_build

UNNORMALIZABLE_BELOW = 1e-300


@dataclass(frozen=True)
class TmsvSource:
    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("squeezing parameter must be nonnegative")

    def coeffs(self, dim: int) -> np.ndarray:
        return tmsv_coeffs(self.gamma, dim)


@dataclass(frozen=True)
class LossChannel:
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmission must lie in [0, 1], got {self.eta}")

    def kraus(self, k: int, dim: int) -> TruncatedOperator:
        return loss_kraus(self.eta, k, dim)


def tmsv_coeffs(gamma: float, dim: int) -> np.ndarray:
    """Schmidt coefficients ``sech(gamma) tanh(gamma)**i`` for ``i < dim``."""
    if gamma < 0:
        raise ValueError("squeezing parameter must be nonnegative")
    return np.tanh(gamma) ** np.arange(dim) / np.cosh(gamma)


@lru_cache(maxsize=64)
def _loss_table(eta: float, dim: int) -> np.ndarray:
    """``table[k, n] = <n - k| M(k) |n>`` (zero for ``n < k``)."""
    n = np.arange(dim)
    k = n[:, None]
    kept = n[None, :] - k
    valid = kept >= 0
    lg = np.array([math.lgamma(i + 1) for i in range(dim)])
    log_binom = np.where(valid, lg[n][None, :] - lg[np.clip(kept, 0, None)] - lg[k], 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lost = np.where(k == 0, 0.0, 0.5 * k * (math.log1p(-eta) if eta < 1 else -np.inf))
        log_kept = np.where(kept <= 0, 0.0, 0.5 * kept * (math.log(eta) if eta > 0 else -np.inf))
    table = np.where(valid, np.exp(0.5 * log_binom + log_lost + log_kept), 0.0)
    table.setflags(write=False)
    return table


def loss_kraus(eta: float, k: int, dim: int) -> TruncatedOperator:
    """Kraus operator for losing exactly ``k`` photons at transmission ``eta``.

    ``M(k) = (1-eta)**(k/2) / sqrt(k!) * eta**(N/2) a**k``; its only nonzero
    entries are ``<n-k|M(k)|n> = sqrt(C(n, k)) (1-eta)**(k/2) eta**((n-k)/2)``.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {eta}")
    if k < 0:
        raise ValueError("photon-loss count must be nonnegative")
    M = np.zeros((dim, dim), dtype=complex)
    if k < dim:
        n = np.arange(k, dim)
        M[n - k, n] = _loss_table(float(eta), dim)[k, k:]
    return TruncatedOperator(M, Provenance.ALGEBRAIC)


def cascade_click_probability(M: int, n: int, k: int) -> float:
    """Probability that exactly ``n`` of ``M`` detectors click for ``k`` photons.

    Photons are spread uniformly over the detectors, so this counts the
    surjections of ``k`` photons onto a chosen ``n``-subset.  Evaluated in
    exact integer arithmetic and rounded once.
    """
    if M < 1:
        raise ValueError("cascade needs at least one detector")
    if not 0 <= n <= M:
        raise ValueError(f"click count {n} outside [0, {M}]")
    if k < 0:
        raise ValueError("photon number must be nonnegative")
    surj = sum(math.comb(n, l) * (-1) ** l * (n - l) ** k for l in range(n + 1))
    return math.comb(M, n) * surj / M ** k


# Detector descriptors -------------------------------------------------------


@dataclass(frozen=True)
class FockProjector:
    f: int

    @property
    def label(self) -> str:
        return f"fock:{self.f}"


@dataclass(frozen=True)
class ApdClick:
    @property
    def label(self) -> str:
        return "apd"


@dataclass(frozen=True)
class Cascade:
    M: int
    n: int

    def __post_init__(self):
        if not 0 <= self.n <= self.M:
            raise ValueError(f"cascade clicks {self.n} outside [0, {self.M}]")

    @property
    def label(self) -> str:
        return f"cascade:{self.M}:{self.n}"


Descriptor = FockProjector | ApdClick | Cascade

_DESCRIPTOR_RE = re.compile(r"^(fock:(\d+)|apd|cascade:(\d+):(\d+))$")


def parse_descriptor(text: str) -> Descriptor:
    """Parse ``fock:F``, ``apd`` or ``cascade:M:N``."""
    m = _DESCRIPTOR_RE.match(text.strip().lower())
    if m is None:
        raise ValueError(f"unrecognised detector {text!r}; use fock:F, apd or cascade:M:N")
    if m.group(2) is not None:
        return FockProjector(int(m.group(2)))
    if m.group(3) is not None:
        return Cascade(int(m.group(3)), int(m.group(4)))
    return ApdClick()


# outcomes studied for the cubic-state and qubit applications
STANDARD_DETECTORS = tuple(
    parse_descriptor(s)
    for s in (
        "apd", "fock:1", "fock:2", "fock:3", "fock:4", "fock:5", "fock:6",
        "cascade:10:1", "cascade:5:1", "cascade:2:1",
        "cascade:10:3", "cascade:5:3", "cascade:4:3",
    )
)


@dataclass(frozen=True)
class PovmElement:
    """Fock-diagonal POVM element: weight of ``|k><k|`` for each ``k < dim``."""

    weights: np.ndarray
    descriptor: Descriptor

    @property
    def dim(self) -> int:
        return self.weights.size

    def matrix(self) -> np.ndarray:
        return np.diag(self.weights).astype(complex)


@lru_cache(maxsize=256)
def _cascade_weights(M: int, n: int, dim: int) -> tuple:
    return tuple(cascade_click_probability(M, n, k) for k in range(dim))


def make_povm(descriptor: Descriptor | str, dim: int) -> PovmElement:
    if isinstance(descriptor, str):
        descriptor = parse_descriptor(descriptor)
    if isinstance(descriptor, FockProjector):
        if not 0 <= descriptor.f < dim:
            raise DimensionError(f"Fock projector |{descriptor.f}> outside dimension {dim}")
        w = np.zeros(dim)
        w[descriptor.f] = 1.0
    elif isinstance(descriptor, ApdClick):
        w = np.ones(dim)
        w[0] = 0.0
    elif isinstance(descriptor, Cascade):
        w = np.array(_cascade_weights(descriptor.M, descriptor.n, dim))
    else:
        raise TypeError(f"unsupported detector descriptor {descriptor!r}")
    w.setflags(write=False)
    return PovmElement(w, descriptor)


# Conditional state -----------------------------------------------------------


@dataclass(frozen=True)
class PreparationResult:
    """Normalized conditional state and its success probability.

    ``rho`` is ``None`` when the outcome has (numerically) zero probability.
    """

    rho: DensityOperator | None
    probability: float

    @property
    def unnormalizable(self) -> bool:
        return self.rho is None


def detector_kernel(displacement, weights) -> np.ndarray:
    """``H = D^T diag(w) conj(D)``, the loss-free conditional kernel."""
    D = as_matrix(displacement)
    w = np.asarray(weights, dtype=float)
    return D.T @ (w[:, None] * D.conj())


def conditional_kernel(displacement, eta: float, weights) -> np.ndarray:
    """Kernel ``K`` with ``rho ∝ outer(mu, mu) * K`` for any squeezing.

    Sums the loss Kraus terms ``k = 0 .. d0-1``; ``M(k)`` vanishes on the
    truncated space for larger ``k``.
    """
    H = detector_kernel(displacement, weights)
    return kernel_with_loss(H, eta)


def kernel_with_loss(H: np.ndarray, eta: float) -> np.ndarray:
    d = H.shape[0]
    if eta == 1.0:
        return H.copy()
    K = np.zeros_like(H)
    table = _loss_table(float(eta), d)
    for k in range(d):
        c = table[k, k:]
        K[k:, k:] += np.outer(c, c) * H[: d - k, : d - k]
    return K


def prepare_from_kernel(kernel: np.ndarray, gamma: float) -> PreparationResult:
    mu = tmsv_coeffs(gamma, kernel.shape[0])
    rho = np.outer(mu, mu) * kernel
    P = float(np.trace(rho).real)
    if P < UNNORMALIZABLE_BELOW:
        return PreparationResult(None, max(P, 0.0))
    rho = rho / P
    rho = 0.5 * (rho + rho.conj().T)
    return PreparationResult(DensityOperator(rho), min(P, 1.0))


def prepare_conditional(
    gamma: float,
    xi: complex,
    eta: float,
    povm: PovmElement,
    d0: int,
    d1: int | None = None,
    *,
    displacement=None,
) -> PreparationResult:
    """Conditional single-mode state heralded by ``povm`` and its probability.

    Parameters
    ----------
    gamma, xi, eta : float, complex, float
        Squeezing, displacement amplitude and transmission.
    povm : PovmElement
        Detector outcome on ``d0`` Fock states.
    d0, d1 : int
        Target and TAME working dimension.  Ignored for the displacement if
        ``displacement`` is given (a ``d0 x d0`` matrix, e.g. from a cache).
    """
    LossChannel(eta)
    if povm.dim != d0:
        raise DimensionError(f"POVM dimension {povm.dim} != d0 {d0}")
    if displacement is None:
        if d1 is None:
            raise ValueError("need d1 or a prebuilt displacement matrix")
        displacement = tame_build(xi, d1, d0)
    D = as_matrix(displacement)
    if D.shape != (d0, d0):
        raise DimensionError(f"displacement shape {D.shape} != ({d0}, {d0})")
    return prepare_from_kernel(conditional_kernel(D, eta, povm.weights), gamma)


def displaced_tmsv_cutoff_error(gamma: float, displacement, d0: int) -> float:
    """Cutoff error of the displaced TMSV restricted to ``d0`` states per mode."""
    D = as_matrix(displacement)[:d0, :d0]
    mu = tmsv_coeffs(gamma, d0)
    return float(1.0 - np.sum(np.abs(mu[:, None] * D) ** 2))


def find_d0(
    gamma_star: float,
    xi_star: complex,
    epsilon0: float = 1e-13,
    d1_probe: int | None = None,
    max_dim: int = 150,
) -> int:
    """Least ``d0`` whose displaced-TMSV cutoff error is at most ``epsilon0``.

    The displacement is built once by TAME on ``d1_probe`` states (default
    ``2 * max_dim``) and truncated for every candidate.

    Raises
    ------
    NoSolutionError
        If no ``d0 <= max_dim`` meets the threshold.
    """
    if not epsilon0 > 0:
        raise ValueError("epsilon0 must be positive")
    if d1_probe is None:
        d1_probe = 2 * max_dim
    D = as_matrix(tame_build(xi_star, d1_probe, max_dim))
    mu = tmsv_coeffs(gamma_star, max_dim)
    weights = np.abs(mu[:, None] * D) ** 2
    for d0 in range(1, max_dim + 1):
        if 1.0 - weights[:d0, :d0].sum() <= epsilon0:
            return d0
    raise NoSolutionError(
        f"no d0 <= {max_dim} reaches cutoff error {epsilon0:g} "
        f"for gamma*={gamma_star}, xi*={xi_star}"
    )
