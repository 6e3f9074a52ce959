"""Sample covariance, signal/noise subspaces and coefficient-covariance tools."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelObservation

#: Condition-number limit on A^H A beyond which a steering matrix is singular.
MAX_GRAM_CONDITION = 1e12


class ModelOrderError(ValueError):
    pass


class SingularSteeringError(np.linalg.LinAlgError):
    """Tested steering matrix is (numerically) rank deficient."""


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CovarianceSet:
    """Per-pair sample covariance; the payload a pair sends to the fusion centre."""

    pair_id: int
    R: np.ndarray
    Q: int
    sigma2: float

    def __post_init__(self):
        R = np.asarray(self.R, dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError(f"covariance must be square, got {R.shape}")
        scale = max(float(np.abs(R).max(initial=0.0)), 1.0)
        if np.abs(R - R.conj().T).max(initial=0.0) > 1e-10 * scale:
            raise ValueError("covariance is not Hermitian")
        if self.Q < 1:
            raise ValueError("Q must be >= 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be > 0")
        object.__setattr__(self, "R", _readonly(R))

    @property
    def dim(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True)
class SubspaceDecomposition:
    U: np.ndarray  # (MN, K) signal basis
    G: np.ndarray  # (MN, MN-K) noise basis
    eigenvalues: np.ndarray  # descending
    gamma: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "U", _readonly(self.U))
        object.__setattr__(self, "G", _readonly(self.G))
        object.__setattr__(self, "eigenvalues", _readonly(self.eigenvalues))
        object.__setattr__(self, "gamma", _readonly(self.U @ self.U.conj().T))

    @property
    def K(self) -> int:
        return self.U.shape[1]

    def gamma_from_noise(self) -> np.ndarray:
        """The same projector written as I - G G^H."""
        return np.eye(self.G.shape[0]) - self.G @ self.G.conj().T


def sample_covariance(obs: ChannelObservation, sigma2: float = 1.0) -> CovarianceSet:
    h = np.asarray(obs.h_tilde)
    Q = h.shape[0]
    if Q < 1:
        raise ValueError("observation has no subcarriers")
    # rows are h_q^T, so sum_q h_q h_q^H = H^T conj(H)
    R = h.T @ h.conj() / Q
    R = 0.5 * (R + R.conj().T)
    return CovarianceSet(obs.pair_id, R, Q, sigma2)


def decompose(cov: CovarianceSet, K: int) -> SubspaceDecomposition:
    dim = cov.dim
    if not 1 <= K < dim:
        raise ModelOrderError(f"model order K={K} must satisfy 1 <= K < {dim}")
    w, v = np.linalg.eigh(cov.R)
    order = np.argsort(w, kind="stable")[::-1]
    w, v = w[order], v[:, order]
    return SubspaceDecomposition(U=v[:, :K], G=v[:, K:], eigenvalues=w)


def music_value(gamma: np.ndarray, a: np.ndarray) -> float:
    """MUSIC pseudo-spectrum a^H Gamma a for one steering vector."""
    a = np.asarray(a)
    if gamma.shape != (a.size, a.size):
        raise ValueError(f"projector {gamma.shape} does not match vector length {a.size}")
    return float(np.real(a.conj() @ gamma @ a))


def quadratic_form_rows(B: np.ndarray, steering_rows: np.ndarray) -> np.ndarray:
    """Real ``a^H B a`` for every row ``a`` of ``steering_rows`` (shape (..., MN))."""
    return np.real(np.einsum("...i,ij,...j->...", steering_rows.conj(), B, steering_rows))


def pseudo_inverse(A: np.ndarray) -> np.ndarray:
    """(A^H A)^-1 A^H for a full column rank steering matrix."""
    A = np.asarray(A)
    gram = A.conj().T @ A
    if np.linalg.cond(gram) > MAX_GRAM_CONDITION:
        raise SingularSteeringError("steering matrix is rank deficient")
    return np.linalg.solve(gram, A.conj().T)


def regularized_pseudo_inverse(A: np.ndarray) -> np.ndarray:
    """Tikhonov-regularized (A^H A + eps I)^-1 A^H, eps = 1e-8 trace(A^H A)/K."""
    A = np.asarray(A)
    gram = A.conj().T @ A
    K = gram.shape[0]
    eps = 1e-8 * np.real(np.trace(gram)) / K
    return np.linalg.solve(gram + eps * np.eye(K), A.conj().T)


def coefficient_covariance(A_hat: np.ndarray, cov: CovarianceSet, regularize: bool = False) -> np.ndarray:
    """Estimated coefficient covariance A+ R (A+)^H at the given angles.

    With ``regularize=True`` a singular steering matrix falls back to the
    regularized inverse instead of raising.
    """
    try:
        Ap = pseudo_inverse(A_hat)
    except SingularSteeringError:
        if not regularize:
            raise
        Ap = regularized_pseudo_inverse(A_hat)
    S = Ap @ cov.R @ Ap.conj().T
    return 0.5 * (S + S.conj().T)


def diagonality(S: np.ndarray) -> float:
    """Diagonality criterion in [0, 1]: 1 for diagonal, 0 for all-equal magnitudes."""
    S = np.asarray(S)
    K = S.shape[0]
    if K == 1:
        return 1.0
    total = float(np.sum(np.abs(S) ** 2))
    if total <= 0:
        raise ValueError("diagonality undefined for the zero matrix")
    d = float(np.sum(np.abs(np.diag(S)) ** 2)) / total
    zeta = (d - 1.0 / K) / (1.0 - 1.0 / K)
    return float(min(max(zeta, 0.0), 1.0))
