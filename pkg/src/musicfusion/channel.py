"""Multi-target OFDM channel synthesis and noisy channel estimates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .geometry import SPEED_OF_LIGHT, RadarPairConfig, angles_for_target

AmplitudeModel = Literal["unit", "inverse_product", "random_complex"]
AMPLITUDE_MODELS = ("unit", "inverse_product", "random_complex")


@dataclass(frozen=True)
class ChannelObservation:
    """Noisy channel estimates of one pair; row ``q`` is the estimate at subcarrier q."""

    pair_id: int
    h_tilde: np.ndarray  # (Q, M*N)


def bistatic_delay(pair: RadarPairConfig, target) -> float:
    t = np.asarray(target, dtype=float)
    d_tx = np.hypot(*(t - pair.tx.origin))
    d_rx = np.hypot(*(t - pair.rx.origin))
    return float((d_tx + d_rx) / SPEED_OF_LIGHT)


def target_amplitudes(pair: RadarPairConfig, targets, model: AmplitudeModel, rng) -> np.ndarray:
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    K = len(targets)
    if model == "unit":
        return np.ones(K, dtype=complex)
    if model == "inverse_product":
        d_tx = np.hypot(*(targets - pair.tx.origin).T)
        d_rx = np.hypot(*(targets - pair.rx.origin).T)
        amp = 1.0 / (d_tx * d_rx)
        return (amp / amp.max()).astype(complex)
    if model == "random_complex":
        return (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.sqrt(2)
    raise ValueError(f"unknown amplitude model {model!r}")


def generate_coefficients(pair: RadarPairConfig, targets, amplitude_model: AmplitudeModel,
                          rng) -> np.ndarray:
    """Per-subcarrier target coefficients, shape ``(Q, K)``.

    Each column has a linear phase ramp from the bistatic delay plus a random
    initial phase drawn once per call.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    for t in targets:
        angles_for_target(pair, t)
    tau = np.array([bistatic_delay(pair, t) for t in targets])
    psi = rng.uniform(0.0, 2 * np.pi, size=len(targets))
    amp = target_amplitudes(pair, targets, amplitude_model, rng)
    q = np.arange(pair.subcarriers)[:, None]
    # phase reduced mod 2*pi per subcarrier to keep it exact for large q*df*tau
    cycles = np.mod(q * pair.subcarrier_spacing * tau[None, :], 1.0)
    return amp[None, :] * np.exp(-2j * np.pi * cycles) * np.exp(1j * psi)[None, :]


def synthesize_channel(pair: RadarPairConfig, steering: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Noiseless channel, row q = (A @ alpha_q)^T, shape ``(Q, M*N)``."""
    steering = np.asarray(steering)
    coeffs = np.asarray(coeffs)
    if steering.shape[0] != pair.dim:
        raise ValueError(f"steering has {steering.shape[0]} rows, pair needs {pair.dim}")
    if coeffs.shape != (pair.subcarriers, steering.shape[1]):
        raise ValueError(
            f"coefficients shape {coeffs.shape} does not match "
            f"({pair.subcarriers}, {steering.shape[1]})"
        )
    return coeffs @ steering.T


def add_estimation_noise(clean: np.ndarray, sigma2: float, rng, pair_id: int = 0) -> ChannelObservation:
    """Circular complex Gaussian noise with total variance ``sigma2`` per entry."""
    if not sigma2 > 0:
        raise ValueError("noise variance must be > 0")
    clean = np.asarray(clean, dtype=complex)
    scale = np.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal(clean.shape) + 1j * rng.standard_normal(clean.shape))
    return ChannelObservation(pair_id, clean + noise)
