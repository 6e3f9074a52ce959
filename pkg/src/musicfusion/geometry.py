"""Scene geometry: array placement, AoD/AoA angles and ULA steering vectors.

Angle convention
----------------
Angles are measured from the array normal to the direction of the target and
are positive when the target lies counter-clockwise of the normal.  With the
normal ``(0, 1)`` a target at ``(5, 5)`` therefore has angle ``-pi/4``.

Elements are spaced by half a wavelength along the normal rotated by +90
degrees, first element at the array origin (phase reference).  With that
layout a far-field wave from angle ``phi`` has phase ``pi * m * sin(phi)`` at
element ``m``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class OutOfFieldError(ValueError):
    """Target lies on or behind the plane of an array."""


class Position2D(NamedTuple):
    x: float
    y: float


class AnglePair(NamedTuple):
    """Joint angle hypothesis for one radar pair (radians)."""

    aod: float
    aoa: float


@dataclass(frozen=True)
class ArraySpec:
    origin: tuple[float, float]
    normal: tuple[float, float]
    elements: int

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        normal = tuple(float(v) for v in self.normal)
        if len(origin) != 2 or len(normal) != 2:
            raise ValueError("origin and normal must have two components")
        if not all(np.isfinite(origin)):
            raise ValueError("origin must be finite")
        if abs(np.hypot(*normal) - 1.0) > 1e-12:
            raise ValueError(f"normal must be a unit vector, got {normal}")
        if int(self.elements) != self.elements or self.elements < 1:
            raise ValueError(f"elements must be a positive integer, got {self.elements}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "elements", int(self.elements))


@dataclass(frozen=True)
class RadarPairConfig:
    """One STx/SRx pair.  ``noise_variance`` is the total variance per
    complex channel-estimate entry."""

    tx: ArraySpec
    rx: ArraySpec
    subcarriers: int
    subcarrier_spacing: float
    carrier_freq: float
    noise_variance: float
    pair_id: int = 0

    def __post_init__(self):
        if int(self.subcarriers) != self.subcarriers or self.subcarriers < 1:
            raise ValueError("subcarriers must be a positive integer")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be > 0")
        if not self.subcarrier_spacing > 0:
            raise ValueError("subcarrier_spacing must be > 0")
        if not self.carrier_freq > 0:
            raise ValueError("carrier_freq must be > 0")

    @property
    def M(self) -> int:
        return self.tx.elements

    @property
    def N(self) -> int:
        return self.rx.elements

    @property
    def dim(self) -> int:
        return self.tx.elements * self.rx.elements

    @property
    def monostatic(self) -> bool:
        return self.tx.origin == self.rx.origin


def array_angles(array: ArraySpec, points) -> np.ndarray:
    """Signed angle from the array normal to each point, shape ``points.shape[:-1]``.

    No field-of-view check; ``|angle| >= pi/2`` means the point is behind the
    array.
    """
    pts = np.asarray(points, dtype=float)
    d = pts - np.asarray(array.origin)
    nx, ny = array.normal
    cross = nx * d[..., 1] - ny * d[..., 0]
    dot = nx * d[..., 0] + ny * d[..., 1]
    return np.arctan2(cross, dot)


def in_field(angles) -> np.ndarray:
    return np.abs(angles) < np.pi / 2


def angles_for_target(pair: RadarPairConfig, target) -> AnglePair:
    target = np.asarray(target, dtype=float)
    for arr, name in ((pair.tx, "tx"), (pair.rx, "rx")):
        if np.allclose(target, arr.origin, rtol=0.0, atol=1e-12):
            raise ValueError(f"target coincides with {name} origin")
    aod = float(array_angles(pair.tx, target))
    aoa = float(array_angles(pair.rx, target))
    if not (abs(aod) < np.pi / 2 and abs(aoa) < np.pi / 2):
        raise OutOfFieldError(
            f"target {tuple(target)} outside field of pair {pair.pair_id} "
            f"(aod={aod:.4f}, aoa={aoa:.4f})"
        )
    return AnglePair(aod, aoa)


def steering_vector(angle, n_elements: int) -> np.ndarray:
    """ULA response ``exp(j*pi*m*sin(angle))``, m = 0..n_elements-1.

    ``angle`` may be an array; the element axis is appended last.
    """
    m = np.arange(n_elements)
    s = np.sin(np.asarray(angle, dtype=float))
    return np.exp(1j * np.pi * s[..., None] * m)


def joint_steering_vector(angles: AnglePair, pair: RadarPairConfig) -> np.ndarray:
    return np.kron(steering_vector(angles[0], pair.M), steering_vector(angles[1], pair.N))


def joint_steering_batch(aod, aoa, M: int, N: int) -> np.ndarray:
    """Row-wise Kronecker products for arrays of angles, shape ``(..., M*N)``."""
    vt = steering_vector(aod, M)
    vr = steering_vector(aoa, N)
    out = vt[..., :, None] * vr[..., None, :]
    return out.reshape(out.shape[:-2] + (M * N,))


def steering_matrix(angle_set: Sequence[AnglePair], pair: RadarPairConfig) -> np.ndarray:
    if len(angle_set) < 1:
        raise ValueError("steering_matrix needs at least one angle pair")
    ang = np.asarray(angle_set, dtype=float).reshape(-1, 2)
    return joint_steering_batch(ang[:, 0], ang[:, 1], pair.M, pair.N).T
