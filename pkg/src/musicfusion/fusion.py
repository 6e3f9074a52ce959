"""Likelihood maps, their fusion across radar pairs, peak picking and the ML oracle.

Everything here runs at the fusion centre and needs only each pair's
:class:`~musicfusion.subspace.CovarianceSet` plus its static configuration.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.ndimage import maximum_filter

from .geometry import AnglePair, ArraySpec, RadarPairConfig, array_angles, joint_steering_batch, steering_vector
from .subspace import (
    MAX_GRAM_CONDITION,
    CovarianceSet,
    SubspaceDecomposition,
    coefficient_covariance,
    decompose,
    diagonality,
)

log = logging.getLogger(__name__)

MAP_METHODS = ("proposed", "method_A", "method_B", "fft2d")
METHODS = MAP_METHODS + ("soft_fusion",)
COMBINED = "combined"


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchGrid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be > 0")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError("grid bounds are inverted")

    def _axis(self, lo, hi):
        n = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
        return lo + self.step * np.arange(n)

    @property
    def xs(self) -> np.ndarray:
        return self._axis(self.x_min, self.x_max)

    @property
    def ys(self) -> np.ndarray:
        return self._axis(self.y_min, self.y_max)

    @property
    def shape(self) -> tuple[int, int]:
        """(ny, nx); values are stored row-major with y as the slow axis."""
        return len(self.ys), len(self.xs)

    @property
    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.stack([X, Y], axis=-1)

    def cell_of(self, positions) -> np.ndarray:
        """Nearest lattice indices (iy, ix) of each position."""
        p = np.asarray(positions, dtype=float).reshape(-1, 2)
        ix = np.clip(np.rint((p[:, 0] - self.x_min) / self.step), 0, len(self.xs) - 1)
        iy = np.clip(np.rint((p[:, 1] - self.y_min) / self.step), 0, len(self.ys) - 1)
        return np.stack([iy, ix], axis=1).astype(int)


@dataclass(frozen=True)
class LikelihoodMap:
    grid: SearchGrid
    values: np.ndarray  # (ny, nx); -inf marks out-of-field points
    method: str
    pair_id: int | str

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values {self.values.shape} do not match grid {self.grid.shape}")

    def scaled(self, c: float) -> "LikelihoodMap":
        return LikelihoodMap(self.grid, self.values * c, self.method, self.pair_id)


@dataclass(frozen=True)
class AngleEstimate:
    angles: list[AnglePair]
    pair_id: int
    peak_values: list[float]
    used_fallback: bool = False


# -- per-pair building blocks -------------------------------------------------

def angle_lattice(step: float) -> np.ndarray:
    """Angles k*step strictly inside (-pi/2, pi/2)."""
    n = int(math.ceil((np.pi / 2) / step)) - 1
    if (n + 1) * step < np.pi / 2:
        n += 1
    return step * np.arange(-n, n + 1)


def music_angle_spectrum(dec: SubspaceDecomposition, M: int, N: int, lattice: np.ndarray) -> np.ndarray:
    """a^H Gamma a over the (aod, aoa) lattice, shape (len(lattice), len(lattice))."""
    V = steering_vector(lattice, max(M, N))
    U3 = dec.U.conj().reshape(M, N, -1)
    X = np.einsum("im,mnk->ink", V[:, :M], U3)
    Y = np.einsum("ink,jn->ijk", X, V[:, :N])
    return np.sum(np.abs(Y) ** 2, axis=-1)


def _local_max_order(values: np.ndarray) -> np.ndarray:
    """Flat indices of 8-neighbourhood local maxima, by descending value then lattice order."""
    finite = np.isfinite(values)
    filled = np.where(finite, values, -np.inf)
    peaks = (filled >= maximum_filter(filled, size=3, mode="constant", cval=-np.inf)) & finite
    idx = np.flatnonzero(peaks)
    order = np.argsort(-filled.ravel()[idx], kind="stable")
    return idx[order]


def _fill_from_largest(values: np.ndarray, chosen: list[int], K: int) -> list[int]:
    flat = np.where(np.isfinite(values), values, -np.inf).ravel()
    for i in np.argsort(-flat, kind="stable"):
        if len(chosen) >= K:
            break
        if int(i) not in chosen and np.isfinite(flat[i]):
            chosen.append(int(i))
    return chosen


def preestimate_angles(dec: SubspaceDecomposition, pair: RadarPairConfig, K: int,
                       angle_grid_step: float = np.deg2rad(1.0), exclusion_cells: int = 2) -> AngleEstimate:
    """K strongest MUSIC peaks in the joint (aod, aoa) domain."""
    lattice = angle_lattice(angle_grid_step)
    spec = music_angle_spectrum(dec, pair.M, pair.N, lattice)
    n = spec.shape[1]
    chosen: list[int] = []
    for i in _local_max_order(spec):
        r, c = divmod(int(i), n)
        if any(abs(r - r2) <= exclusion_cells and abs(c - c2) <= exclusion_cells
               for r2, c2 in (divmod(j, n) for j in chosen)):
            continue
        chosen.append(int(i))
        if len(chosen) == K:
            break
    fallback = len(chosen) < K
    if fallback:
        log.debug("pair %s: %d MUSIC peaks found, filling to K=%d", pair.pair_id, len(chosen), K)
        chosen = _fill_from_largest(spec, chosen, K)
    angles = [AnglePair(float(lattice[i // n]), float(lattice[i % n])) for i in chosen]
    values = [float(spec.ravel()[i]) for i in chosen]
    return AngleEstimate(angles, pair.pair_id, values, fallback)


def estimated_coefficient_covariance(est: AngleEstimate, cov: CovarianceSet,
                                     pair: RadarPairConfig) -> np.ndarray:
    ang = np.asarray(est.angles, dtype=float)
    A_hat = joint_steering_batch(ang[:, 0], ang[:, 1], pair.M, pair.N).T
    return coefficient_covariance(A_hat, cov, regularize=True)


def fusion_weight(est: AngleEstimate, cov: CovarianceSet, pair: RadarPairConfig) -> float:
    """Estimated total received power: clamped sum of the diagonal of S-hat."""
    S = estimated_coefficient_covariance(est, cov, pair)
    return float(np.sum(np.clip(np.real(np.diag(S)), 0.0, None)))


@lru_cache(maxsize=64)
def _grid_steering(tx: ArraySpec, rx: ArraySpec, grid: SearchGrid):
    pts = grid.points.reshape(-1, 2)
    aod = array_angles(tx, pts)
    aoa = array_angles(rx, pts)
    ok = (np.abs(aod) < np.pi / 2) & (np.abs(aoa) < np.pi / 2)
    for arr in (tx, rx):
        ok &= np.hypot(*(pts - arr.origin).T) > 0
    rows = joint_steering_batch(np.where(ok, aod, 0.0), np.where(ok, aoa, 0.0), tx.elements, rx.elements)
    rows.setflags(write=False)
    ok.setflags(write=False)
    return rows, ok


def grid_steering(pair: RadarPairConfig, grid: SearchGrid):
    """Joint steering rows for every grid point (row-major) and the in-field mask."""
    return _grid_steering(pair.tx, pair.rx, grid)


def _projector_form(dec: SubspaceDecomposition, rows: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(rows @ dec.U.conj()) ** 2, axis=-1)


def _covariance_form(R: np.ndarray, rows: np.ndarray) -> np.ndarray:
    return np.real(np.sum((rows.conj() @ R) * rows, axis=-1))


def pair_likelihood_map(dec: SubspaceDecomposition, est: AngleEstimate | None, cov: CovarianceSet,
                        pair: RadarPairConfig, grid: SearchGrid, method: str = "proposed",
                        weight: float | None = None) -> LikelihoodMap:
    """Per-pair log-likelihood surface for one fusion method.

    ``weight`` overrides the power estimate used by ``proposed`` (it is
    otherwise computed from ``est``).
    """
    if method not in MAP_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {MAP_METHODS}")
    rows, ok = grid_steering(pair, grid)
    scale = cov.Q / (2.0 * cov.sigma2)
    if method == "proposed":
        if weight is None:
            weight = fusion_weight(est, cov, pair)
        vals = scale * _projector_form(dec, rows) * weight
    elif method == "method_A":
        vals = scale * _projector_form(dec, rows)
    elif method == "method_B":
        vals = scale * _projector_form(dec, rows) * _covariance_form(cov.R, rows)
    else:
        vals = scale * _covariance_form(cov.R, rows)
    vals = np.where(ok, vals, -np.inf).reshape(grid.shape)
    return LikelihoodMap(grid, vals, method, pair.pair_id)


def combine_maps(maps: Sequence[LikelihoodMap]) -> LikelihoodMap:
    if not maps:
        raise ValueError("nothing to combine")
    grid = maps[0].grid
    for m in maps[1:]:
        if m.grid != grid:
            raise ValueError("cannot combine maps on different grids")
    total = np.zeros(grid.shape)
    for m in maps:
        total = total + m.values  # -inf propagates
    return LikelihoodMap(grid, total, maps[0].method, COMBINED)


# -- peak selection -----------------------------------------------------------

def _select_indices(lmap: LikelihoodMap, K: int, exclusion_radius: float) -> list[int]:
    pts = lmap.grid.points.reshape(-1, 2)
    chosen: list[int] = []
    r2 = exclusion_radius ** 2
    for i in _local_max_order(lmap.values):
        p = pts[i]
        if any(np.sum((p - pts[j]) ** 2) < r2 for j in chosen):
            continue
        chosen.append(int(i))
        if len(chosen) == K:
            return chosen
    return _fill_from_largest(lmap.values, chosen, K)


def select_peaks(lmap: LikelihoodMap, K: int, exclusion_radius: float = 1.0,
                 return_values: bool = False):
    """Positions (K, 2) of the K largest separated local maxima.

    Ties are broken by row-major lattice order.
    """
    idx = _select_indices(lmap, K, exclusion_radius)
    if len(idx) < K:
        raise ValueError(f"grid has fewer than K={K} in-field points")
    pos = lmap.grid.points.reshape(-1, 2)[idx]
    if return_values:
        return pos, lmap.values.ravel()[idx]
    return pos


def best_assignment(reference, candidates) -> tuple[int, ...]:
    """Permutation ``perm`` minimizing sum |reference[k] - candidates[perm[k]]|^2."""
    ref = np.asarray(reference, dtype=float).reshape(-1, 2)
    cand = np.asarray(candidates, dtype=float).reshape(-1, 2)
    if len(ref) != len(cand):
        raise ValueError("assignment needs equal cardinalities")
    d2 = np.sum((ref[:, None, :] - cand[None, :, :]) ** 2, axis=-1)
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(len(ref))):
        cost = d2[np.arange(len(ref)), perm].sum()
        if cost < best_cost:
            best, best_cost = perm, cost
    return best


def soft_fusion(per_pair_maps: Sequence[LikelihoodMap], K: int, exclusion_radius: float = 1.0,
                truth=None) -> np.ndarray:
    """Value-weighted average of each pair's local position decisions.

    Detections are associated across pairs through the true positions when
    ``truth`` is given (idealized, simulation only), otherwise through the
    first pair's decisions.
    """
    if not per_pair_maps:
        raise ValueError("soft fusion needs at least one map")
    local = [select_peaks(m, K, exclusion_radius, return_values=True) for m in per_pair_maps]
    reference = np.asarray(truth, dtype=float).reshape(-1, 2) if truth is not None else local[0][0]
    num = np.zeros((K, 2))
    den = np.zeros(K)
    plain = np.zeros((K, 2))
    for pos, val in local:
        perm = list(best_assignment(reference, pos))
        w = np.clip(val[perm], 0.0, None)
        num += w[:, None] * pos[perm]
        den += w
        plain += pos[perm]
    out = plain / len(local)
    nz = den > 0
    out[nz] = num[nz] / den[nz, None]
    return out


# -- exact ML oracle ----------------------------------------------------------

def _batched_trace_term(G: np.ndarray, C: np.ndarray, combos: np.ndarray) -> np.ndarray:
    ix = combos[:, :, None], combos[:, None, :]
    Gs = G[ix]
    Cs = C[ix]
    K = combos.shape[1]
    if K > 1:
        bad = np.linalg.cond(Gs) > MAX_GRAM_CONDITION
        if bad.any():
            eps = 1e-8 * np.real(np.trace(Gs[bad], axis1=1, axis2=2)) / K
            Gs = Gs.copy()
            Gs[bad] += eps[:, None, None] * np.eye(K)
    return np.real(np.trace(np.linalg.solve(Gs, Cs), axis1=1, axis2=2))


def exact_ml_oracle(cov_sets: Sequence[CovarianceSet], pair_configs: Sequence[RadarPairConfig],
                    grid: SearchGrid, K: int, budget: int = 2_000_000,
                    chunk: int = 50_000) -> np.ndarray:
    """Exhaustive maximizer of sum_p Q_p/(2 sigma_p^2) Tr{A_p A_p^+ R_p}.

    Searches all K-subsets of distinct in-field grid points; validation only.
    """
    ok = np.ones(grid.shape[0] * grid.shape[1], dtype=bool)
    for pair in pair_configs:
        ok &= grid_steering(pair, grid)[1]
    cand = np.flatnonzero(ok)
    n_combos = math.comb(len(cand), K)
    if n_combos > budget:
        raise BudgetExceededError(
            f"{n_combos} hypotheses for K={K} over {len(cand)} grid points exceed budget {budget}"
        )
    terms = []
    for cov, pair in zip(cov_sets, pair_configs):
        rows = grid_steering(pair, grid)[0][cand]
        scale = cov.Q / (2.0 * cov.sigma2)
        if K == 1:
            diag_g = np.sum(np.abs(rows) ** 2, axis=1)
            terms.append((scale, None, _covariance_form(cov.R, rows) / diag_g))
        else:
            G = rows.conj() @ rows.T
            C = rows.conj() @ cov.R @ rows.T
            terms.append((scale, G, C))
    if K == 1:
        total = sum(s * v for s, _, v in terms)
        best = (int(np.argmax(total)),)
    else:
        best, best_val = None, -np.inf
        it = itertools.combinations(range(len(cand)), K)
        while True:
            block = np.fromiter(itertools.chain.from_iterable(itertools.islice(it, chunk)), dtype=np.intp)
            if block.size == 0:
                break
            combos = block.reshape(-1, K)
            total = sum(s * _batched_trace_term(G, C, combos) for s, G, C in terms)
            j = int(np.argmax(total))
            if total[j] > best_val:
                best_val, best = total[j], tuple(combos[j])
    return grid.points.reshape(-1, 2)[cand[list(best)]]


# -- fusion centre pipeline ---------------------------------------------------

@dataclass
class FusionResult:
    positions: dict[str, np.ndarray]
    pair_maps: dict[str, list[LikelihoodMap]] = field(default_factory=dict)
    combined_maps: dict[str, LikelihoodMap] = field(default_factory=dict)
    estimates: list[AngleEstimate] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    diagonality: list[float] = field(default_factory=list)


def fuse(covs: Sequence[CovarianceSet], pairs: Sequence[RadarPairConfig], grid: SearchGrid, K: int,
         methods: Sequence[str] = METHODS, angle_step: float = np.deg2rad(1.0),
         exclusion_radius: float = 1.0, angle_exclusion_cells: int = 2, truth=None) -> FusionResult:
    """Run every requested method from the pairs' covariance matrices alone."""
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    need_maps = set(methods) & set(MAP_METHODS)
    if "soft_fusion" in methods:
        need_maps.add("method_A")
    result = FusionResult(positions={})
    decs = []
    for cov, pair in zip(covs, pairs):
        dec = decompose(cov, K)
        est = preestimate_angles(dec, pair, K, angle_step, angle_exclusion_cells)
        S = estimated_coefficient_covariance(est, cov, pair)
        decs.append(dec)
        result.estimates.append(est)
        result.weights.append(float(np.sum(np.clip(np.real(np.diag(S)), 0.0, None))))
        result.diagonality.append(diagonality(S) if np.any(S) else 0.0)
    for m in MAP_METHODS:
        if m not in need_maps:
            continue
        maps = [pair_likelihood_map(dec, est, cov, pair, grid, m, weight=w)
                for dec, est, cov, pair, w in zip(decs, result.estimates, covs, pairs, result.weights)]
        result.pair_maps[m] = maps
        result.combined_maps[m] = combine_maps(maps)
    for m in methods:
        if m == "soft_fusion":
            result.positions[m] = soft_fusion(result.pair_maps["method_A"], K, exclusion_radius, truth)
        else:
            result.positions[m] = select_peaks(result.combined_maps[m], K, exclusion_radius)
    return result
