"""Monte Carlo harness: draw scenes, run every fusion method on shared data, score RMSE."""
from __future__ import annotations

import hashlib
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelObservation, add_estimation_noise, generate_coefficients, synthesize_channel
from .config import ScenarioConfig, scenario_digest
from .fusion import FusionResult, fuse
from .geometry import angles_for_target, array_angles, steering_matrix
from .subspace import CovarianceSet, sample_covariance

Z95 = 1.959963984540054


@dataclass
class TrialResult:
    trial: int
    method: str
    truth: np.ndarray  # (K, 2)
    estimates: np.ndarray  # (K, 2)
    sq_errors: np.ndarray  # (K,), matched to truth order
    diagonality: list[float]
    channel_digest: str


@dataclass
class ExperimentReport:
    scenario_digest: str
    seed: int
    n_trials: int
    rmse: dict[str, float]
    ci95: dict[str, float | None]
    mean_diagonality: dict[int, float]
    diagonality_ci95: dict[int, float | None]
    trial_results: list[TrialResult] = field(default_factory=list, repr=False)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent stream per trial; identical for any execution order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


def draw_targets(config: ScenarioConfig, rng, max_tries: int = 100_000) -> np.ndarray:
    """K uniform positions in the target region, pairwise >= min_separation apart."""
    reg = config.target_region
    K = config.n_targets
    for _ in range(max_tries):
        pts = np.column_stack([rng.uniform(reg.x_min, reg.x_max, K), rng.uniform(reg.y_min, reg.y_max, K)])
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        if K > 1 and d[np.triu_indices(K, 1)].min() < config.min_separation:
            continue
        if all(np.all(np.abs(array_angles(arr, pts)) < np.pi / 2)
               for p in config.pairs for arr in (p.tx, p.rx)):
            return pts
    raise RuntimeError("could not place targets; region too small for min_separation")


def simulate_observations(config: ScenarioConfig, targets, rng) -> list[ChannelObservation]:
    obs = []
    for pair in config.pairs:
        A = steering_matrix([angles_for_target(pair, t) for t in targets], pair)
        alpha = generate_coefficients(pair, targets, config.amplitude_model, rng)
        clean = synthesize_channel(pair, A, alpha)
        if config.noiseless:
            obs.append(ChannelObservation(pair.pair_id, clean))
        else:
            obs.append(add_estimation_noise(clean, pair.noise_variance, rng, pair.pair_id))
    return obs


def covariances(config: ScenarioConfig, observations: Sequence[ChannelObservation]) -> list[CovarianceSet]:
    return [sample_covariance(o, pair.noise_variance) for o, pair in zip(observations, config.pairs)]


def observation_digest(observations: Sequence[ChannelObservation]) -> str:
    h = hashlib.sha256()
    for o in observations:
        h.update(np.ascontiguousarray(o.h_tilde, dtype=np.complex128).tobytes())
    return h.hexdigest()[:16]


def fuse_scenario(config: ScenarioConfig, covs: Sequence[CovarianceSet], methods=None, truth=None) -> FusionResult:
    return fuse(covs, config.pairs, config.grid, config.n_targets,
                methods=tuple(methods or config.methods), angle_step=config.angle_step,
                exclusion_radius=config.exclusion_radius,
                angle_exclusion_cells=config.angle_exclusion_cells, truth=truth)


def draw_scene(config: ScenarioConfig, trial: int):
    """Targets, observations and covariances of one trial."""
    rng = trial_rng(config.seed, trial)
    targets = draw_targets(config, rng)
    obs = simulate_observations(config, targets, rng)
    return targets, obs, covariances(config, obs)


def associate_and_score(true_pos, est_pos) -> np.ndarray:
    """Squared errors under the assignment minimizing total squared distance."""
    t = np.asarray(true_pos, dtype=float).reshape(-1, 2)
    e = np.asarray(est_pos, dtype=float).reshape(-1, 2)
    if len(t) != len(e):
        raise ValueError("true and estimated sets must have equal size")
    d2 = np.sum((t[:, None, :] - e[None, :, :]) ** 2, axis=-1)
    rows = np.arange(len(t))
    best = min(itertools.permutations(rows), key=lambda p: (d2[rows, p].sum(), p))
    return d2[rows, best]


def run_trial(config: ScenarioConfig, trial: int, methods: Sequence[str] | None = None) -> list[TrialResult]:
    methods = tuple(methods or config.methods)
    targets, obs, covs = draw_scene(config, trial)
    fused = fuse_scenario(config, covs, methods, truth=targets)
    digest = observation_digest(obs)
    return [
        TrialResult(trial, m, targets, fused.positions[m], associate_and_score(targets, fused.positions[m]),
                    list(fused.diagonality), digest)
        for m in methods
    ]


def _run_block(args):
    config, trials, methods = args
    return [run_trial(config, t, methods) for t in trials]


def _half_width(samples: np.ndarray) -> float | None:
    if len(samples) < 2:
        return None
    return float(Z95 * np.std(samples, ddof=1) / np.sqrt(len(samples)))


def summarize(config: ScenarioConfig, results: Sequence[TrialResult], methods: Sequence[str]) -> ExperimentReport:
    """Aggregate trial results (any order) into an :class:`ExperimentReport`."""
    results = sorted(results, key=lambda r: (r.trial, methods.index(r.method)))
    rmse, ci = {}, {}
    for m in methods:
        per_trial = np.array([np.mean(r.sq_errors) for r in results if r.method == m])
        mse = float(np.mean(per_trial))
        rmse[m] = float(np.sqrt(mse))
        hw = _half_width(per_trial)
        if hw is None:
            ci[m] = None
        else:
            # delta method: d sqrt(x) = dx / (2 sqrt(x))
            ci[m] = hw / (2 * rmse[m]) if rmse[m] > 0 else float(np.sqrt(hw))
    first = [r for r in results if r.method == methods[0]]
    zeta = np.array([r.diagonality for r in first])
    ids = [p.pair_id for p in config.pairs]
    return ExperimentReport(
        scenario_digest=scenario_digest(config),
        seed=config.seed,
        n_trials=len(first),
        rmse=rmse,
        ci95=ci,
        mean_diagonality={pid: float(np.mean(zeta[:, i])) for i, pid in enumerate(ids)},
        diagonality_ci95={pid: _half_width(zeta[:, i]) for i, pid in enumerate(ids)},
        trial_results=list(results),
    )


def run_experiment(config: ScenarioConfig, n_trials: int | None = None, methods: Sequence[str] | None = None,
                   workers: int = 1) -> ExperimentReport:
    n_trials = config.trials if n_trials is None else n_trials
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    methods = tuple(methods or config.methods)
    if workers <= 1:
        results = [r for t in range(n_trials) for r in run_trial(config, t, methods)]
    else:
        blocks = [(config, range(i, n_trials, workers), methods) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for block in pool.map(_run_block, blocks) for trial in block for r in trial]
    return summarize(config, results, methods)


def sweep_subcarriers(config: ScenarioConfig, Q_list: Sequence[int], n_trials: int | None = None,
                      methods: Sequence[str] | None = None, workers: int = 1) -> list[ExperimentReport]:
    """One report per subcarrier count.  All runs share the master seed, so the
    target draws are common across Q (paired comparison)."""
    if not Q_list:
        raise ValueError("Q_list must be nonempty")
    return [run_experiment(config.with_subcarriers(int(Q)), n_trials, methods, workers) for Q in Q_list]
