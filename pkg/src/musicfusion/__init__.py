"""Weighted-MUSIC data-level fusion for multistatic OFDM radar localization."""
from .channel import ChannelObservation, add_estimation_noise, bistatic_delay, generate_coefficients, synthesize_channel
from .config import ConfigError, ScenarioConfig, default_scenario, parse_scenario, scenario_digest
from .experiment import ExperimentReport, TrialResult, associate_and_score, run_experiment, run_trial, sweep_subcarriers
from .fusion import (
    METHODS,
    AngleEstimate,
    LikelihoodMap,
    SearchGrid,
    combine_maps,
    exact_ml_oracle,
    fuse,
    fusion_weight,
    pair_likelihood_map,
    preestimate_angles,
    select_peaks,
    soft_fusion,
)
from .geometry import (
    AnglePair,
    ArraySpec,
    OutOfFieldError,
    Position2D,
    RadarPairConfig,
    angles_for_target,
    joint_steering_vector,
    steering_matrix,
    steering_vector,
)
from .subspace import (
    CovarianceSet,
    SubspaceDecomposition,
    coefficient_covariance,
    decompose,
    diagonality,
    music_value,
    pseudo_inverse,
    sample_covariance,
)

__version__ = "0.1.0"
