""" fedsim: a deterministic federated-learning simulator for backdoor model-poisoning
    attacks and norm-clipping / weak differential-privacy defenses."""

from ._version import __version__
from .adversary import (
    AttackerConfig,
    AttackSchedule,
    FixedFrequency,
    NoAdversary,
    NormBounded,
    RandomSampling,
    Unconstrained,
    compute_boost_factor,
    craft_norm_bounded,
    craft_unconstrained,
    schedule_adversaries,
    split_among_attackers,
)
from .data import (
    BackdoorSpec,
    BackdoorTask,
    ClientDataset,
    FederatedDataset,
    build_backdoor_task,
    generate_synthetic,
    load_leaf_json,
    write_leaf_json,
)
from .defense import (
    ClipAndNoise,
    DefenseConfig,
    NoDefense,
    NormClip,
    NormThreshold,
    add_gaussian_noise,
    clip_update,
)
from .exceptions import ConfigurationError, FedSimError, IngestionError, InvariantError
from .experiment import ExperimentConfig, load_config, run_experiment
from .federation import (
    ClientUpdate,
    FedConfig,
    ServerState,
    aggregate,
    client_update,
    run_round,
    select_clients,
)
from .metrics import RoundReport, cumulative_mean, evaluate_backdoor, evaluate_main

__all__ = [
    "__version__",
    "AttackerConfig",
    "AttackSchedule",
    "FixedFrequency",
    "NoAdversary",
    "NormBounded",
    "RandomSampling",
    "Unconstrained",
    "compute_boost_factor",
    "craft_norm_bounded",
    "craft_unconstrained",
    "schedule_adversaries",
    "split_among_attackers",
    "BackdoorSpec",
    "BackdoorTask",
    "ClientDataset",
    "FederatedDataset",
    "build_backdoor_task",
    "generate_synthetic",
    "load_leaf_json",
    "write_leaf_json",
    "ClipAndNoise",
    "DefenseConfig",
    "NoDefense",
    "NormClip",
    "NormThreshold",
    "add_gaussian_noise",
    "clip_update",
    "ConfigurationError",
    "FedSimError",
    "IngestionError",
    "InvariantError",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "ClientUpdate",
    "FedConfig",
    "ServerState",
    "aggregate",
    "client_update",
    "run_round",
    "select_clients",
    "RoundReport",
    "cumulative_mean",
    "evaluate_backdoor",
    "evaluate_main",
]
