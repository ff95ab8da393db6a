""" Builds every component an `ExperimentConfig` describes and runs the rounds.

    Artifacts written to ``config.output_dir``:

    - ``metrics.csv``: one row per round, columns as in `fedsim.metrics.CSV_COLUMNS`;
    - ``config.resolved``: JSON echo of the effective configuration, defaults and
      derived values included;
    - ``curves.svg``: accuracy curves."""

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..adversary import (
    AttackerConfig,
    FixedFrequency,
    NoAdversary,
    NormBounded,
    RandomSampling,
    Unconstrained,
)
from ..data import (
    BackdoorSpec,
    build_backdoor_task,
    choose_target_clients,
    generate_synthetic,
    load_leaf_json,
)
from ..defense import ClipAndNoise, NoDefense, NormClip, NormThreshold
from ..federation import FedConfig, ServerState, run_round
from ..metrics import CSV_COLUMNS
from ..nn.arch import CNN_EMNIST, ModelArch, init_params
from ..nn.training import TrainHyper
from ..seeding import derive_seed, make_rng
from .plotting import render_curves

__all__ = ["Experiment", "build_experiment", "run_experiment", "write_metrics_csv"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Experiment(object):
    """The assembled components of one run."""

    config: object
    fed: object
    arch: ModelArch
    fed_config: FedConfig
    schedule: object
    attacker: AttackerConfig
    defense: object
    initial_state: ServerState

    def describe(self):
        """Derived values echoed next to the configuration."""
        return {
            "arch": self.arch.describe(),
            "total_clients": self.fed_config.total_clients,
            "clients_per_round": self.fed_config.clients_per_round,
            "fraction_per_round": self.fed_config.fraction,
            "dataset_clients": len(self.fed),
            "holdout_size": len(self.fed.holdout_main),
            "target_client_ids": list(self.attacker.task.spec.target_client_ids),
            "mal_train_size": len(self.attacker.task.mal_train),
            "mal_eval_size": len(self.attacker.task.mal_eval),
            "attacker_clean_size": len(self.attacker.task.attacker_clean),
            "schedule": self.schedule.describe(),
            "attack_variant": self.attacker.variant.describe(),
            "defense": self.defense.describe(),
        }


def _build_dataset(config):
    data = config.data
    if data.source == "leaf":
        return load_leaf_json(data.path, data.class_count, data.holdout_fraction)
    seed = data.seed if data.seed is not None else derive_seed(config.seed, "data")
    return generate_synthetic(
        seed, data.num_clients, data.samples_per_client, data.class_count, data.input_side
    )


def _build_arch(config, fed):
    model = config.model
    if model.arch == CNN_EMNIST:
        return ModelArch.cnn_emnist(
            fed.class_count, fed.input_shape, model.filters, model.hidden or 128
        )
    return ModelArch.mlp_small(fed.class_count, fed.input_shape, model.hidden or 64)


def _build_schedule(config, fed_config, client_ids):
    attack = config.attack
    if attack.schedule == "none":
        return NoAdversary()
    if attack.schedule == "fixed_frequency":
        if attack.period is not None:
            return FixedFrequency(attack.period)
        return FixedFrequency.from_epsilon(attack.epsilon, fed_config.clients_per_round)
    epsilon = attack.epsilon
    if epsilon is None:
        epsilon = attack.compromised_count / float(len(client_ids))
    return RandomSampling.from_epsilon(
        epsilon, client_ids, make_rng(config.seed, "compromised"), attack.compromised_count
    )


def _build_defense(config):
    section = config.defense
    if section.kind == "norm_clip":
        return NormClip(section.norm_bound)
    if section.kind == "clip_and_noise":
        return ClipAndNoise(section.norm_bound, section.sigma)
    if section.kind == "norm_threshold":
        return NormThreshold(section.norm_bound)
    return NoDefense()


def build_experiment(config):
    """Assemble dataset, model, federation, adversary and defense from a config.

    Parameters
    ----------
    config : fedsim.experiment.ExperimentConfig

    Returns
    -------
    Experiment"""
    fed = _build_dataset(config)
    arch = _build_arch(config, fed)
    section = config.federation
    fed_config = FedConfig(
        section.total_clients or len(fed),
        section.clients_per_round,
        section.server_lr,
        TrainHyper(section.epochs, section.batch_size, section.learning_rate),
    )

    client_ids = fed.client_ids[: fed_config.total_clients]
    backdoor = config.backdoor
    targets = backdoor.target_client_ids or choose_target_clients(
        fed,
        backdoor.target_clients,
        backdoor.source_label,
        make_rng(config.seed, "targets"),
        among=client_ids,
    )
    task = build_backdoor_task(
        fed,
        BackdoorSpec(targets, backdoor.source_label, backdoor.target_label),
        backdoor.eval_fraction,
        backdoor.attacker_clean_size,
        make_rng(config.seed, "backdoor"),
    )

    attack = config.attack
    variant = (
        NormBounded(attack.norm_bound, attack.pgd_rounds)
        if attack.variant == "norm_bounded"
        else Unconstrained()
    )
    attacker = AttackerConfig(
        task,
        variant,
        TrainHyper(attack.epochs, attack.batch_size, attack.learning_rate),
        attack.reported_num_samples,
        attack.estimated_sum_n,
    )
    state = ServerState(0, init_params(arch, make_rng(config.seed, "init")), arch)
    return Experiment(
        config,
        fed,
        arch,
        fed_config,
        _build_schedule(config, fed_config, client_ids),
        attacker,
        _build_defense(config),
        state,
    )


def write_metrics_csv(reports, path):
    with open(str(path), "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.as_row())


def run_experiment(config):
    """Run every round of an experiment and write its artifacts.

    Parameters
    ----------
    config : fedsim.experiment.ExperimentConfig

    Returns
    -------
    List[fedsim.metrics.RoundReport]

    Raises
    ------
    fedsim.exceptions.FedSimError
        Invalid configuration or an invariant breach during the run.
    OSError
        An artifact could not be written; the message names the path."""
    experiment = build_experiment(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {"config": config.to_dict(), "derived": experiment.describe()}
    with open(str(out_dir / "config.resolved"), "w") as f:
        json.dump(resolved, f, indent=2, sort_keys=True, default=str)
        f.write("\n")
    logger.info(
        "running %d rounds: %s attack, %s defense, %d clients (%d per round)",
        config.rounds,
        experiment.schedule.kind,
        experiment.defense.kind,
        experiment.fed_config.total_clients,
        experiment.fed_config.clients_per_round,
    )

    executor = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    state, reports = experiment.initial_state, []
    try:
        for t in range(config.rounds):
            evaluate = t % config.eval_every == 0 or t == config.rounds - 1
            state, report = run_round(
                state,
                experiment.fed,
                experiment.fed_config,
                experiment.schedule,
                experiment.attacker,
                experiment.defense,
                config.seed,
                reports,
                evaluate,
                executor,
            )
            reports.append(report)
            if (t + 1) % config.log_every == 0 or t == config.rounds - 1:
                logger.info(
                    "round %d: main %.3f backdoor %.3f (cum. mean %.3f) adversaries %d p90 norm %.3g",
                    t,
                    report.main_acc,
                    report.backdoor_acc,
                    report.backdoor_cummean,
                    report.adversary_count,
                    report.benign_norm_p90,
                )
    finally:
        if executor is not None:
            executor.shutdown()

    write_metrics_csv(reports, out_dir / "metrics.csv")
    title = "{} attack / {} defense".format(experiment.schedule.kind, experiment.defense.kind)
    with open(str(out_dir / "curves.svg"), "w") as f:
        f.write(render_curves(reports, title))
    logger.info("wrote metrics.csv, config.resolved and curves.svg to %s", out_dir)
    return reports
