""" The server round loop: client selection, local training, defended weighted
    aggregation, and per-round metrics."""

import logging
from dataclasses import dataclass
from operator import attrgetter

import numpy as np

from .adversary import compute_boost_factor, schedule_adversaries, split_among_attackers
from .defense import NoDefense
from .exceptions import ConfigurationError, InvariantError
from .metrics import (
    RoundReport,
    cumulative_mean,
    evaluate_backdoor,
    evaluate_main,
    summarize_norms,
)
from .nn.arch import ModelArch
from .nn.training import TrainHyper, sgd_train
from .nn.vectors import l2_norm
from .seeding import derive_seed, make_rng

__all__ = [
    "ServerState",
    "ClientUpdate",
    "FedConfig",
    "select_clients",
    "client_update",
    "aggregate",
    "weighted_mean",
    "run_round",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ServerState(object):
    """The global model ``w_t`` at round ``t``."""

    round_index: int
    params: np.ndarray
    arch: ModelArch

    def __post_init__(self):
        params = np.asarray(self.params, dtype=np.float64)
        if params.shape != (self.arch.param_count,):
            raise ConfigurationError(
                "params have shape {}, expected ({},)".format(params.shape, self.arch.param_count)
            )
        if not np.all(np.isfinite(params)):
            raise InvariantError("global parameters are not finite at round {}".format(self.round_index))
        object.__setattr__(self, "params", params)


@dataclass(frozen=True, eq=False)
class ClientUpdate(object):
    """A delta submitted by one selected client.

    ``is_malicious`` is bookkeeping for metrics; aggregation never reads it."""

    client_id: str
    delta: np.ndarray
    num_samples: int
    is_malicious: bool = False

    def __post_init__(self):
        if self.num_samples < 1:
            raise ConfigurationError("num_samples must be positive")


@dataclass(frozen=True)
class FedConfig(object):
    """Federation parameters.

    Attributes
    ----------
    total_clients : int
        K; the first K clients of the dataset in canonical order take part.
    clients_per_round : int
        m = C * K.
    server_lr : float
        eta.
    client_hyper : fedsim.nn.TrainHyper"""

    total_clients: int
    clients_per_round: int = 30
    server_lr: float = 1.0
    client_hyper: TrainHyper = TrainHyper()

    def __post_init__(self):
        if not 1 <= self.clients_per_round <= self.total_clients:
            raise ConfigurationError(
                "need 1 <= clients_per_round ({}) <= total_clients ({})".format(
                    self.clients_per_round, self.total_clients
                )
            )
        if not self.server_lr > 0:
            raise ConfigurationError("server_lr must be positive")

    @property
    def fraction(self):
        """C = m / K."""
        return self.clients_per_round / float(self.total_clients)


def select_clients(rng, total_clients, clients_per_round):
    """Uniformly sample ``clients_per_round`` distinct indices in
    ``[0, total_clients)``, returned ascending."""
    if clients_per_round > total_clients:
        raise ConfigurationError(
            "cannot select {} of {} clients".format(clients_per_round, total_clients)
        )
    picks = rng.choice(total_clients, size=clients_per_round, replace=False)
    return sorted(int(i) for i in picks)


def client_update(w_t, arch, client, hyper, seed):
    """Honest local training: ``delta = sgd_train(w_t, ...) - w_t``.

    Parameters
    ----------
    w_t : numpy.ndarray
    arch : fedsim.nn.ModelArch
    client : fedsim.data.ClientDataset
    hyper : fedsim.nn.TrainHyper
    seed : int
        Drives the per-epoch shuffles.

    Returns
    -------
    ClientUpdate"""
    trained = sgd_train(w_t, arch, client.examples, hyper, np.random.default_rng(seed))
    return ClientUpdate(client.client_id, trained - w_t, client.num_samples)


def _pairwise_sum(vectors):
    if len(vectors) == 1:
        return vectors[0]
    half = len(vectors) // 2
    return _pairwise_sum(vectors[:half]) + _pairwise_sum(vectors[half:])


def weighted_mean(deltas, weights):
    """``sum(w_k * d_k) / sum(w_k)`` with pairwise summation, in the given order."""
    total = float(sum(weights))
    return _pairwise_sum([float(w) * d for d, w in zip(deltas, weights)]) / total


def aggregate(state, updates, cfg, defense=None, rng=None):
    """One server step ``w_{t+1} = w_t + eta * defended_mean(updates)``.

    Updates are reduced in client-id order. Each delta goes through
    ``defense.process_update`` (clip or reject) before the sample-weighted mean is
    taken; the mean then goes through ``defense.process_aggregate`` (noise).

    Parameters
    ----------
    state : ServerState
    updates : Sequence[ClientUpdate]
    cfg : FedConfig
    defense : Optional[fedsim.defense.Defense]
        Defaults to no defense.
    rng : Optional[numpy.random.Generator]
        The round's noise generator; required only by noisy defenses.

    Returns
    -------
    ServerState

    Raises
    ------
    ConfigurationError
        ``updates`` is empty.
    InvariantError
        A delta does not match the parameter vector's length."""
    if not updates:
        raise ConfigurationError("aggregate needs at least one update")
    defense = NoDefense() if defense is None else defense
    kept, weights = [], []
    for update in sorted(updates, key=attrgetter("client_id")):
        if np.shape(update.delta) != state.params.shape:
            raise InvariantError(
                "update from {!r} has shape {}, expected {}".format(
                    update.client_id, np.shape(update.delta), state.params.shape
                )
            )
        delta = defense.process_update(update.delta)
        if delta is not None:
            kept.append(delta)
            weights.append(update.num_samples)

    if kept:
        mean = weighted_mean(kept, weights)
    else:
        logger.warning("round %d: every update was rejected by the defense", state.round_index)
        mean = np.zeros_like(state.params)
    mean = defense.process_aggregate(mean, rng)
    return ServerState(state.round_index + 1, state.params + cfg.server_lr * mean, state.arch)


def _median_client_size(fed, total_clients):
    return max(1, int(round(float(np.median([c.num_samples for c in fed.clients[:total_clients]])))))


def run_round(
    state,
    fed,
    cfg,
    schedule,
    attacker,
    defense,
    root_seed,
    history=(),
    evaluate=True,
    executor=None,
):
    """Play one federated round.

    Selects clients, hands the adversarial slots to the attacker, trains the
    remaining clients honestly (optionally on ``executor``), aggregates under the
    defense and measures the new model.

    Parameters
    ----------
    state : ServerState
    fed : fedsim.data.FederatedDataset
    cfg : FedConfig
    schedule : fedsim.adversary.AttackSchedule
    attacker : fedsim.adversary.AttackerConfig
        Also supplies the backdoor evaluation set.
    defense : fedsim.defense.Defense
    root_seed : int
    history : Sequence[RoundReport]
        Reports of earlier rounds, for the cumulative backdoor mean and for carrying
        accuracies forward on rounds that are not evaluated.
    evaluate : bool, optional (default=True)
    executor : Optional[concurrent.futures.Executor]

    Returns
    -------
    Tuple[ServerState, RoundReport]"""
    t = state.round_index
    if attacker is None:
        raise ConfigurationError("run_round needs an AttackerConfig for the backdoor evaluation set")
    if cfg.total_clients > len(fed):
        raise ConfigurationError(
            "total_clients ({}) exceeds the dataset's {} clients".format(cfg.total_clients, len(fed))
        )
    clients = fed.clients[: cfg.total_clients]
    selected = [clients[i] for i in select_clients(make_rng(root_seed, t, "select"), cfg.total_clients, cfg.clients_per_round)]
    selected_ids = [c.client_id for c in selected]
    slots = set(schedule_adversaries(t, selected_ids, schedule, make_rng(root_seed, t, "schedule")))

    benign = [c for pos, c in enumerate(selected) if pos not in slots]
    jobs = [
        (state.params, state.arch, c, cfg.client_hyper, derive_seed(root_seed, t, c.client_id))
        for c in benign
    ]
    if executor is None:
        updates = [client_update(*job) for job in jobs]
    else:
        updates = list(executor.map(lambda job: client_update(*job), jobs))
    benign_norms = [l2_norm(u.delta) for u in updates]
    logger.debug("round %d benign norms: %s", t, ", ".join("%.3g" % n for n in benign_norms))

    attacker_norm = None
    if slots:
        n_adv = attacker.reported_num_samples or _median_client_size(fed, cfg.total_clients)
        sum_n = sum(u.num_samples for u in updates) + n_adv * len(slots)
        beta = compute_boost_factor(attacker.estimated_sum_n or sum_n, cfg.server_lr, n_adv)
        total = attacker.variant.craft(state.params, state.arch, attacker, beta, derive_seed(root_seed, t, "attack"))
        pieces = split_among_attackers(total, len(slots))
        attacker_norm = l2_norm(pieces[0])
        logger.debug("round %d: %d adversaries, beta=%.4g, norm=%.4g", t, len(slots), beta, attacker_norm)
        updates += [
            ClientUpdate(selected_ids[pos], piece, n_adv, is_malicious=True)
            for pos, piece in zip(sorted(slots), pieces)
        ]

    new_state = aggregate(state, updates, cfg, defense, make_rng(root_seed, t, "noise"))

    if evaluate or not history:
        main_acc = evaluate_main(new_state.params, new_state.arch, fed.holdout_main)
        backdoor_acc = evaluate_backdoor(new_state.params, new_state.arch, attacker.task.mal_eval)
    else:
        main_acc, backdoor_acc = history[-1].main_acc, history[-1].backdoor_acc
    cummean = cumulative_mean([r.backdoor_acc for r in history] + [backdoor_acc])[-1]
    p50, p90 = summarize_norms(benign_norms)
    report = RoundReport(
        round=t,
        main_acc=main_acc,
        backdoor_acc=backdoor_acc,
        backdoor_cummean=min(1.0, max(0.0, cummean)),
        adversary_count=len(slots),
        benign_norm_p50=p50,
        benign_norm_p90=p90,
        attacker_norm=attacker_norm,
    )
    return new_state, report

