""" Adversaries: when they appear (schedules) and what they send (crafted updates).

    A compromised client replaces its honest update with a boosted delta
    ``beta * (w_star - w_t)`` where ``w_star`` is trained on the attacker's clean data
    plus the relabeled backdoor examples. With ``beta = sum_n / (eta * n_attacker)`` the
    aggregate replaces the global model by ``w_star`` when honest deltas are small."""

import logging
import math
from abc import abstractmethod
from dataclasses import dataclass, field
from typing import FrozenSet, Optional

import numpy as np
from custom_inherit import DocInheritMeta

from .data import BackdoorTask
from .exceptions import ConfigurationError
from .nn.training import TrainHyper, sgd_train
from .nn.vectors import l2_norm, project_l2_ball

__all__ = [
    "AttackSchedule",
    "NoAdversary",
    "FixedFrequency",
    "RandomSampling",
    "AttackVariant",
    "Unconstrained",
    "NormBounded",
    "AttackerConfig",
    "schedule_adversaries",
    "compute_boost_factor",
    "craft_unconstrained",
    "craft_norm_bounded",
    "split_among_attackers",
]

logger = logging.getLogger(__name__)

DEFAULT_PGD_ROUNDS = 5


# ------------------------------------------------------------------ schedules


class AttackSchedule(metaclass=DocInheritMeta(style="numpy_with_merge", abstract_base_class=True)):
    """Decides which selected slots of a round are taken by adversaries."""

    kind = None

    @abstractmethod
    def adversarial_slots(self, t, selected, rng):
        """Positions within ``selected`` occupied by adversaries this round.

        Parameters
        ----------
        t : int
            Round index.
        selected : Sequence[str]
            Selected client ids, in canonical order.
        rng : numpy.random.Generator
            The round's schedule generator.

        Returns
        -------
        List[int]
            Ascending positions into ``selected``."""

    def describe(self):
        out = {"kind": self.kind}
        out.update({k: v for k, v in self.__dict__.items() if k != "compromised_ids"})
        return out


@dataclass(frozen=True)
class NoAdversary(AttackSchedule):
    """No client is ever compromised."""

    kind = "none"

    def adversarial_slots(self, t, selected, rng):
        return []


@dataclass(frozen=True)
class FixedFrequency(AttackSchedule):
    """A single adversary takes the first selected slot in every round ``t`` with
    ``t % period == 0``."""

    kind = "fixed_frequency"

    period: int

    def __post_init__(self):
        if self.period < 1 or int(self.period) != self.period:
            raise ConfigurationError("period must be a positive integer")

    @classmethod
    def from_epsilon(cls, epsilon, clients_per_round):
        """Period ``round(1 / (epsilon * clients_per_round))``, at least 1."""
        if not 0 < epsilon < 1:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        return cls(max(1, int(round(1.0 / (epsilon * clients_per_round)))))

    def adversarial_slots(self, t, selected, rng):
        if selected and t % self.period == 0:
            return [0]
        return []


@dataclass(frozen=True)
class RandomSampling(AttackSchedule):
    """A fixed set of compromised clients; any of them that uniform selection picks
    acts adversarially. Per-round adversary counts are hypergeometric."""

    kind = "random_sampling"

    epsilon: float
    compromised_ids: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ConfigurationError("epsilon must lie in [0, 1)")
        object.__setattr__(self, "compromised_ids", frozenset(self.compromised_ids))

    @classmethod
    def from_epsilon(cls, epsilon, client_ids, rng, count=None):
        """Compromise ``floor(epsilon * K)`` (or ``count``) clients chosen uniformly.

        Parameters
        ----------
        epsilon : float
        client_ids : Sequence[str]
            All K client ids.
        rng : numpy.random.Generator
        count : Optional[int]
            Overrides the number of compromised clients.

        Returns
        -------
        RandomSampling"""
        client_ids = list(client_ids)
        if count is None:
            # guard against 0.0334 * 3383 = 112.99999...
            count = int(math.floor(epsilon * len(client_ids) + 1e-9))
        if not 0 <= count <= len(client_ids):
            raise ConfigurationError("cannot compromise {} of {} clients".format(count, len(client_ids)))
        picks = rng.choice(len(client_ids), size=count, replace=False)
        return cls(epsilon, frozenset(client_ids[i] for i in picks))

    def adversarial_slots(self, t, selected, rng):
        return [pos for pos, client_id in enumerate(selected) if client_id in self.compromised_ids]

    def describe(self):
        out = super(RandomSampling, self).describe()
        out["compromised_count"] = len(self.compromised_ids)
        return out


def schedule_adversaries(t, selected, schedule, rng):
    """Adversarial slot positions within this round's selection.

    Parameters
    ----------
    t : int
    selected : Sequence[str]
    schedule : AttackSchedule
    rng : numpy.random.Generator

    Returns
    -------
    List[int]"""
    if not len(selected):
        raise ConfigurationError("the selection must not be empty")
    return sorted(schedule.adversarial_slots(t, list(selected), rng))


# ------------------------------------------------------------------ crafting


def compute_boost_factor(sum_n, eta, n_attacker):
    """``beta = sum_n / (eta * n_attacker)``.

    Parameters
    ----------
    sum_n : int
        Total reported sample count of the round.
    eta : float
        Server learning rate.
    n_attacker : int
        The attacker's reported sample count.

    Returns
    -------
    float"""
    if not (sum_n > 0 and eta > 0 and n_attacker > 0):
        raise ConfigurationError("boost factor inputs must be positive")
    return float(sum_n) / (eta * n_attacker)


class AttackVariant(metaclass=DocInheritMeta(style="numpy_with_merge", abstract_base_class=True)):
    """How the attacker turns its data into a malicious delta."""

    kind = None

    @abstractmethod
    def craft(self, w_t, arch, cfg, beta, seed):
        """Produce the boosted malicious delta for one round.

        Parameters
        ----------
        w_t : numpy.ndarray
            Current global parameters.
        arch : fedsim.nn.ModelArch
        cfg : AttackerConfig
        beta : float
            Boost factor, at least 1.
        seed : int

        Returns
        -------
        numpy.ndarray"""

    def describe(self):
        out = {"kind": self.kind}
        out.update(self.__dict__)
        return out


@dataclass(frozen=True)
class Unconstrained(AttackVariant):
    """Train on D_trn and D_mal from ``w_t`` without any constraint."""

    kind = "unconstrained"

    def craft(self, w_t, arch, cfg, beta, seed):
        return craft_unconstrained(w_t, arch, cfg, beta, seed)


@dataclass(frozen=True)
class NormBounded(AttackVariant):
    """Projected training keeping the boosted delta within ``norm_bound``."""

    kind = "norm_bounded"

    norm_bound: float
    pgd_rounds: int = DEFAULT_PGD_ROUNDS

    def __post_init__(self):
        if not self.norm_bound > 0:
            raise ConfigurationError("norm_bound must be positive")
        if self.pgd_rounds < 1 or int(self.pgd_rounds) != self.pgd_rounds:
            raise ConfigurationError("pgd_rounds must be a positive integer")

    def craft(self, w_t, arch, cfg, beta, seed):
        return craft_norm_bounded(w_t, arch, cfg, self.norm_bound, beta, seed, self.pgd_rounds)


@dataclass(frozen=True)
class AttackerConfig(object):
    """Everything an attacker knows and does.

    Attributes
    ----------
    task : fedsim.data.BackdoorTask
    variant : AttackVariant
    mal_hyper : fedsim.nn.TrainHyper
        Training budget; for `NormBounded` the epochs are per projection round.
    reported_num_samples : Optional[int]
        The sample count every adversary reports. None means the median client size.
    estimated_sum_n : Optional[int]
        If set, the attacker boosts with this round total instead of the true one."""

    task: BackdoorTask
    variant: AttackVariant = field(default_factory=Unconstrained)
    mal_hyper: TrainHyper = field(default_factory=TrainHyper)
    reported_num_samples: Optional[int] = None
    estimated_sum_n: Optional[int] = None

    def __post_init__(self):
        if len(self.task.attacker_data) < 1:
            raise ConfigurationError("the attacker has no training data")
        if self.reported_num_samples is not None and self.reported_num_samples < 1:
            raise ConfigurationError("reported_num_samples must be positive")
        if self.estimated_sum_n is not None and self.estimated_sum_n < 1:
            raise ConfigurationError("estimated_sum_n must be positive")


def _check_beta(beta):
    if beta < 1:
        raise ConfigurationError(
            "boost factor must be >= 1, got {:.6g}; is the server learning rate above 1?".format(beta)
        )


def craft_unconstrained(w_t, arch, cfg, beta, seed):
    """Boosted unconstrained backdoor update ``beta * (w_star - w_t)``.

    ``w_star`` is trained from ``w_t`` on D_trn and D_mal, reshuffled every epoch.

    Parameters
    ----------
    w_t : numpy.ndarray
    arch : fedsim.nn.ModelArch
    cfg : AttackerConfig
    beta : float
    seed : int

    Returns
    -------
    numpy.ndarray"""
    _check_beta(beta)
    w_star = sgd_train(w_t, arch, cfg.task.attacker_data, cfg.mal_hyper, np.random.default_rng(seed))
    return beta * (w_star - w_t)


def _fit_within(delta, norm_bound):
    # rounding in beta * (w - w_t) may overshoot the bound by an ulp
    while l2_norm(delta) > norm_bound:
        delta = delta * np.nextafter(norm_bound / l2_norm(delta), 0.0)
    return delta


def craft_norm_bounded(w_t, arch, cfg, norm_bound, beta, seed, pgd_rounds=None):
    """Norm-bounded backdoor update via projected training.

    Each of ``pgd_rounds`` rounds trains for ``cfg.mal_hyper`` and projects the
    iterate back onto the l2 ball of radius ``norm_bound / beta`` around ``w_t``.
    One generator seeded with ``seed`` drives all rounds, so a single round with the
    projection inactive reproduces `craft_unconstrained`.

    Parameters
    ----------
    w_t : numpy.ndarray
    arch : fedsim.nn.ModelArch
    cfg : AttackerConfig
    norm_bound : float
        The defense threshold M the attacker targets.
    beta : float
    seed : int
    pgd_rounds : Optional[int]
        Defaults to the variant's setting, or 5.

    Returns
    -------
    numpy.ndarray
        A delta with l2 norm at most ``norm_bound``."""
    if not norm_bound > 0:
        raise ConfigurationError("norm_bound must be positive")
    _check_beta(beta)
    if pgd_rounds is None:
        pgd_rounds = getattr(cfg.variant, "pgd_rounds", DEFAULT_PGD_ROUNDS)
    radius = norm_bound / beta
    rng = np.random.default_rng(seed)
    data = cfg.task.attacker_data
    w = w_t
    for i in range(pgd_rounds):
        w = sgd_train(w, arch, data, cfg.mal_hyper, rng)
        w = project_l2_ball(w, w_t, radius)
        logger.debug("pgd round %d: distance to w_t %.4g (radius %.4g)", i, l2_norm(w - w_t), radius)
    return _fit_within(beta * (w - w_t), norm_bound)


def split_among_attackers(total_delta, count):
    """Divide one crafted delta evenly among ``count`` coordinating attackers."""
    if count < 1:
        raise ConfigurationError("count must be at least 1")
    return [total_delta / count for _ in range(count)]
