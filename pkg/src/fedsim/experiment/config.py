""" Experiment configuration: one TOML file per experiment, parsed into frozen
    dataclasses with every default filled in.

    Example::

        rounds = 100
        seed = 0
        output_dir = "runs/freq1"

        [data]
        source = "synthetic"        # or "leaf" with path = "..."

        [federation]
        clients_per_round = 30

        [attack]
        schedule = "fixed_frequency"
        period = 1
        variant = "unconstrained"

        [defense]
        kind = "norm_clip"
        norm_bound = 3.0
"""

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Tuple

from ..exceptions import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "DataConfig",
    "ModelConfig",
    "FederationConfig",
    "BackdoorConfig",
    "AttackConfig",
    "DefenseSection",
    "ExperimentConfig",
    "load_config",
    "parse_config",
]

_SOURCES = ("synthetic", "leaf")
_ARCHS = ("mlp_small", "cnn_emnist")
_SCHEDULES = ("none", "fixed_frequency", "random_sampling")
_VARIANTS = ("unconstrained", "norm_bounded")
_DEFENSES = ("none", "norm_clip", "clip_and_noise", "norm_threshold")


def _choice(name, value, allowed):
    if value not in allowed:
        raise ConfigurationError(
            "{} must be one of {}, got {!r}".format(name, ", ".join(allowed), value)
        )


def _integers(section, **values):
    """Reject non-integer values (bools included); None means "not set"."""
    for name, value in values.items():
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise ConfigurationError(
                "{}.{} must be an integer, got {!r}".format(section, name, value)
            )


@dataclass(frozen=True)
class DataConfig(object):
    source: str = "synthetic"
    path: Optional[str] = None
    holdout_fraction: float = 0.1
    class_count: int = 10
    num_clients: int = 100
    samples_per_client: int = 50
    input_side: int = 16
    seed: Optional[int] = None

    def __post_init__(self):
        _choice("data.source", self.source, _SOURCES)
        _integers(
            "data",
            class_count=self.class_count,
            num_clients=self.num_clients,
            samples_per_client=self.samples_per_client,
            input_side=self.input_side,
            seed=self.seed,
        )
        if self.source == "leaf" and not self.path:
            raise ConfigurationError("data.path is required when data.source = 'leaf'")


@dataclass(frozen=True)
class ModelConfig(object):
    arch: str = "mlp_small"
    hidden: Optional[int] = None
    filters: Tuple[int, int] = (32, 64)

    def __post_init__(self):
        _choice("model.arch", self.arch, _ARCHS)
        object.__setattr__(self, "filters", tuple(self.filters))
        if len(self.filters) != 2:
            raise ConfigurationError("model.filters must hold two channel counts")
        _integers("model", hidden=self.hidden)
        for count in self.filters:
            _integers("model", filters=count)


@dataclass(frozen=True)
class FederationConfig(object):
    total_clients: Optional[int] = None
    clients_per_round: int = 30
    server_lr: float = 1.0
    epochs: int = 5
    batch_size: int = 20
    learning_rate: float = 0.1

    def __post_init__(self):
        _integers(
            "federation",
            total_clients=self.total_clients,
            clients_per_round=self.clients_per_round,
            epochs=self.epochs,
            batch_size=self.batch_size,
        )


@dataclass(frozen=True)
class BackdoorConfig(object):
    """``target_client_ids`` wins over ``target_clients`` (a count of seeded picks)."""

    target_clients: int = 30
    target_client_ids: Tuple[str, ...] = ()
    source_label: int = 7
    target_label: int = 1
    eval_fraction: float = 0.2
    attacker_clean_size: int = 400

    def __post_init__(self):
        _integers(
            "backdoor",
            target_clients=self.target_clients,
            source_label=self.source_label,
            target_label=self.target_label,
            attacker_clean_size=self.attacker_clean_size,
        )
        object.__setattr__(self, "target_client_ids", tuple(self.target_client_ids))
        if not self.target_client_ids and self.target_clients < 1:
            raise ConfigurationError("backdoor.target_clients must be positive")


@dataclass(frozen=True)
class AttackConfig(object):
    """``epochs`` defaults to 5 for the unconstrained attack and to 1 per projection
    round for the norm-bounded one."""

    schedule: str = "none"
    period: Optional[int] = None
    epsilon: Optional[float] = None
    compromised_count: Optional[int] = None
    variant: str = "unconstrained"
    norm_bound: float = 10.0
    pgd_rounds: int = 5
    epochs: Optional[int] = None
    batch_size: int = 20
    learning_rate: float = 0.1
    reported_num_samples: Optional[int] = None
    estimated_sum_n: Optional[int] = None

    def __post_init__(self):
        _choice("attack.schedule", self.schedule, _SCHEDULES)
        _choice("attack.variant", self.variant, _VARIANTS)
        _integers(
            "attack",
            period=self.period,
            compromised_count=self.compromised_count,
            pgd_rounds=self.pgd_rounds,
            epochs=self.epochs,
            batch_size=self.batch_size,
            reported_num_samples=self.reported_num_samples,
            estimated_sum_n=self.estimated_sum_n,
        )
        if self.schedule == "fixed_frequency":
            if self.period is None and self.epsilon is None:
                raise ConfigurationError("a fixed_frequency schedule needs period or epsilon")
            if self.period is not None and self.period < 1:
                raise ConfigurationError("attack.period must be >= 1")
        if self.schedule == "random_sampling" and self.epsilon is None and self.compromised_count is None:
            raise ConfigurationError("a random_sampling schedule needs epsilon or compromised_count")
        if self.epsilon is not None and not 0 < self.epsilon < 1:
            raise ConfigurationError("attack.epsilon must lie in (0, 1)")
        if self.epochs is None:
            object.__setattr__(self, "epochs", 1 if self.variant == "norm_bounded" else 5)


@dataclass(frozen=True)
class DefenseSection(object):
    kind: str = "none"
    norm_bound: Optional[float] = None
    sigma: float = 0.0

    def __post_init__(self):
        _choice("defense.kind", self.kind, _DEFENSES)
        if self.kind != "none" and self.norm_bound is None:
            raise ConfigurationError("defense.norm_bound is required for {!r}".format(self.kind))


@dataclass(frozen=True)
class ExperimentConfig(object):
    """A complete experiment description.

    Attributes
    ----------
    rounds : int
    seed : int
        Root seed; every random draw derives from it.
    output_dir : str
    eval_every : int
        Rounds between evaluations; round 0 and the last round are always evaluated.
    log_every : int
    workers : int
        Threads used for client training within a round."""

    rounds: int = 100
    seed: int = 0
    output_dir: str = "runs/default"
    eval_every: int = 1
    log_every: int = 10
    workers: int = 1
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    federation: FederationConfig = field(default_factory=FederationConfig)
    backdoor: BackdoorConfig = field(default_factory=BackdoorConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    defense: DefenseSection = field(default_factory=DefenseSection)

    def __post_init__(self):
        _integers(
            "experiment",
            rounds=self.rounds,
            seed=self.seed,
            eval_every=self.eval_every,
            log_every=self.log_every,
            workers=self.workers,
        )
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if self.eval_every < 1 or self.log_every < 1 or self.workers < 1:
            raise ConfigurationError("eval_every, log_every and workers must be >= 1")

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **overrides):
        """Replace top-level fields whose override value is not None."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


_SECTIONS = {
    "data": DataConfig,
    "model": ModelConfig,
    "federation": FederationConfig,
    "backdoor": BackdoorConfig,
    "attack": AttackConfig,
    "defense": DefenseSection,
}


def _build(cls, raw, where):
    if not isinstance(raw, dict):
        raise ConfigurationError("[{}] must be a table".format(where))
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError("unknown key(s) in [{}]: {}".format(where, ", ".join(unknown)))
    try:
        return cls(**raw)
    except TypeError as err:
        raise ConfigurationError("[{}]: {}".format(where, err))


def parse_config(raw):
    """Build an `ExperimentConfig` from a parsed TOML document (a dict)."""
    raw = dict(raw)
    sections = {name: _build(cls, raw.pop(name, {}), name) for name, cls in _SECTIONS.items()}
    top = _build(ExperimentConfig, raw, "top level")
    return replace(top, **sections)


def load_config(path):
    """Read and validate a TOML experiment file.

    Raises
    ------
    ConfigurationError
        The file is not valid TOML or violates the schema.
    OSError
        The file cannot be read."""
    with open(str(path), "rb") as f:
        try:
            raw = tomllib.load(f)
        except tomllib.TOMLDecodeError as err:
            raise ConfigurationError("{}: invalid TOML ({})".format(path, err))
    return parse_config(raw)
