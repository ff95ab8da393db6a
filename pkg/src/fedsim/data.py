""" Federated datasets: LEAF JSON ingestion/export, a synthetic non-iid generator,
    and construction of the backdoor task.

    LEAF schema::

        {"users": [str, ...],
         "num_samples": [int, ...],
         "user_data": {user: {"x": [[pixel, ...], ...], "y": [int, ...]}},
         "holdout": {"x": [...], "y": [...]}}      # optional, fedsim extension

    Pixel rows are flattened row-major. A file whose largest pixel exceeds 1.5 is
    read as 0-255 intensities and rescaled to [0, 1]."""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import ConfigurationError, IngestionError
from .nn.batch import ExampleSet

__all__ = [
    "ClientDataset",
    "FederatedDataset",
    "BackdoorSpec",
    "BackdoorTask",
    "load_leaf_json",
    "write_leaf_json",
    "generate_synthetic",
    "choose_target_clients",
    "build_backdoor_task",
]

logger = logging.getLogger(__name__)

_PIXEL_SCALE_THRESHOLD = 1.5
_STROKE_INTENSITY = 0.6
_HOLDOUT_PER_CLASS = 20


@dataclass(frozen=True, eq=False)
class ClientDataset(object):
    """One client's local training examples.

    Attributes
    ----------
    client_id : str
    examples : fedsim.nn.ExampleSet
        Non-empty."""

    client_id: str
    examples: ExampleSet

    def __post_init__(self):
        if len(self.examples) < 1:
            raise ConfigurationError("client {!r} has no examples".format(self.client_id))

    @property
    def num_samples(self):
        return len(self.examples)


@dataclass(frozen=True, eq=False)
class FederatedDataset(object):
    """Client datasets in canonical (sorted by id) order, plus a global holdout.

    Attributes
    ----------
    clients : Tuple[ClientDataset, ...]
    holdout_main : fedsim.nn.ExampleSet
    class_count : int
    input_shape : Tuple[int, int]"""

    clients: Tuple[ClientDataset, ...]
    holdout_main: ExampleSet
    class_count: int
    input_shape: Tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "clients", tuple(self.clients))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        ids = [c.client_id for c in self.clients]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("client ids must be unique")
        if ids != sorted(ids):
            raise ConfigurationError("clients must be sorted by client_id")
        for client in self.clients:
            _check_examples(client.examples, self.input_shape, self.class_count, client.client_id)
        _check_examples(self.holdout_main, self.input_shape, self.class_count, "holdout")

    def __len__(self):
        return len(self.clients)

    @property
    def client_ids(self):
        return [c.client_id for c in self.clients]

    def client(self, client_id):
        for c in self.clients:
            if c.client_id == client_id:
                return c
        raise KeyError(client_id)

    def pooled(self):
        """All clients' training examples, concatenated in canonical order."""
        return ExampleSet.concat([c.examples for c in self.clients], self.input_shape)


def _check_examples(examples, input_shape, class_count, owner):
    if len(examples) and examples.input_shape != tuple(input_shape):
        raise ConfigurationError(
            "{}: inputs have shape {}, expected {}".format(owner, examples.input_shape, input_shape)
        )
    if len(examples) and (examples.labels.min() < 0 or examples.labels.max() >= class_count):
        raise ConfigurationError("{}: label outside [0, {})".format(owner, class_count))


@dataclass(frozen=True)
class BackdoorSpec(object):
    """Which clients' ``source_label`` examples the attacker relabels as ``target_label``.

    The number of target clients is the "number of backdoor tasks"."""

    target_client_ids: Tuple[str, ...]
    source_label: int = 7
    target_label: int = 1

    def __post_init__(self):
        object.__setattr__(self, "target_client_ids", tuple(self.target_client_ids))
        if not self.target_client_ids:
            raise ConfigurationError("a backdoor needs at least one target client")
        if len(set(self.target_client_ids)) != len(self.target_client_ids):
            raise ConfigurationError("target client ids must be unique")
        if self.source_label == self.target_label:
            raise ConfigurationError("source_label and target_label must differ")


@dataclass(frozen=True, eq=False)
class BackdoorTask(object):
    """The attacker's data.

    Attributes
    ----------
    mal_train : fedsim.nn.ExampleSet
        Relabeled backdoor examples used for crafting (D_mal).
    mal_eval : fedsim.nn.ExampleSet
        Relabeled backdoor examples held out for measuring backdoor accuracy.
    attacker_clean : fedsim.nn.ExampleSet
        Correctly labeled samples from the training distribution (D_trn).
    spec : BackdoorSpec"""

    mal_train: ExampleSet
    mal_eval: ExampleSet
    attacker_clean: ExampleSet
    spec: BackdoorSpec = field(default=None)

    @property
    def attacker_data(self):
        """D_trn followed by D_mal."""
        return ExampleSet.concat([self.attacker_clean, self.mal_train])


# ------------------------------------------------------------------ LEAF JSON


def _leaf_examples(user, record, class_count, input_shape, scale):
    try:
        x = np.asarray(record["x"], dtype=np.float64)
        y = np.asarray(record["y"])
    except (KeyError, TypeError, ValueError) as err:
        raise IngestionError("user {!r}: malformed record ({})".format(user, err))
    if y.ndim != 1 or x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise IngestionError("user {!r}: x and y lengths disagree".format(user))
    if y.size and y.dtype.kind not in "iuf":
        raise IngestionError("user {!r}: labels must be numbers, got {}".format(user, y.dtype))
    if y.size and not np.all(np.equal(np.mod(y, 1), 0)):
        raise IngestionError("user {!r}: labels must be integers".format(user))
    y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= class_count):
        raise IngestionError(
            "user {!r}: label out of range [0, {})".format(user, class_count)
        )
    height, width = input_shape
    if x.shape[1] != height * width:
        raise IngestionError(
            "user {!r}: rows have {} pixels, expected {}".format(user, x.shape[1], height * width)
        )
    return ExampleSet((x / scale).reshape(-1, height, width), y)


def _infer_shape(first_row_len):
    side = int(round(math.sqrt(first_row_len)))
    if side * side != first_row_len:
        raise IngestionError(
            "cannot infer a square image from {} pixels; pass input_shape".format(first_row_len)
        )
    return side, side


def load_leaf_json(path, class_count=10, holdout_fraction=0.1, input_shape=None):
    """Read a writer-partitioned dataset in the LEAF JSON schema.

    Parameters
    ----------
    path : Union[str, pathlib.Path]
    class_count : int, optional (default=10)
    holdout_fraction : float, optional (default=0.1)
        The last ``floor(n * holdout_fraction)`` examples of each user (in file
        order) are withheld into the global holdout.
    input_shape : Optional[Tuple[int, int]]
        Inferred as a square image when omitted.

    Returns
    -------
    FederatedDataset
        Clients sorted by id.

    Raises
    ------
    IngestionError
        Missing or malformed file, duplicate or empty user, label out of range."""
    if not 0 <= holdout_fraction < 1:
        raise ConfigurationError("holdout_fraction must lie in [0, 1)")
    try:
        with open(str(path), "r") as f:
            raw = json.load(f)
    except OSError as err:
        raise IngestionError("cannot read LEAF file {}: {}".format(path, err))
    except ValueError as err:
        raise IngestionError("malformed JSON in {}: {}".format(path, err))

    try:
        users = list(raw["users"])
        num_samples = list(raw["num_samples"])
        user_data = raw["user_data"]
    except (KeyError, TypeError):
        raise IngestionError(
            "{}: expected keys 'users', 'num_samples' and 'user_data'".format(path)
        )
    if len(users) != len(num_samples):
        raise IngestionError("{}: 'users' and 'num_samples' differ in length".format(path))
    if not isinstance(user_data, dict):
        raise IngestionError("{}: 'user_data' must map user ids to records".format(path))

    seen = set()
    for user, count in zip(users, num_samples):
        if not isinstance(user, str):
            raise IngestionError("user ids must be strings, got {!r}".format(user))
        if user in seen:
            raise IngestionError("duplicate user id {!r}".format(user))
        seen.add(user)
        if not isinstance(user_data.get(user), dict):
            raise IngestionError("user {!r} has no entry in 'user_data'".format(user))
        if not isinstance(count, int) or isinstance(count, bool):
            raise IngestionError(
                "user {!r}: num_samples entry {!r} is not an integer".format(user, count)
            )
        if not isinstance(user_data[user].get("y"), (list, type(None))):
            raise IngestionError("user {!r}: 'y' must be a list of labels".format(user))
        if count < 1 or not user_data[user].get("y"):
            raise IngestionError("user {!r} has zero samples".format(user))
        if len(user_data[user]["y"]) != count:
            raise IngestionError(
                "user {!r}: num_samples says {} but {} labels found".format(
                    user, count, len(user_data[user]["y"])
                )
            )

    holdout_raw = raw.get("holdout")
    if holdout_raw is not None and not isinstance(holdout_raw, dict):
        raise IngestionError("{}: 'holdout' must be a record with 'x' and 'y'".format(path))
    try:
        rows = [user_data[u]["x"] for u in users]
        if holdout_raw and holdout_raw.get("x"):
            rows.append(holdout_raw["x"])
        peak = max(max(max(row) for row in user_rows) for user_rows in rows if user_rows)
        first_len = len(rows[0][0])
        scale = 255.0 if peak > _PIXEL_SCALE_THRESHOLD else 1.0
    except (IndexError, KeyError, TypeError, ValueError) as err:
        raise IngestionError("{}: malformed pixel data ({})".format(path, err))
    shape = tuple(input_shape) if input_shape is not None else _infer_shape(first_len)

    clients, withheld = [], []
    for user in sorted(users):
        examples = _leaf_examples(user, user_data[user], class_count, shape, scale)
        n_hold = int(math.floor(len(examples) * holdout_fraction))
        n_train = len(examples) - n_hold
        clients.append(ClientDataset(user, examples.take(np.arange(n_train))))
        withheld.append(examples.take(np.arange(n_train, len(examples))))
    if holdout_raw and holdout_raw.get("y"):
        withheld.append(_leaf_examples("holdout", holdout_raw, class_count, shape, scale))

    fed = FederatedDataset(
        tuple(clients), ExampleSet.concat(withheld, shape), class_count, shape
    )
    logger.info(
        "loaded %d clients (%d training examples, %d holdout) from %s",
        len(fed),
        sum(c.num_samples for c in fed.clients),
        len(fed.holdout_main),
        path,
    )
    return fed


def write_leaf_json(fed, path):
    """Write a `FederatedDataset` in the LEAF schema, holdout included under "holdout"."""

    def record(examples):
        return {
            "x": examples.inputs.reshape(len(examples), -1).tolist(),
            "y": examples.labels.tolist(),
        }

    payload = {
        "users": fed.client_ids,
        "num_samples": [c.num_samples for c in fed.clients],
        "user_data": {c.client_id: record(c.examples) for c in fed.clients},
        "holdout": record(fed.holdout_main),
    }
    with open(str(path), "w") as f:
        json.dump(payload, f)
    logger.info("wrote %d clients to %s", len(fed), path)


# ------------------------------------------------------------------ synthetic


def _smooth(images):
    padded = np.pad(images, ((0, 0), (1, 1), (1, 1)), mode="edge")
    return sliding_window_view(padded, (3, 3), axis=(1, 2)).mean(axis=(-1, -2))


def _prototypes(rng, class_count, side):
    blobs = _smooth(rng.random((class_count, side, side)))
    low = blobs.min(axis=(1, 2), keepdims=True)
    spread = blobs.max(axis=(1, 2), keepdims=True) - low
    # a 1x1 image has no spread; it stays at zero
    return (blobs - low) / np.where(spread > 0, spread, 1.0)


_STROKE_DIRECTIONS = ((0, 1), (1, 0), (1, 1), (1, -1))


def _writer_stroke(rng, side):
    """A short straight stroke (length ``max(1, side // 4)``) at a random place."""
    length = max(1, side // 4)
    dr, dc = _STROKE_DIRECTIONS[int(rng.integers(len(_STROKE_DIRECTIONS)))]
    span = length - 1
    r0 = int(rng.integers(0, side - dr * span))
    c0 = int(rng.integers(max(0, -dc * span), side - max(0, dc * span)))
    steps = np.arange(length)
    mark = np.zeros((side, side))
    mark[r0 + dr * steps, c0 + dc * steps] = _STROKE_INTENSITY
    return mark


def generate_synthetic(seed, num_clients, samples_per_client, class_count=10, input_side=16):
    """Generate a learnable, non-iid federated image-classification dataset.

    Each class has one smoothed random prototype image. Each client applies a
    private style to every example it holds: an intensity bias in [-0.15, 0.15],
    a translation of at most one pixel per axis, and a writer stroke (a bright
    straight segment of ``input_side // 4`` pixels at a client-specific place and
    angle). Gaussian pixel noise (sd 0.1) is added and pixels are clamped to
    [0, 1]. Labels are balanced within every client. The holdout holds 20 unstyled
    examples per class.

    The stroke is what tells one writer's 7s from another's, so a backdoor on a
    few target writers can be learned without flipping the whole class.

    Parameters
    ----------
    seed : int
    num_clients : int
    samples_per_client : int
    class_count : int, optional (default=10)
    input_side : int, optional (default=16)

    Returns
    -------
    FederatedDataset"""
    if min(num_clients, samples_per_client, input_side) < 1:
        raise ConfigurationError("counts must be positive")
    if class_count < 2:
        raise ConfigurationError("class_count must be >= 2")
    rng = np.random.default_rng(seed)
    protos = _prototypes(rng, class_count, input_side)
    width = max(4, len(str(num_clients - 1)))

    clients = []
    for k in range(num_clients):
        bias = rng.uniform(-0.15, 0.15)
        shift = tuple(int(s) for s in rng.integers(-1, 2, size=2))
        stroke = _writer_stroke(rng, input_side)
        labels = np.arange(samples_per_client) % class_count
        rng.shuffle(labels)
        styled = np.roll(protos[labels], shift, axis=(1, 2)) + stroke + bias
        noisy = np.clip(styled + rng.normal(0.0, 0.1, size=styled.shape), 0.0, 1.0)
        clients.append(ClientDataset("client_{:0{}d}".format(k, width), ExampleSet(noisy, labels)))

    labels = np.repeat(np.arange(class_count), _HOLDOUT_PER_CLASS)
    noise = rng.normal(0.0, 0.1, size=(labels.size, input_side, input_side))
    holdout = np.clip(protos[labels] + noise, 0.0, 1.0)
    return FederatedDataset(
        tuple(clients), ExampleSet(holdout, labels), class_count, (input_side, input_side)
    )


# ------------------------------------------------------------------ backdoor


def choose_target_clients(fed, count, source_label, rng, min_examples=2, among=None):
    """Pick ``count`` target clients, uniformly among those holding at least
    ``min_examples`` examples of ``source_label``; returned in canonical order.

    ``among`` restricts the candidates to the given client ids (the federation's
    first K clients when only part of a dataset takes part)."""
    allowed = set(fed.client_ids if among is None else among)
    eligible = [
        c.client_id
        for c in fed.clients
        if c.client_id in allowed
        and int(np.sum(c.examples.labels == source_label)) >= min_examples
    ]
    if count > len(eligible):
        raise ConfigurationError(
            "asked for {} target clients but only {} hold >= {} examples of label {}".format(
                count, len(eligible), min_examples, source_label
            )
        )
    picks = rng.choice(len(eligible), size=count, replace=False)
    return tuple(sorted(eligible[i] for i in picks))


def build_backdoor_task(fed, spec, eval_fraction=0.2, attacker_clean_size=400, rng=None):
    """Relabel the target clients' ``source_label`` examples and split them.

    Target clients keep their correctly labeled originals. Each target client
    contributes ``max(1, floor(n * eval_fraction))`` of its n source examples
    (but never all of them) to ``mal_eval`` and the rest to ``mal_train``.
    ``attacker_clean`` is drawn uniformly without replacement, true labels kept,
    from all clients' examples except the target clients' source examples.

    Parameters
    ----------
    fed : FederatedDataset
    spec : BackdoorSpec
    eval_fraction : float, optional (default=0.2)
    attacker_clean_size : int, optional (default=400)
    rng : numpy.random.Generator

    Returns
    -------
    BackdoorTask

    Raises
    ------
    ConfigurationError
        A target client is unknown or holds fewer than two source examples."""
    if rng is None:
        raise ConfigurationError("build_backdoor_task needs a seeded generator")
    if not 0 < eval_fraction < 1:
        raise ConfigurationError("eval_fraction must lie in (0, 1)")
    if attacker_clean_size < 0:
        raise ConfigurationError("attacker_clean_size must be non-negative")
    for label in (spec.source_label, spec.target_label):
        if not 0 <= label < fed.class_count:
            raise ConfigurationError("label {} outside [0, {})".format(label, fed.class_count))

    known = set(fed.client_ids)
    train_parts, eval_parts = [], []
    for client_id in spec.target_client_ids:
        if client_id not in known:
            raise ConfigurationError("target client {!r} is not in the dataset".format(client_id))
        examples = fed.client(client_id).examples
        sources = np.flatnonzero(examples.labels == spec.source_label)
        if sources.size < 2:
            raise ConfigurationError(
                "target client {!r} holds {} examples of label {}; at least 2 are needed".format(
                    client_id, sources.size, spec.source_label
                )
            )
        n_eval = min(sources.size - 1, max(1, int(math.floor(sources.size * eval_fraction))))
        order = sources[rng.permutation(sources.size)]
        for part, picked in ((eval_parts, order[:n_eval]), (train_parts, order[n_eval:])):
            picked = np.sort(picked)
            part.append(
                ExampleSet(examples.inputs[picked], np.full(picked.size, spec.target_label))
            )

    # the target clients' correctly labeled source examples are the backdoor images
    # themselves; they stay out of the attacker's clean set
    pooled = fed.pooled()
    targets = set(spec.target_client_ids)
    excluded = np.concatenate(
        [
            (c.examples.labels == spec.source_label) & (c.client_id in targets)
            for c in fed.clients
        ]
    )
    candidates = np.flatnonzero(~excluded)
    size = min(attacker_clean_size, candidates.size)
    clean = pooled.take(np.sort(rng.choice(candidates, size=size, replace=False)))

    task = BackdoorTask(
        ExampleSet.concat(train_parts),
        ExampleSet.concat(eval_parts),
        clean,
        spec,
    )
    logger.info(
        "backdoor task: %d target clients, %d train / %d eval backdoor examples, %d clean",
        len(spec.target_client_ids),
        len(task.mal_train),
        len(task.mal_eval),
        len(task.attacker_clean),
    )
    return task
