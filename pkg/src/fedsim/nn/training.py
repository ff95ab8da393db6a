""" Forward pass, softmax cross-entropy gradient, and mini-batch SGD."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError, InvariantError
from .batch import ExampleSet

__all__ = ["TrainHyper", "forward", "loss_and_grad", "sgd_train", "predict"]


@dataclass(frozen=True)
class TrainHyper(object):
    """Local training hyperparameters.

    Attributes
    ----------
    epochs : int
        Passes over the data. Zero is accepted and means "no steps".
    batch_size : int
    learning_rate : float"""

    epochs: int = 5
    batch_size: int = 20
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.epochs < 0 or int(self.epochs) != self.epochs:
            raise ConfigurationError("epochs must be a non-negative integer")
        if self.batch_size < 1 or int(self.batch_size) != self.batch_size:
            raise ConfigurationError("batch_size must be a positive integer")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")


def _check_inputs(arch, examples):
    if examples.input_shape != tuple(arch.input_shape):
        raise ConfigurationError(
            "examples have shape {}, architecture expects {}".format(
                examples.input_shape, tuple(arch.input_shape)
            )
        )


def _forward_with_caches(params, arch, examples):
    _check_inputs(arch, examples)
    layer_params = arch.unflatten(params)
    x = examples.inputs[:, None, :, :]
    caches = []
    for layer, p in zip(arch.layers, layer_params):
        x, cache = layer.forward(x, p)
        caches.append(cache)
    return x, caches, layer_params


def forward(params, arch, batch):
    """Compute the logits of a batch.

    Parameters
    ----------
    params : numpy.ndarray, shape=(arch.param_count,)
    arch : fedsim.nn.ModelArch
    batch : fedsim.nn.ExampleSet

    Returns
    -------
    numpy.ndarray, shape=(N, arch.class_count)

    Raises
    ------
    ConfigurationError
        The parameter vector or the inputs do not match the architecture.
    InvariantError
        The logits are not finite."""
    logits, _, _ = _forward_with_caches(params, arch, batch)
    if not np.all(np.isfinite(logits)):
        raise InvariantError("forward pass produced non-finite logits")
    return logits


def predict(params, arch, examples, chunk=512):
    """Argmax class predictions; ties resolve to the lowest class index."""
    preds = []
    for start in range(0, len(examples), chunk):
        part = examples.take(np.arange(start, min(start + chunk, len(examples))))
        preds.append(forward(params, arch, part).argmax(axis=1))
    if not preds:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(preds)


def loss_and_grad(params, arch, batch):
    """Mean softmax cross-entropy of a batch and its gradient.

    Parameters
    ----------
    params : numpy.ndarray, shape=(arch.param_count,)
    arch : fedsim.nn.ModelArch
    batch : fedsim.nn.ExampleSet
        Must hold at least one example.

    Returns
    -------
    Tuple[float, numpy.ndarray]
        The loss and a gradient vector laid out like ``params``.

    Raises
    ------
    ConfigurationError
        Shape mismatch or empty batch."""
    if len(batch) < 1:
        raise ConfigurationError("loss_and_grad needs a non-empty batch")
    if np.any(batch.labels < 0) or np.any(batch.labels >= arch.class_count):
        raise ConfigurationError("labels must lie in [0, {})".format(arch.class_count))
    logits, caches, layer_params = _forward_with_caches(params, arch, batch)
    n = logits.shape[0]
    rows = np.arange(n)

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[rows, batch.labels]))

    probs = np.exp(shifted - log_norm[:, None])
    dout = probs
    dout[rows, batch.labels] -= 1.0
    dout /= n

    grads = [None] * len(arch.layers)
    for index in range(len(arch.layers) - 1, -1, -1):
        layer = arch.layers[index]
        dout, grads[index] = layer.backward(
            dout, layer_params[index], caches[index], need_dx=index > 0
        )
    flat = np.concatenate([g.ravel() for layer_grads in grads for g in layer_grads])
    if not (np.isfinite(loss) and np.all(np.isfinite(flat))):
        raise InvariantError("non-finite loss or gradient")
    return loss, flat


def sgd_train(params, arch, data, hyper, rng):
    """Plain mini-batch SGD.

    The data is reshuffled once per epoch with ``rng``; every epoch takes
    ``ceil(len(data) / batch_size)`` steps, the last batch possibly short.

    Parameters
    ----------
    params : numpy.ndarray
        Starting point. Not modified.
    arch : fedsim.nn.ModelArch
    data : fedsim.nn.ExampleSet
    hyper : TrainHyper
    rng : numpy.random.Generator

    Returns
    -------
    numpy.ndarray
        The trained parameter vector (a new array).

    Raises
    ------
    ConfigurationError
        ``data`` is empty.
    InvariantError
        Training diverged to non-finite values."""
    if len(data) < 1:
        raise ConfigurationError("sgd_train needs a non-empty example set")
    if not isinstance(data, ExampleSet):
        raise ConfigurationError("data must be an ExampleSet")
    weights = np.array(params, dtype=np.float64, copy=True)
    n = len(data)
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            batch = data.take(order[start : start + hyper.batch_size])
            _, grad = loss_and_grad(weights, arch, batch)
            weights -= hyper.learning_rate * grad
    if not np.all(np.isfinite(weights)):
        raise InvariantError("SGD produced non-finite parameters")
    return weights
