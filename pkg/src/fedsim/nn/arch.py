""" Fixed model architectures over flat parameter vectors.

    Parameters of every layer are laid out back to back in one float64 vector, in
    layer order, weights before biases, each array in C order. The parameter count is
    a function of the layer descriptors and the input shape alone."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..exceptions import ConfigurationError
from .layers import Conv2D, Dense, Layer, MaxPool2D

__all__ = ["CNN_EMNIST", "MLP_SMALL", "ModelArch", "param_count", "init_params"]

CNN_EMNIST = "cnn_emnist"
MLP_SMALL = "mlp_small"


@dataclass(frozen=True)
class ModelArch(object):
    """A fixed feed-forward architecture.

    Attributes
    ----------
    variant : str
        ``"cnn_emnist"`` or ``"mlp_small"``.
    layers : Tuple[Layer, ...]
        Layer descriptors, input to logits.
    input_shape : Tuple[int, int]
        (height, width) of a single-channel input image.
    class_count : int
        Width of the final (linear) layer."""

    variant: str
    layers: Tuple[Layer, ...]
    input_shape: Tuple[int, int]
    class_count: int

    def __post_init__(self):
        if self.variant not in (CNN_EMNIST, MLP_SMALL):
            raise ConfigurationError("unknown architecture: {!r}".format(self.variant))
        if self.class_count < 2:
            raise ConfigurationError("class_count must be >= 2")
        shape = self.first_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            if min(shape) < 1:
                raise ConfigurationError(
                    "input shape {} is too small for {}".format(self.input_shape, layer)
                )
        if shape != (self.class_count,):
            raise ConfigurationError(
                "the last layer must emit {} logits, got shape {}".format(
                    self.class_count, shape
                )
            )

    @classmethod
    def cnn_emnist(cls, class_count=10, input_shape=(28, 28), filters=(32, 64), hidden=128):
        """conv(3x3, ReLU) -> conv(3x3, ReLU) -> maxpool(2x2) -> dense(ReLU) -> dense(logits).

        Parameters
        ----------
        class_count : int, optional (default=10)
        input_shape : Tuple[int, int], optional (default=(28, 28))
        filters : Tuple[int, int], optional (default=(32, 64))
            Channel counts of the two convolutions.
        hidden : int, optional (default=128)
            Width of the hidden dense layer.

        Returns
        -------
        ModelArch"""
        first, second = filters
        layers = (
            Conv2D(first),
            Conv2D(second),
            MaxPool2D(2),
            Dense(hidden),
            Dense(class_count, relu=False),
        )
        return cls(CNN_EMNIST, layers, tuple(input_shape), class_count)

    @classmethod
    def mlp_small(cls, class_count=10, input_shape=(28, 28), hidden=64):
        """dense(hidden, ReLU) -> dense(logits)."""
        layers = (Dense(hidden), Dense(class_count, relu=False))
        return cls(MLP_SMALL, layers, tuple(input_shape), class_count)

    @property
    def first_shape(self):
        height, width = self.input_shape
        return (1, height, width)

    def layer_specs(self):
        """Yield ``(layer, in_shape, param_shapes)`` for every layer, in order."""
        shape = self.first_shape
        for layer in self.layers:
            yield layer, shape, layer.param_shapes(shape)
            shape = layer.output_shape(shape)

    @property
    def param_count(self):
        return sum(
            int(np.prod(s)) for _, _, shapes in self.layer_specs() for s in shapes
        )

    def unflatten(self, params):
        """Split a flat parameter vector into per-layer lists of array views.

        Parameters
        ----------
        params : numpy.ndarray, shape=(param_count,)

        Returns
        -------
        List[List[numpy.ndarray]]

        Raises
        ------
        ConfigurationError
            The vector's length does not match the architecture."""
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.param_count,):
            raise ConfigurationError(
                "parameter vector has shape {}, architecture {} expects ({},)".format(
                    params.shape, self.variant, self.param_count
                )
            )
        out, offset = [], 0
        for _, _, shapes in self.layer_specs():
            arrays = []
            for shape in shapes:
                size = int(np.prod(shape))
                arrays.append(params[offset : offset + size].reshape(shape))
                offset += size
            out.append(arrays)
        return out

    def describe(self):
        return {
            "variant": self.variant,
            "input_shape": list(self.input_shape),
            "class_count": self.class_count,
            "layers": [repr(layer) for layer in self.layers],
            "param_count": self.param_count,
        }


def param_count(arch):
    return arch.param_count


def init_params(arch, rng):
    """Glorot-uniform weights, zero biases.

    Each weight array is drawn uniformly from ``[-s, s]`` with
    ``s = sqrt(6 / (fan_in + fan_out))``.

    Parameters
    ----------
    arch : ModelArch
    rng : numpy.random.Generator

    Returns
    -------
    numpy.ndarray, shape=(arch.param_count,)"""
    chunks = []
    for layer, in_shape, shapes in arch.layer_specs():
        if not shapes:
            continue
        fan_in, fan_out = layer.fans(in_shape)
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weight_shape, bias_shape = shapes
        chunks.append(rng.uniform(-limit, limit, size=weight_shape).ravel())
        chunks.append(np.zeros(bias_shape).ravel())
    return np.concatenate(chunks)
