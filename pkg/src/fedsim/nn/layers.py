""" Layer descriptors with their forward and backward passes.

    A layer is a frozen description (kernel size, widths, activation). It owns no
    parameters: weights are views into a flat parameter vector handed in by
    `fedsim.nn.arch.ModelArch`. Activations use channel-first layout (N, C, H, W)."""

from abc import abstractmethod
from dataclasses import dataclass

import numpy as np
from custom_inherit import DocInheritMeta
from numpy.lib.stride_tricks import sliding_window_view

__all__ = ["Layer", "Conv2D", "MaxPool2D", "Dense"]


def _relu(z):
    return np.maximum(z, 0.0)


class Layer(metaclass=DocInheritMeta(style="numpy_with_merge", abstract_base_class=True)):
    """A fixed-shape network layer.

    Methods
    -------
    param_shapes(in_shape)
    output_shape(in_shape)
    fans(in_shape)
    forward(x, params)
    backward(dout, params, cache, need_dx)"""

    def param_shapes(self, in_shape):
        """The shapes of this layer's parameter arrays, in flat-vector order.

        Parameters
        ----------
        in_shape : Tuple[int, ...]
            Per-example input shape (no batch axis).

        Returns
        -------
        List[Tuple[int, ...]]"""
        return []

    @abstractmethod
    def output_shape(self, in_shape):
        """Per-example output shape for a given per-example input shape.

        Parameters
        ----------
        in_shape : Tuple[int, ...]

        Returns
        -------
        Tuple[int, ...]"""

    def fans(self, in_shape):
        """(fan_in, fan_out) used by Glorot-uniform initialization, or None for
        parameter-free layers.

        Parameters
        ----------
        in_shape : Tuple[int, ...]

        Returns
        -------
        Optional[Tuple[int, int]]"""
        return None

    @abstractmethod
    def forward(self, x, params):
        """Apply the layer to a batch.

        Parameters
        ----------
        x : numpy.ndarray
            Batch of inputs, batch axis first.
        params : List[numpy.ndarray]
            This layer's parameter arrays, shaped as `param_shapes` says.

        Returns
        -------
        Tuple[numpy.ndarray, Any]
            The output batch and a cache consumed by `backward`."""

    @abstractmethod
    def backward(self, dout, params, cache, need_dx=True):
        """Back-propagate the gradient of a scalar loss through the layer.

        Parameters
        ----------
        dout : numpy.ndarray
            Gradient of the loss with respect to this layer's output.
        params : List[numpy.ndarray]
        cache : Any
            The cache returned by `forward`.
        need_dx : bool, optional (default=True)
            If False, the input gradient is not computed and None is returned in
            its place.

        Returns
        -------
        Tuple[Optional[numpy.ndarray], List[numpy.ndarray]]
            Gradient with respect to the input, and one gradient per parameter array."""


@dataclass(frozen=True)
class Conv2D(Layer):
    """Valid (unpadded), stride-1 2D convolution followed by an optional ReLU."""

    filters: int
    kernel: int = 3
    relu: bool = True

    def param_shapes(self, in_shape):
        channels = in_shape[0]
        return [(self.filters, channels, self.kernel, self.kernel), (self.filters,)]

    def output_shape(self, in_shape):
        _, height, width = in_shape
        return (self.filters, height - self.kernel + 1, width - self.kernel + 1)

    def fans(self, in_shape):
        area = self.kernel * self.kernel
        return in_shape[0] * area, self.filters * area

    def forward(self, x, params):
        weight, bias = params
        windows = sliding_window_view(x, (self.kernel, self.kernel), axis=(2, 3))
        z = np.einsum("nchwij,fcij->nfhw", windows, weight, optimize=True)
        z += bias[None, :, None, None]
        out = _relu(z) if self.relu else z
        return out, (x, z)

    def backward(self, dout, params, cache, need_dx=True):
        weight, _ = params
        x, z = cache
        dz = dout * (z > 0) if self.relu else dout
        windows = sliding_window_view(x, (self.kernel, self.kernel), axis=(2, 3))
        dweight = np.einsum("nchwij,nfhw->fcij", windows, dz, optimize=True)
        dbias = dz.sum(axis=(0, 2, 3))
        if not need_dx:
            return None, [dweight, dbias]

        # full correlation of dz with the flipped kernel
        pad = self.kernel - 1
        padded = np.pad(dz, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        dwindows = sliding_window_view(padded, (self.kernel, self.kernel), axis=(2, 3))
        dx = np.einsum(
            "nfhwij,fcij->nchw", dwindows, weight[:, :, ::-1, ::-1], optimize=True
        )
        return dx, [dweight, dbias]


@dataclass(frozen=True)
class MaxPool2D(Layer):
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window
    are dropped. Ties route the gradient to the first maximal element."""

    size: int = 2

    def output_shape(self, in_shape):
        channels, height, width = in_shape
        return (channels, height // self.size, width // self.size)

    def forward(self, x, params):
        n, c, height, width = x.shape
        s = self.size
        ho, wo = height // s, width // s
        blocks = (
            x[:, :, : ho * s, : wo * s]
            .reshape(n, c, ho, s, wo, s)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, ho, wo, s * s)
        )
        argmax = blocks.argmax(axis=-1)
        out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
        return out, (x.shape, argmax)

    def backward(self, dout, params, cache, need_dx=True):
        if not need_dx:
            return None, []
        (n, c, height, width), argmax = cache
        s = self.size
        ho, wo = dout.shape[2:]
        blocks = np.zeros((n, c, ho, wo, s * s))
        np.put_along_axis(blocks, argmax[..., None], dout[..., None], axis=-1)
        dx = np.zeros((n, c, height, width))
        dx[:, :, : ho * s, : wo * s] = (
            blocks.reshape(n, c, ho, wo, s, s)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, ho * s, wo * s)
        )
        return dx, []


@dataclass(frozen=True)
class Dense(Layer):
    """Fully connected layer over the flattened input, with an optional ReLU."""

    units: int
    relu: bool = True

    def param_shapes(self, in_shape):
        return [(int(np.prod(in_shape)), self.units), (self.units,)]

    def output_shape(self, in_shape):
        return (self.units,)

    def fans(self, in_shape):
        return int(np.prod(in_shape)), self.units

    def forward(self, x, params):
        weight, bias = params
        flat = x.reshape(x.shape[0], -1)
        z = flat @ weight + bias
        out = _relu(z) if self.relu else z
        return out, (x.shape, flat, z)

    def backward(self, dout, params, cache, need_dx=True):
        weight, _ = params
        in_shape, flat, z = cache
        dz = dout * (z > 0) if self.relu else dout
        grads = [flat.T @ dz, dz.sum(axis=0)]
        if not need_dx:
            return None, grads
        return (dz @ weight.T).reshape(in_shape), grads
