""" Labeled example containers shared by the training core and the data layer."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError

__all__ = ["ExampleSet", "Batch"]


@dataclass(frozen=True, eq=False)
class ExampleSet(object):
    """An immutable set of labeled images.

    Attributes
    ----------
    inputs : numpy.ndarray, shape=(N, H, W)
        Pixel intensities in [0, 1], stored as float64.
    labels : numpy.ndarray, shape=(N,)
        Integer class ids, stored as int64."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if inputs.ndim != 3:
            raise ConfigurationError(
                "inputs must have shape (N, H, W), got {}".format(inputs.shape)
            )
        if labels.shape != (inputs.shape[0],):
            raise ConfigurationError(
                "labels shape {} does not match {} inputs".format(
                    labels.shape, inputs.shape[0]
                )
            )
        inputs.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def input_shape(self):
        return tuple(self.inputs.shape[1:])

    @classmethod
    def empty(cls, input_shape):
        return cls(np.zeros((0,) + tuple(input_shape)), np.zeros(0, dtype=np.int64))

    def take(self, indices):
        """Return the examples at ``indices`` (in that order) as a new set."""
        indices = np.asarray(indices, dtype=np.int64)
        return type(self)(self.inputs[indices], self.labels[indices])

    def as_batch(self):
        return Batch(self.inputs, self.labels)

    @classmethod
    def concat(cls, parts, input_shape=None):
        """Concatenate example sets in the given order.

        Parameters
        ----------
        parts : Sequence[ExampleSet]
        input_shape : Optional[Tuple[int, int]]
            Required only when ``parts`` is empty."""
        parts = list(parts)
        if not parts:
            if input_shape is None:
                raise ConfigurationError("cannot infer the input shape of an empty concat")
            return cls.empty(input_shape)
        return cls(
            np.concatenate([p.inputs for p in parts], axis=0),
            np.concatenate([p.labels for p in parts], axis=0),
        )

    def same_as(self, other):
        """Exact, value-wise equality."""
        return (
            self.inputs.shape == other.inputs.shape
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.labels, other.labels)
        )


class Batch(ExampleSet):
    """A non-empty `ExampleSet` fed to a single forward/backward pass."""

    def __post_init__(self):
        super(Batch, self).__post_init__()
        if len(self) < 1:
            raise ConfigurationError("a batch must contain at least one example")
