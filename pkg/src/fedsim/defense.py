""" Server-side defenses: per-update norm clipping, norm thresholding, and Gaussian
    noise on the aggregate ("weak" differential privacy).

    A defense acts at two points of aggregation: `Defense.process_update` sees every
    client delta before weighting, `Defense.process_aggregate` sees the weighted mean."""

import logging
from abc import abstractmethod
from dataclasses import dataclass

import numpy as np
from custom_inherit import DocInheritMeta

from .exceptions import ConfigurationError
from .nn.vectors import l2_norm

__all__ = [
    "clip_update",
    "add_gaussian_noise",
    "Defense",
    "DefenseConfig",
    "NoDefense",
    "NormClip",
    "ClipAndNoise",
    "NormThreshold",
]

logger = logging.getLogger(__name__)


def clip_update(delta, norm_bound):
    """Scale ``delta`` down to norm ``norm_bound`` if it is longer.

    Parameters
    ----------
    delta : numpy.ndarray
    norm_bound : float
        Positive threshold M.

    Returns
    -------
    numpy.ndarray
        ``delta / max(1, ||delta|| / M)``. Updates already within the bound are
        returned as-is."""
    if not norm_bound > 0:
        raise ConfigurationError("norm bound must be positive")
    norm = l2_norm(delta)
    if norm <= norm_bound:
        return delta
    return delta * (norm_bound / norm)


def add_gaussian_noise(delta, sigma, rng):
    """Add i.i.d. N(0, sigma^2) noise to every coordinate.

    Parameters
    ----------
    delta : numpy.ndarray
    sigma : float
        Per-coordinate standard deviation. Zero returns ``delta`` unchanged.
    rng : numpy.random.Generator

    Returns
    -------
    numpy.ndarray"""
    if sigma < 0:
        raise ConfigurationError("sigma must be non-negative")
    if sigma == 0:
        return delta
    return delta + rng.normal(0.0, sigma, size=np.shape(delta))


class Defense(metaclass=DocInheritMeta(style="numpy_with_merge", abstract_base_class=True)):
    """A server-side mitigation applied during aggregation."""

    kind = None

    @abstractmethod
    def process_update(self, delta):
        """Transform one client delta before weighting.

        Parameters
        ----------
        delta : numpy.ndarray

        Returns
        -------
        Optional[numpy.ndarray]
            The delta to aggregate, or None to drop the update."""

    def process_aggregate(self, delta, rng):
        """Transform the weighted mean of the surviving deltas.

        Parameters
        ----------
        delta : numpy.ndarray
        rng : numpy.random.Generator
            The round's noise generator.

        Returns
        -------
        numpy.ndarray"""
        return delta

    def describe(self):
        out = {"kind": self.kind}
        out.update(self.__dict__)
        return out


@dataclass(frozen=True)
class NoDefense(Defense):
    """Plain federated averaging."""

    kind = "none"

    def process_update(self, delta):
        return delta


def _check_bound(norm_bound):
    if not norm_bound > 0:
        raise ConfigurationError("norm_bound must be positive, got {}".format(norm_bound))


@dataclass(frozen=True)
class NormClip(Defense):
    """Rescale every update to norm at most ``norm_bound``."""

    kind = "norm_clip"

    norm_bound: float

    def __post_init__(self):
        _check_bound(self.norm_bound)

    def process_update(self, delta):
        return clip_update(delta, self.norm_bound)


@dataclass(frozen=True)
class ClipAndNoise(NormClip):
    """Clip every update, then add Gaussian noise with per-coordinate standard
    deviation ``sigma`` to the weighted mean."""

    kind = "clip_and_noise"

    sigma: float = 0.0

    def __post_init__(self):
        super(ClipAndNoise, self).__post_init__()
        if self.sigma < 0:
            raise ConfigurationError("sigma must be non-negative, got {}".format(self.sigma))

    def process_aggregate(self, delta, rng):
        return add_gaussian_noise(delta, self.sigma, rng)


@dataclass(frozen=True)
class NormThreshold(Defense):
    """Drop any update whose norm exceeds ``norm_bound``."""

    kind = "norm_threshold"

    norm_bound: float

    def __post_init__(self):
        _check_bound(self.norm_bound)

    def process_update(self, delta):
        norm = l2_norm(delta)
        if norm > self.norm_bound:
            logger.debug("rejecting update with norm %.4g > %.4g", norm, self.norm_bound)
            return None
        return delta


# The configuration of a defense is the defense object itself.
DefenseConfig = Defense
