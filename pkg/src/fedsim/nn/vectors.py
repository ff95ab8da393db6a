""" Vector-space utilities over flat parameter vectors."""

import numpy as np

from ..exceptions import ConfigurationError

__all__ = ["l2_norm", "project_l2_ball"]


def l2_norm(v):
    """Euclidean norm of a parameter vector, as a Python float."""
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64)))


def project_l2_ball(point, center, radius):
    """Euclidean projection of ``point`` onto the l2 ball of ``radius`` around ``center``.

    Parameters
    ----------
    point : numpy.ndarray
    center : numpy.ndarray
        Same shape as ``point``.
    radius : float
        Non-negative.

    Returns
    -------
    numpy.ndarray
        ``point`` itself when it already lies in the ball, otherwise
        ``center + radius * (point - center) / ||point - center||``."""
    point = np.asarray(point, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    if point.shape != center.shape:
        raise ConfigurationError(
            "point {} and center {} differ in shape".format(point.shape, center.shape)
        )
    if radius < 0:
        raise ConfigurationError("radius must be non-negative")
    offset = point - center
    distance = l2_norm(offset)
    if distance <= radius:
        return point
    return center + offset * (radius / distance)
