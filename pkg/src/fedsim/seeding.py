""" Seed derivation.

    Every random draw in a simulation comes from a generator whose seed is a pure
    function of the experiment's root seed and a tuple of keys (round index, client id,
    purpose). Results therefore never depend on the order in which work is scheduled."""

import hashlib

import numpy as np

__all__ = ["derive_seed", "make_rng"]


def derive_seed(root, *keys):
    """Hash a root seed and a sequence of keys into a 64-bit seed.

    Parameters
    ----------
    root : int
        The experiment's root seed.
    *keys : Union[int, str]
        Purpose keys, e.g. ``(t, "select")`` or ``(t, client_id)``.

    Returns
    -------
    int
        A seed in ``[0, 2**64)``."""
    material = ":".join([str(int(root))] + [repr(key) for key in keys])
    digest = hashlib.blake2b(material.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(root, *keys):
    """Return a ``numpy.random.Generator`` seeded with ``derive_seed(root, *keys)``."""
    return np.random.default_rng(derive_seed(root, *keys))
