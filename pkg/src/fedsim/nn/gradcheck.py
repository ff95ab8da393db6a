""" Central finite-difference check of `loss_and_grad`."""

import numpy as np

from .training import loss_and_grad

__all__ = ["gradient_check", "gradcheck_suite", "relative_error"]


def relative_error(analytic, numeric, floor=1e-5):
    """``|a - n| / max(|a|, |n|, floor)``, elementwise."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def gradient_check(arch, params, batch, coords=None, step=1e-5):
    """Compare the analytic gradient against central differences.

    Parameters
    ----------
    arch : fedsim.nn.ModelArch
    params : numpy.ndarray
    batch : fedsim.nn.ExampleSet
    coords : Optional[Sequence[int]]
        Coordinates to check; all coordinates when None.
    step : float, optional (default=1e-5)

    Returns
    -------
    float
        The maximum relative error over the checked coordinates."""
    params = np.array(params, dtype=np.float64)
    _, grad = loss_and_grad(params, arch, batch)
    if coords is None:
        coords = np.arange(params.size)
    numeric = np.empty(len(coords))
    for k, i in enumerate(coords):
        saved = params[i]
        params[i] = saved + step
        plus, _ = loss_and_grad(params, arch, batch)
        params[i] = saved - step
        minus, _ = loss_and_grad(params, arch, batch)
        params[i] = saved
        numeric[k] = (plus - minus) / (2.0 * step)
    return float(relative_error(grad[np.asarray(coords)], numeric).max())


def gradcheck_suite(seed=0, coords=200, batch_size=5, input_side=8):
    """Run `gradient_check` on the small MLP and on a reduced (1-filter, 4-unit) CNN.

    Parameters are Glorot-initialized and then jittered so that biases are non-zero.

    Returns
    -------
    Dict[str, float]
        Maximum relative error per architecture."""
    from .arch import ModelArch, init_params
    from .batch import Batch

    rng = np.random.default_rng(seed)
    shape = (input_side, input_side)
    archs = {
        "mlp_small": ModelArch.mlp_small(10, shape),
        "cnn_emnist_reduced": ModelArch.cnn_emnist(10, shape, filters=(1, 1), hidden=4),
    }
    batch = Batch(rng.random((batch_size,) + shape), rng.integers(0, 10, size=batch_size))
    results = {}
    for name, arch in archs.items():
        params = init_params(arch, rng) + rng.normal(0.0, 0.05, size=arch.param_count)
        picked = rng.choice(arch.param_count, size=min(coords, arch.param_count), replace=False)
        results[name] = gradient_check(arch, params, batch, picked)
    return results
