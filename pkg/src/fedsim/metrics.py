""" Per-round evaluation metrics and the `RoundReport` row."""

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError
from .nn.training import predict

__all__ = [
    "RoundReport",
    "CSV_COLUMNS",
    "evaluate_main",
    "evaluate_backdoor",
    "cumulative_mean",
    "summarize_norms",
    "recommend_norm_bound",
]

CSV_COLUMNS = (
    "round",
    "main_acc",
    "backdoor_acc",
    "backdoor_cummean",
    "adversary_count",
    "benign_norm_p50",
    "benign_norm_p90",
    "attacker_norm",
)


@dataclass(frozen=True)
class RoundReport(object):
    """Metrics of one federated round, measured on the post-aggregation model.

    ``attacker_norm`` is the l2 norm of one submitted adversarial update, or None in
    rounds without adversaries. Benign norm percentiles are taken before any
    defense is applied and are NaN when every slot was adversarial."""

    round: int
    main_acc: float
    backdoor_acc: float
    backdoor_cummean: float
    adversary_count: int
    benign_norm_p50: float
    benign_norm_p90: float
    attacker_norm: Optional[float] = None

    def __post_init__(self):
        for name in ("main_acc", "backdoor_acc", "backdoor_cummean"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError("{} must lie in [0, 1], got {}".format(name, value))

    def as_row(self):
        """CSV cells in `CSV_COLUMNS` order; floats in shortest round-trip form."""

        def cell(value):
            if value is None:
                return "nan"
            if isinstance(value, float):
                return repr(value)
            return str(value)

        return [cell(getattr(self, f.name)) for f in fields(self)]


def evaluate_main(params, arch, holdout):
    """Fraction of ``holdout`` classified correctly (ties go to the lowest class).

    Raises
    ------
    ConfigurationError
        ``holdout`` is empty."""
    if len(holdout) < 1:
        raise ConfigurationError("main-task holdout is empty")
    return float(np.mean(predict(params, arch, holdout) == holdout.labels))


def evaluate_backdoor(params, arch, mal_eval):
    """Fraction of ``mal_eval`` inputs predicted as the attacker's target label.

    ``mal_eval`` carries the target label on every example, so this is its accuracy.

    Raises
    ------
    ConfigurationError
        ``mal_eval`` is empty."""
    if len(mal_eval) < 1:
        raise ConfigurationError("backdoor evaluation set is empty")
    return float(np.mean(predict(params, arch, mal_eval) == mal_eval.labels))


def cumulative_mean(series):
    """``out[i] = mean(series[: i + 1])``."""
    out, total = [], 0.0
    for i, value in enumerate(series):
        total += value
        out.append(total / (i + 1))
    return out


def summarize_norms(norms):
    """(median, 90th percentile) of a collection of norms; NaNs when empty."""
    if len(norms) == 0:
        return math.nan, math.nan
    p50, p90 = np.percentile(np.asarray(norms, dtype=np.float64), [50, 90])
    return float(p50), float(p90)


def recommend_norm_bound(reports, factor=1.5, skip=0.5):
    """Suggest a clipping threshold from an unattacked run.

    Parameters
    ----------
    reports : Sequence[RoundReport]
    factor : float, optional (default=1.5)
        Multiplier on the benign 90th-percentile norm.
    skip : float, optional (default=0.5)
        Leading fraction of rounds ignored, so early large updates do not dominate.

    Returns
    -------
    float"""
    tail = [r.benign_norm_p90 for r in reports[int(len(reports) * skip):]]
    tail = [v for v in tail if not math.isnan(v)]
    if not tail:
        raise ConfigurationError("no benign norm statistics to recommend a bound from")
    return factor * float(np.median(tail))
