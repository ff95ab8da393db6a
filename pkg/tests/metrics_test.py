import math

import numpy as np
import pytest

from fedsim.exceptions import ConfigurationError
from fedsim.metrics import (
    CSV_COLUMNS,
    RoundReport,
    cumulative_mean,
    evaluate_backdoor,
    evaluate_main,
    recommend_norm_bound,
    summarize_norms,
)
from fedsim.nn import ExampleSet, ModelArch, TrainHyper, init_params, sgd_train


def report(t, backdoor=0.0, p90=1.0, attacker_norm=None):
    return RoundReport(t, 0.5, backdoor, backdoor, 0, 0.5 * p90, p90, attacker_norm)


def test_cumulative_mean():
    np.testing.assert_allclose(cumulative_mean([1.0, 0.0, 1.0, 1.0]), [1.0, 0.5, 2 / 3.0, 0.75])
    assert cumulative_mean([]) == []


def test_cumulative_mean_of_constant_series():
    assert cumulative_mean([0.25] * 7) == [0.25] * 7


def test_summarize_norms():
    p50, p90 = summarize_norms(list(range(1, 11)))
    assert p50 == pytest.approx(5.5)
    assert p90 == pytest.approx(9.1)
    assert all(math.isnan(v) for v in summarize_norms([]))


def test_report_columns_and_row():
    row = RoundReport(3, 0.875, 0.1, 0.05, 1, 0.25, 0.5, 12.5).as_row()
    assert len(row) == len(CSV_COLUMNS)
    assert CSV_COLUMNS[0] == "round"
    assert row == ["3", "0.875", "0.1", "0.05", "1", "0.25", "0.5", "12.5"]


def test_report_row_marks_missing_values_as_nan():
    row = RoundReport(0, 1.0, 0.0, 0.0, 0, math.nan, math.nan).as_row()
    assert row[-3:] == ["nan", "nan", "nan"]


@pytest.mark.parametrize("bad", [-0.1, 1.5])
def test_report_rejects_accuracy_out_of_range(bad):
    with pytest.raises(ConfigurationError):
        RoundReport(0, bad, 0.0, 0.0, 0, 1.0, 1.0)


def test_zero_model_predicts_first_class():
    arch = ModelArch.mlp_small(10, (4, 4))
    holdout = ExampleSet(np.random.default_rng(0).random((8, 4, 4)), [0, 0, 1, 2, 3, 0, 5, 6])
    assert evaluate_main(np.zeros(arch.param_count), arch, holdout) == 0.375


def test_backdoor_accuracy_counts_target_predictions():
    arch = ModelArch.mlp_small(10, (4, 4))
    params = np.zeros(arch.param_count)
    # bias of the logit for class 1
    params[-10 + 1] = 1.0
    mal_eval = ExampleSet(np.zeros((4, 4, 4)), [1, 1, 1, 1])
    assert evaluate_backdoor(params, arch, mal_eval) == 1.0
    assert evaluate_backdoor(np.zeros(arch.param_count), arch, mal_eval) == 0.0


def test_evaluation_rejects_empty_sets():
    arch = ModelArch.mlp_small(10, (4, 4))
    empty = ExampleSet.empty((4, 4))
    with pytest.raises(ConfigurationError):
        evaluate_main(np.zeros(arch.param_count), arch, empty)
    with pytest.raises(ConfigurationError):
        evaluate_backdoor(np.zeros(arch.param_count), arch, empty)


def test_recommend_norm_bound():
    reports = [report(t, p90=p) for t, p in enumerate([9.0, 8.0, 2.0, 2.0, 3.0, 4.0])]
    # the first half is skipped; median of [2, 3, 4] is 3
    assert recommend_norm_bound(reports) == pytest.approx(4.5)
    assert recommend_norm_bound(reports, factor=1.0, skip=0.0) == pytest.approx(3.5)


def test_recommend_norm_bound_needs_benign_rounds():
    with pytest.raises(ConfigurationError):
        recommend_norm_bound([report(0, p90=math.nan)], skip=0.0)


def test_zero_model_on_balanced_holdout():
    arch = ModelArch.mlp_small(10, (4, 4))
    rng = np.random.default_rng(1)
    holdout = ExampleSet(rng.random((50, 4, 4)), np.arange(50) % 10)
    assert evaluate_main(np.zeros(arch.param_count), arch, holdout) == pytest.approx(0.1)
    missed = ExampleSet(rng.random((1, 4, 4)), [4])
    assert evaluate_main(np.zeros(arch.param_count), arch, missed) == 0.0


def test_fitted_model_scores_perfectly():
    arch = ModelArch.mlp_small(10, (4, 4))
    rng = np.random.default_rng(2)
    data = ExampleSet(rng.random((3, 4, 4)), [2, 5, 9])
    params = init_params(arch, rng)
    for _ in range(500):
        params = sgd_train(params, arch, data, TrainHyper(10, 3, 0.1), rng)
        if evaluate_main(params, arch, data) == 1.0:
            break
    assert evaluate_main(params, arch, data) == 1.0
