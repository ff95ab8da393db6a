""" Tests attack schedules, the boost factor and malicious-update crafting."""

import numpy as np
import pytest
from scipy import stats

from fedsim.adversary import (
    AttackerConfig,
    FixedFrequency,
    NoAdversary,
    NormBounded,
    RandomSampling,
    Unconstrained,
    compute_boost_factor,
    craft_norm_bounded,
    craft_unconstrained,
    schedule_adversaries,
    split_among_attackers,
)
from fedsim.defense import clip_update
from fedsim.exceptions import ConfigurationError
from fedsim.federation import select_clients
from fedsim.nn import TrainHyper, init_params, l2_norm
from fedsim.seeding import make_rng


def ids(count):
    return ["client_{:04d}".format(k) for k in range(count)]


# ------------------------------------------------------------------ schedules


def test_no_adversary():
    assert schedule_adversaries(0, ids(5), NoAdversary(), np.random.default_rng(0)) == []


def test_fixed_frequency_slots():
    schedule = FixedFrequency(3)
    rng = np.random.default_rng(0)
    hits = [t for t in range(12) if schedule_adversaries(t, ids(30), schedule, rng) == [0]]
    assert hits == [0, 3, 6, 9]
    assert sum(len(schedule_adversaries(t, ids(30), schedule, rng)) for t in range(30)) == 10


@pytest.mark.parametrize(
    ("epsilon", "period"), [(0.033, 1), (0.011, 3), (0.0067, 5), (0.0033, 10)]
)
def test_fixed_frequency_from_epsilon(epsilon, period):
    assert FixedFrequency.from_epsilon(epsilon, 30).period == period


@pytest.mark.parametrize("period", [0, -2, 1.5])
def test_fixed_frequency_rejects_bad_period(period):
    with pytest.raises(ConfigurationError):
        FixedFrequency(period)


def test_schedule_needs_a_selection():
    with pytest.raises(ConfigurationError):
        schedule_adversaries(0, [], FixedFrequency(1), np.random.default_rng(0))


def test_random_sampling_slots():
    schedule = RandomSampling(0.5, frozenset(["b", "d"]))
    rng = np.random.default_rng(0)
    assert schedule_adversaries(4, ["a", "b", "c", "d"], schedule, rng) == [1, 3]
    assert schedule_adversaries(4, ["a", "c"], schedule, rng) == []


@pytest.mark.parametrize(("epsilon", "count"), [(0.033, 33), (0.011, 11), (0.0067, 6), (0.0033, 3)])
def test_random_sampling_compromised_count(epsilon, count):
    schedule = RandomSampling.from_epsilon(epsilon, ids(1000), np.random.default_rng(0))
    assert len(schedule.compromised_ids) == count
    assert schedule.compromised_ids <= set(ids(1000))


def test_random_sampling_count_override_and_describe():
    schedule = RandomSampling.from_epsilon(0.0334, ids(3383), np.random.default_rng(1), count=113)
    assert len(schedule.compromised_ids) == 113
    assert schedule.describe() == {
        "kind": "random_sampling",
        "epsilon": 0.0334,
        "compromised_count": 113,
    }


def test_random_sampling_counts_are_hypergeometric():
    total, compromised, per_round, rounds = 3383, 113, 30, 20000
    client_ids = ids(total)
    schedule = RandomSampling.from_epsilon(
        compromised / float(total), client_ids, make_rng(0, "compromised"), count=compromised
    )
    counts = []
    for t in range(rounds):
        selected = [client_ids[i] for i in select_clients(make_rng(0, t, "select"), total, per_round)]
        counts.append(len(schedule_adversaries(t, selected, schedule, make_rng(0, t, "schedule"))))
    counts = np.asarray(counts)

    law = stats.hypergeom(total, compromised, per_round)
    assert law.pmf(0) == pytest.approx(0.357, abs=0.005)
    expected = np.array([law.pmf(k) for k in range(5)] + [law.sf(4)]) * rounds
    observed = np.array([np.sum(counts == k) for k in range(5)] + [np.sum(counts >= 5)])
    assert stats.chisquare(observed, expected).pvalue > 0.01
    assert counts.mean() == pytest.approx(law.mean(), abs=0.05)
    assert np.mean(counts == 0) == pytest.approx(law.pmf(0), abs=0.02)


def test_schedules_describe_themselves():
    assert FixedFrequency(3).describe() == {"kind": "fixed_frequency", "period": 3}
    assert NoAdversary().describe() == {"kind": "none"}


# ------------------------------------------------------------------ crafting


def test_boost_factor():
    assert compute_boost_factor(1000, 1.0, 50) == 20.0
    assert compute_boost_factor(1000, 0.5, 50) == 40.0
    with pytest.raises(ConfigurationError):
        compute_boost_factor(0, 1.0, 50)
    with pytest.raises(ConfigurationError):
        compute_boost_factor(1000, 1.0, 0)


def test_unconstrained_craft_is_deterministic(tiny_arch, tiny_attacker):
    w = init_params(tiny_arch, np.random.default_rng(0))
    first = craft_unconstrained(w, tiny_arch, tiny_attacker, 4.0, 99)
    second = Unconstrained().craft(w, tiny_arch, tiny_attacker, 4.0, 99)
    assert first.tobytes() == second.tobytes()
    assert l2_norm(first) > 0


def test_unconstrained_craft_scales_with_beta(tiny_arch, tiny_attacker):
    w = init_params(tiny_arch, np.random.default_rng(0))
    one = craft_unconstrained(w, tiny_arch, tiny_attacker, 1.0, 5)
    ten = craft_unconstrained(w, tiny_arch, tiny_attacker, 10.0, 5)
    np.testing.assert_allclose(ten, 10.0 * one, rtol=1e-12, atol=1e-15)


def test_boost_below_one_is_rejected(tiny_arch, tiny_attacker):
    w = init_params(tiny_arch, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        craft_unconstrained(w, tiny_arch, tiny_attacker, 0.5, 0)
    with pytest.raises(ConfigurationError):
        craft_norm_bounded(w, tiny_arch, tiny_attacker, 1.0, 0.5, 0)


@pytest.mark.parametrize("bound", [0.01, 0.3, 2.0])
def test_norm_bounded_craft_stays_within_bound(tiny_arch, tiny_attacker, bound):
    w = init_params(tiny_arch, np.random.default_rng(1))
    delta = craft_norm_bounded(w, tiny_arch, tiny_attacker, bound, 7.0, 3, pgd_rounds=3)
    assert l2_norm(delta) <= bound
    assert clip_update(delta, bound) is delta


def test_single_inactive_projection_matches_unconstrained(tiny_arch, tiny_attacker):
    w = init_params(tiny_arch, np.random.default_rng(2))
    free = craft_unconstrained(w, tiny_arch, tiny_attacker, 3.0, 8)
    bounded = craft_norm_bounded(w, tiny_arch, tiny_attacker, 1e6, 3.0, 8, pgd_rounds=1)
    np.testing.assert_array_equal(bounded, free)


def test_norm_bounded_variant_uses_its_rounds(tiny_arch, tiny_task):
    w = init_params(tiny_arch, np.random.default_rng(3))
    variant = NormBounded(0.2, pgd_rounds=2)
    cfg = AttackerConfig(tiny_task, variant, TrainHyper(1, 10, 0.1))
    via_variant = variant.craft(w, tiny_arch, cfg, 5.0, 4)
    direct = craft_norm_bounded(w, tiny_arch, cfg, 0.2, 5.0, 4, pgd_rounds=2)
    assert via_variant.tobytes() == direct.tobytes()
    assert craft_norm_bounded(w, tiny_arch, cfg, 0.2, 5.0, 4).tobytes() == direct.tobytes()


def test_norm_bounded_validation():
    with pytest.raises(ConfigurationError):
        NormBounded(0.0)
    with pytest.raises(ConfigurationError):
        NormBounded(1.0, pgd_rounds=0)


def test_split_among_attackers():
    total = np.array([3.0, -6.0, 9.0])
    pieces = split_among_attackers(total, 3)
    assert len(pieces) == 3
    for piece in pieces:
        np.testing.assert_allclose(piece, [1.0, -2.0, 3.0])
    np.testing.assert_allclose(sum(pieces), total)
    assert split_among_attackers(total, 1)[0].tobytes() == total.tobytes()
    with pytest.raises(ConfigurationError):
        split_among_attackers(total, 0)


def test_attacker_config_validation(tiny_task):
    with pytest.raises(ConfigurationError):
        AttackerConfig(tiny_task, reported_num_samples=0)
    with pytest.raises(ConfigurationError):
        AttackerConfig(tiny_task, estimated_sum_n=0)
    assert isinstance(AttackerConfig(tiny_task).variant, Unconstrained)
