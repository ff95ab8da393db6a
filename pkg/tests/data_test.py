""" Tests LEAF ingestion, the synthetic generator and backdoor-task construction."""

import json

import numpy as np
import pytest

from fedsim.data import (
    BackdoorSpec,
    ClientDataset,
    FederatedDataset,
    build_backdoor_task,
    choose_target_clients,
    generate_synthetic,
    load_leaf_json,
    write_leaf_json,
)
from fedsim.exceptions import ConfigurationError, IngestionError
from fedsim.nn import ExampleSet, ModelArch, TrainHyper, init_params, predict, sgd_train


def leaf_payload(users, per_user=4, pixels=4, scale=255, seed=0):
    rng = np.random.default_rng(seed)
    data = {}
    for u in users:
        x = (rng.random((per_user, pixels)) * scale).round(6).tolist()
        y = [int(v) for v in rng.integers(0, 10, size=per_user)]
        data[u] = {"x": x, "y": y}
    return {"users": list(users), "num_samples": [per_user] * len(users), "user_data": data}


def dump(tmp_path, payload, name="leaf.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def client(client_id, labels, rng, side=2):
    labels = np.asarray(labels)
    return ClientDataset(client_id, ExampleSet(rng.random((labels.size, side, side)), labels))


def federation(clients, side=2):
    holdout = ExampleSet(np.zeros((1, side, side)), [0])
    return FederatedDataset(tuple(clients), holdout, 10, (side, side))


# ------------------------------------------------------------------ LEAF


def test_leaf_load_sorts_and_scales(tmp_path):
    payload = leaf_payload(["writer_b", "writer_a"], per_user=4)
    fed = load_leaf_json(dump(tmp_path, payload), holdout_fraction=0.25)
    assert fed.client_ids == ["writer_a", "writer_b"]
    assert fed.input_shape == (2, 2)
    assert [c.num_samples for c in fed.clients] == [3, 3]
    assert len(fed.holdout_main) == 2

    raw = np.asarray(payload["user_data"]["writer_a"]["x"][:3]) / 255.0
    np.testing.assert_allclose(fed.client("writer_a").examples.inputs.reshape(3, 4), raw)
    assert fed.pooled().inputs.max() <= 1.0


def test_leaf_unit_range_is_not_rescaled(tmp_path):
    payload = leaf_payload(["u"], per_user=3, scale=1)
    fed = load_leaf_json(dump(tmp_path, payload), holdout_fraction=0.0)
    np.testing.assert_array_equal(
        fed.clients[0].examples.inputs.reshape(3, 4), np.asarray(payload["user_data"]["u"]["x"])
    )


def test_leaf_holdout_is_last_examples_of_each_user(tmp_path):
    payload = leaf_payload(["a", "b", "c"], per_user=10)
    fed = load_leaf_json(dump(tmp_path, payload), holdout_fraction=0.1)
    assert [c.num_samples for c in fed.clients] == [9, 9, 9]
    assert len(fed.holdout_main) == 3

    train_rows = {tuple(r) for r in fed.pooled().inputs.reshape(-1, 4)}
    held_rows = {tuple(r) for r in fed.holdout_main.inputs.reshape(-1, 4)}
    assert not train_rows & held_rows
    expected_last = np.asarray(payload["user_data"]["b"]["x"][-1]) / 255.0
    np.testing.assert_allclose(fed.holdout_main.inputs[1].ravel(), expected_last)


def test_leaf_explicit_holdout_key(tmp_path):
    payload = leaf_payload(["a"], per_user=2)
    payload["holdout"] = {"x": [[0.0, 255.0, 0.0, 255.0]], "y": [4]}
    fed = load_leaf_json(dump(tmp_path, payload), holdout_fraction=0.0)
    assert len(fed.holdout_main) == 1
    assert fed.holdout_main.labels.tolist() == [4]
    np.testing.assert_array_equal(fed.holdout_main.inputs.ravel(), [0.0, 1.0, 0.0, 1.0])


def test_leaf_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        load_leaf_json(tmp_path / "absent.json")


def test_leaf_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"users": [')
    with pytest.raises(IngestionError):
        load_leaf_json(path)


def test_leaf_duplicate_user(tmp_path):
    payload = leaf_payload(["a", "b"])
    payload["users"] = ["a", "a"]
    with pytest.raises(IngestionError, match="duplicate"):
        load_leaf_json(dump(tmp_path, payload))


def test_leaf_user_with_zero_samples(tmp_path):
    payload = leaf_payload(["a", "empty"])
    payload["num_samples"][1] = 0
    payload["user_data"]["empty"] = {"x": [], "y": []}
    with pytest.raises(IngestionError, match="empty"):
        load_leaf_json(dump(tmp_path, payload))


def test_leaf_label_out_of_range_names_user(tmp_path):
    payload = leaf_payload(["a", "writer_17"])
    payload["user_data"]["writer_17"]["y"][0] = 10
    with pytest.raises(IngestionError, match="writer_17"):
        load_leaf_json(dump(tmp_path, payload))


def test_leaf_wrong_pixel_count(tmp_path):
    payload = leaf_payload(["a"], pixels=5)
    with pytest.raises(IngestionError):
        load_leaf_json(dump(tmp_path, payload))


def test_written_dataset_loads_back(tmp_path):
    fed = generate_synthetic(4, 5, 10, 10, 6)
    path = tmp_path / "synth.json"
    write_leaf_json(fed, path)
    loaded = load_leaf_json(path, holdout_fraction=0.0)
    assert loaded.client_ids == fed.client_ids
    for ours, theirs in zip(fed.clients, loaded.clients):
        assert ours.examples.same_as(theirs.examples)
    assert loaded.holdout_main.same_as(fed.holdout_main)


# ------------------------------------------------------------------ synthetic


def test_synthetic_shape_and_balance():
    fed = generate_synthetic(0, 100, 50, 10, 16)
    assert len(fed) == 100
    assert fed.client_ids[0] == "client_0000"
    assert fed.client_ids[-1] == "client_0099"
    assert fed.input_shape == (16, 16)
    for c in fed.clients:
        assert c.num_samples == 50
        assert np.bincount(c.examples.labels, minlength=10).tolist() == [5] * 10
        assert 0.0 <= c.examples.inputs.min() and c.examples.inputs.max() <= 1.0
    assert len(fed.holdout_main) == 200


def test_synthetic_is_deterministic():
    a = generate_synthetic(11, 6, 20, 10, 8)
    b = generate_synthetic(11, 6, 20, 10, 8)
    c = generate_synthetic(12, 6, 20, 10, 8)
    assert all(x.examples.same_as(y.examples) for x, y in zip(a.clients, b.clients))
    assert a.holdout_main.same_as(b.holdout_main)
    assert not a.clients[0].examples.same_as(c.clients[0].examples)


def test_synthetic_clients_differ_in_style():
    fed = generate_synthetic(2, 10, 40, 10, 8)
    means = [c.examples.inputs.mean() for c in fed.clients]
    assert np.ptp(means) > 0.02


def test_synthetic_is_learnable():
    fed = generate_synthetic(0, 30, 50, 10, 16)
    assert len(fed.pooled()) == 1500
    assert len(fed.holdout_main) == 200
    arch = ModelArch.mlp_small(10, (16, 16))
    rng = np.random.default_rng(0)
    params = sgd_train(init_params(arch, rng), arch, fed.pooled(), TrainHyper(50, 20, 0.1), rng)
    accuracy = np.mean(predict(params, arch, fed.holdout_main) == fed.holdout_main.labels)
    assert accuracy > 0.9


@pytest.mark.parametrize("bad", [(0, 10), (3, 0)])
def test_synthetic_rejects_empty(bad):
    with pytest.raises(ConfigurationError):
        generate_synthetic(0, bad[0], bad[1])


def test_federated_dataset_requires_canonical_order():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        federation([client("b", [1], rng), client("a", [1], rng)])
    with pytest.raises(ConfigurationError):
        federation([client("a", [1], rng), client("a", [2], rng)])


# ------------------------------------------------------------------ backdoor


def test_backdoor_split_of_five_sources():
    rng = np.random.default_rng(0)
    fed = federation([client("t", [7, 7, 0, 7, 7, 7, 3], rng), client("u", [1, 2, 3], rng)])
    task = build_backdoor_task(fed, BackdoorSpec(["t"]), 0.2, 3, np.random.default_rng(1))
    assert len(task.mal_eval) == 1
    assert len(task.mal_train) == 4
    assert set(task.mal_train.labels.tolist()) == {1}
    assert set(task.mal_eval.labels.tolist()) == {1}
    # originals keep their true labels
    assert fed.client("t").examples.labels.tolist().count(7) == 5


def test_thirty_target_clients_with_ten_sevens_each():
    rng = np.random.default_rng(0)
    clients = [client("c{:02d}".format(k), [7] * 10 + [0, 1, 2], rng) for k in range(40)]
    fed = federation(clients)
    spec = BackdoorSpec(choose_target_clients(fed, 30, 7, np.random.default_rng(2)))
    task = build_backdoor_task(fed, spec, 0.2, 50, np.random.default_rng(3))
    assert len(task.mal_train) + len(task.mal_eval) == 300
    assert len(task.mal_eval) == 60
    train_rows = {r.tobytes() for r in task.mal_train.inputs}
    eval_rows = {r.tobytes() for r in task.mal_eval.inputs}
    assert not train_rows & eval_rows


def test_backdoor_task_is_seeded():
    rng = np.random.default_rng(0)
    fed = federation([client("a", [7] * 6 + [2] * 4, rng), client("b", [3] * 5, rng)])
    spec = BackdoorSpec(["a"])
    first = build_backdoor_task(fed, spec, 0.5, 5, np.random.default_rng(9))
    second = build_backdoor_task(fed, spec, 0.5, 5, np.random.default_rng(9))
    assert first.mal_eval.same_as(second.mal_eval)
    assert first.attacker_clean.same_as(second.attacker_clean)


def test_target_with_one_source_example_is_rejected():
    rng = np.random.default_rng(0)
    fed = federation([client("lonely", [7, 0, 1], rng), client("other", [7, 7], rng)])
    with pytest.raises(ConfigurationError, match="lonely"):
        build_backdoor_task(fed, BackdoorSpec(["lonely"]), 0.2, 2, np.random.default_rng(0))


def test_unknown_target_client():
    rng = np.random.default_rng(0)
    fed = federation([client("a", [7, 7], rng)])
    with pytest.raises(ConfigurationError, match="ghost"):
        build_backdoor_task(fed, BackdoorSpec(["ghost"]), 0.2, 1, np.random.default_rng(0))


def test_attacker_clean_set_excludes_backdoor_images(tiny_fed, tiny_task):
    targets = set(tiny_task.spec.target_client_ids)
    backdoor_rows = {
        row.tobytes()
        for c in tiny_fed.clients
        if c.client_id in targets
        for row, label in zip(c.examples.inputs, c.examples.labels)
        if label == 7
    }
    clean_rows = {row.tobytes() for row in tiny_task.attacker_clean.inputs}
    assert len(tiny_task.attacker_clean) == 20
    assert not backdoor_rows & clean_rows


def test_attacker_data_is_clean_then_backdoor(tiny_task):
    data = tiny_task.attacker_data
    n_clean = len(tiny_task.attacker_clean)
    assert len(data) == n_clean + len(tiny_task.mal_train)
    assert data.take(np.arange(n_clean)).same_as(tiny_task.attacker_clean)


def test_choose_target_clients():
    rng = np.random.default_rng(0)
    fed = federation(
        [client("a", [7, 7], rng), client("b", [7, 1], rng), client("c", [7, 7, 7], rng)]
    )
    assert choose_target_clients(fed, 2, 7, np.random.default_rng(0)) == ("a", "c")
    with pytest.raises(ConfigurationError):
        choose_target_clients(fed, 3, 7, np.random.default_rng(0))


def test_backdoor_spec_validation():
    with pytest.raises(ConfigurationError):
        BackdoorSpec(())
    with pytest.raises(ConfigurationError):
        BackdoorSpec(["a"], source_label=3, target_label=3)


def test_backdoor_images_come_from_target_clients(tiny_fed, tiny_task):
    sources = {
        row.tobytes()
        for client_id in tiny_task.spec.target_client_ids
        for row, label in zip(
            tiny_fed.client(client_id).examples.inputs, tiny_fed.client(client_id).examples.labels
        )
        if label == tiny_task.spec.source_label
    }
    for part in (tiny_task.mal_train, tiny_task.mal_eval):
        assert set(part.labels.tolist()) == {tiny_task.spec.target_label}
        assert {row.tobytes() for row in part.inputs} <= sources


@pytest.mark.parametrize("side", [1, 2, 3, 5])
def test_synthetic_small_images_stay_in_unit_range(side):
    fed = generate_synthetic(0, 2, 4, 2, side)
    for part in (fed.pooled(), fed.holdout_main):
        assert np.all(np.isfinite(part.inputs))
        assert part.inputs.min() >= 0.0 and part.inputs.max() <= 1.0


def test_synthetic_holdout_is_disjoint_from_training():
    fed = generate_synthetic(5, 20, 30, 10, 8)
    train_rows = {row.tobytes() for row in fed.pooled().inputs}
    assert not any(row.tobytes() in train_rows for row in fed.holdout_main.inputs)


def _string_labels(payload):
    payload["user_data"]["b"]["y"] = ["seven"] * 4


def _null_label(payload):
    payload["user_data"]["b"]["y"][2] = None


def _user_data_as_list(payload):
    payload["user_data"] = [payload["user_data"]["a"], payload["user_data"]["b"]]


def _count_as_text(payload):
    payload["num_samples"][1] = "4"


def _labels_not_a_list(payload):
    payload["user_data"]["b"]["y"] = 4


def _pixels_missing(payload):
    del payload["user_data"]["b"]["x"]


def _holdout_as_list(payload):
    payload["holdout"] = [1, 2, 3]


@pytest.mark.parametrize(
    "corrupt, names_user",
    [
        (_string_labels, True),
        (_null_label, True),
        (_user_data_as_list, False),
        (_count_as_text, True),
        (_labels_not_a_list, True),
        (_pixels_missing, False),
        (_holdout_as_list, False),
    ],
)
def test_leaf_schema_violations(tmp_path, corrupt, names_user):
    payload = leaf_payload(["a", "b"])
    corrupt(payload)
    with pytest.raises(IngestionError) as info:
        load_leaf_json(dump(tmp_path, payload))
    if names_user:
        assert "'b'" in str(info.value)


def test_choose_target_clients_among_participants():
    rng = np.random.default_rng(0)
    fed = federation(
        [client("a", [7, 7], rng), client("b", [7, 7], rng), client("c", [7, 7], rng)]
    )
    for seed in range(10):
        picks = choose_target_clients(fed, 2, 7, np.random.default_rng(seed), among=["a", "b"])
        assert picks == ("a", "b")
    with pytest.raises(ConfigurationError):
        choose_target_clients(fed, 3, 7, np.random.default_rng(0), among=["a", "b"])


def test_synthetic_writers_carry_a_private_stroke():
    fed = generate_synthetic(3, 20, 50, 10, 16)
    held = fed.holdout_main
    class_means = np.stack([held.inputs[held.labels == c].mean(axis=0) for c in range(10)])
    marks = set()
    for c in fed.clients:
        residual = (c.examples.inputs - class_means[c.examples.labels]).mean(axis=0).ravel()
        residual -= np.median(residual)
        brightest = np.argsort(residual)[::-1][:4]
        assert residual[brightest[-1]] > 0.15
        marks.add(frozenset(brightest.tolist()))
    assert len(marks) >= 15
