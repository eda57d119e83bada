import numpy as np
import pytest

from csiauth.chansim import (LABEL_ALICE, LABEL_EVE, SimConfig, generate_trial,
                             labels_of)
from csiauth.models import build_network, infer_shapes, network_input, parse_config
from csiauth.nn import TrainSchedule, sgd_train
from csiauth.rng import substream
from csiauth.semisup import SemiSupSpec, finetune, pretrain, semi_kmeans


def test_semi_kmeans_hand_iterated_example():
    labeled_x = np.array([[0.0], [10.0]])
    labeled_y = np.array([LABEL_ALICE, LABEL_EVE])
    unlabeled = np.array([[1.0], [9.0], [4.0]])
    out = semi_kmeans(labeled_x, labeled_y, unlabeled)
    assert out.pseudo_labels.tolist() == [LABEL_ALICE, LABEL_EVE, LABEL_ALICE]
    assert abs(out.final_centers[0, 0] - 5.0 / 3.0) < 1e-12
    assert abs(out.final_centers[1, 0] - 9.5) < 1e-12
    assert out.iterations == 2


def test_semi_kmeans_empty_unlabeled():
    labeled_x = np.array([[0.0, 0.0], [4.0, 4.0]])
    labeled_y = np.array([LABEL_ALICE, LABEL_EVE])
    out = semi_kmeans(labeled_x, labeled_y, np.empty((0, 2)))
    assert out.pseudo_labels.size == 0
    assert out.iterations == 1
    assert np.array_equal(out.final_centers, labeled_x)


def test_semi_kmeans_equidistant_tie_to_alice():
    labeled_x = np.array([[-2.0], [2.0]])
    labeled_y = np.array([LABEL_ALICE, LABEL_EVE])
    out = semi_kmeans(labeled_x, labeled_y, np.array([[0.0]]))
    assert out.pseudo_labels.tolist() == [LABEL_ALICE]


def test_semi_kmeans_requires_both_classes():
    with pytest.raises(ValueError):
        semi_kmeans(np.zeros((2, 1)), np.array([LABEL_ALICE, LABEL_ALICE]),
                    np.zeros((1, 1)))


def test_semi_kmeans_matches_independent_loop_and_wcss_monotone():
    rng = np.random.default_rng(8)
    labeled_x = np.vstack([rng.normal(size=(5, 3)) - 2, rng.normal(size=(5, 3)) + 2])
    labeled_y = np.array([LABEL_ALICE] * 5 + [LABEL_EVE] * 5)
    unlabeled = rng.normal(size=(40, 3)) * 2

    out = semi_kmeans(labeled_x, labeled_y, unlabeled)

    # independent reimplementation of the loop, tracking within-cluster cost
    centers = np.stack([labeled_x[labeled_y == j].mean(axis=0) for j in (0, 1)])
    costs = []
    for _ in range(1000):
        d = np.stack([np.sum((unlabeled - c) ** 2, axis=1) for c in centers])
        pseudo = (d[1] < d[0]).astype(int)
        assign_cost = 0.0
        for j in (0, 1):
            pts = np.vstack([labeled_x[labeled_y == j], unlabeled[pseudo == j]]) \
                if (pseudo == j).any() else labeled_x[labeled_y == j]
            assign_cost += np.sum((pts - centers[j]) ** 2)
        costs.append(assign_cost)
        new_centers = np.stack([
            np.vstack([labeled_x[labeled_y == j], unlabeled[pseudo == j]]).mean(axis=0)
            if (pseudo == j).any() else labeled_x[labeled_y == j].mean(axis=0)
            for j in (0, 1)])
        if np.abs(new_centers - centers).max() <= 1e-12:
            centers = new_centers
            break
        centers = new_centers
    assert np.allclose(out.final_centers, centers, atol=1e-12)
    assert np.array_equal(out.pseudo_labels, pseudo)
    assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))


def test_semi_kmeans_separated_clusters_low_error():
    # two unit-variance clusters 6 sigma apart: error rate <= 1% per seed
    for seed in range(20):
        rng = np.random.default_rng(seed)
        mu = np.zeros(4)
        mu_e = np.zeros(4)
        mu_e[0] = 6.0
        labeled_x = np.vstack([rng.normal(size=(10, 4)) + mu,
                               rng.normal(size=(10, 4)) + mu_e])
        labeled_y = np.array([LABEL_ALICE] * 10 + [LABEL_EVE] * 10)
        truth = rng.integers(0, 2, 1000)
        unlabeled = rng.normal(size=(1000, 4)) + np.where(truth[:, None] == 1, mu_e, mu)
        out = semi_kmeans(labeled_x, labeled_y, unlabeled)
        err = np.mean(out.pseudo_labels != truth)
        assert err <= 0.01


SIM = SimConfig(n_tones=16, n_train_per_class=10, n_test_per_class=10,
                n_unlabeled=40, seed=21)
TINY_NET = "conv1x3-4\nmaxpooling\nFC-32-8\nFC-8-1"


def _setup():
    ds = generate_trial(SIM)
    cfg = infer_shapes(parse_config(TINY_NET, name="tiny"), SIM.m_b, SIM.m_a,
                       SIM.n_tones)
    return ds, cfg


def test_pretrain_on_labeled_only_equals_supervised():
    ds, cfg = _setup()
    x = network_input(cfg, ds.train)
    y = labels_of(ds.train)
    sched = TrainSchedule(epochs=4)
    net1, _ = pretrain(cfg, x, y, np.empty((0,) + x.shape[1:]), np.empty(0),
                       sched, seed=3)
    net2 = build_network(cfg, 3)
    sgd_train(net2, x, y, sched, substream(3, 11))
    for name in net1.store.names:
        assert net1.store[name].tobytes() == net2.store[name].tobytes()


def test_pretrain_deterministic():
    ds, cfg = _setup()
    x = network_input(cfg, ds.train)
    y = labels_of(ds.train)
    sched = TrainSchedule(epochs=3)
    nets = [pretrain(cfg, x, y, np.empty((0,) + x.shape[1:]), np.empty(0),
                     sched, seed=5)[0] for _ in range(2)]
    for name in nets[0].store.names:
        assert nets[0].store[name].tobytes() == nets[1].store[name].tobytes()


def test_finetune_freezes_feature_layers():
    ds, cfg = _setup()
    x = network_input(cfg, ds.train)
    y = labels_of(ds.train)
    dnn1, _ = pretrain(cfg, x, y, np.empty((0,) + x.shape[1:]), np.empty(0),
                       TrainSchedule(epochs=2), seed=7)
    before = {n: dnn1.store[n].copy() for n in dnn1.store.names}
    dnn2, _ = finetune(dnn1, x, y, TrainSchedule(epochs=3, initial_lr=1e-3), seed=7)
    # conv tensors bitwise equal, dense head updated
    assert dnn2.store["layer0.filters"].tobytes() == before["layer0.filters"].tobytes()
    assert dnn2.store["layer0.bias"].tobytes() == before["layer0.bias"].tobytes()
    assert dnn2.store["layer2.weight"].tobytes() != before["layer2.weight"].tobytes()
    # DNN1 itself untouched
    for name in dnn1.store.names:
        assert dnn1.store[name].tobytes() == before[name].tobytes()
    # frozen flags only on feature layers
    assert dnn2.store.frozen("layer0.filters")
    assert not dnn2.store.frozen("layer2.weight")


def test_finetune_effective_batch_is_labeled_size():
    ds, cfg = _setup()
    x = network_input(cfg, ds.train[:20])
    y = labels_of(ds.train[:20])
    dnn1, _ = pretrain(cfg, x, y, np.empty((0,) + x.shape[1:]), np.empty(0),
                       TrainSchedule(epochs=1), seed=9)
    a, _ = finetune(dnn1, x, y, TrainSchedule(epochs=2, batch_size=256,
                                              initial_lr=1e-3), seed=9)
    b, _ = finetune(dnn1, x, y, TrainSchedule(epochs=2, batch_size=20,
                                              initial_lr=1e-3), seed=9)
    for name in a.store.names:
        assert a.store[name].tobytes() == b.store[name].tobytes()


def test_oracle_pseudo_labels_match_fully_supervised_quality():
    # with all pseudo labels correct, pre-training equals supervised training
    # on the same pool up to the label source; accuracies should be close
    sim = SimConfig(n_tones=16, n_train_per_class=40, n_test_per_class=50,
                    n_unlabeled=0, seed=31)
    ds = generate_trial(sim)
    cfg = infer_shapes(parse_config(TINY_NET, name="tiny"), sim.m_b, sim.m_a,
                       sim.n_tones)
    x = network_input(cfg, ds.train)
    y = labels_of(ds.train)
    test_x = network_input(cfg, ds.test)
    test_y = labels_of(ds.test)
    sched = TrainSchedule(epochs=30, initial_lr=1e-3)

    half = len(ds.train) // 2
    oracle_net, _ = pretrain(cfg, x[:half], y[:half], x[half:], y[half:], sched,
                             seed=13)
    full_net, _ = pretrain(cfg, x, y, np.empty((0,) + x.shape[1:]), np.empty(0),
                           sched, seed=13)
    acc_oracle = np.mean(np.ceil(oracle_net.forward(test_x) - 0.5) == test_y)
    acc_full = np.mean(np.ceil(full_net.forward(test_x) - 0.5) == test_y)
    assert abs(acc_oracle - acc_full) <= 0.02 + 1e-9
