"""Semi-supervised pipeline: pseudo labels from semi-supervised k-means,
pre-training on labeled plus pseudo-labeled data, and fine-tuning with the
feature layers frozen.
"""

from dataclasses import dataclass

import numpy as np

from .chansim import LABEL_ALICE, LABEL_EVE
from .models import build_network, network_input
from .nn.train import TrainSchedule, sgd_train
from .rng import substream

CENTER_TOL = 1e-12


@dataclass
class PseudoLabeledSet:
    pseudo_labels: np.ndarray      # int {0,1}, one per unlabeled point
    iterations: int
    final_centers: np.ndarray      # (2, d): row 0 Alice, row 1 Eve


@dataclass(frozen=True)
class SemiSupSpec:
    """Schedules of the two training stages."""
    pretrain: TrainSchedule = TrainSchedule(epochs=100, batch_size=256,
                                            initial_lr=1e-4, halving_period=20)
    finetune: TrainSchedule = TrainSchedule(epochs=100, batch_size=256,
                                            initial_lr=1e-3, halving_period=20)


def semi_kmeans(labeled_x, labeled_y, unlabeled_x, max_iter=10_000):
    """Two-cluster k-means with centers seeded from the labeled centroids.

    Each pass assigns every unlabeled point the label of its nearest
    center (Euclidean; ties go to Alice) and recomputes each center as the
    centroid of its labeled plus pseudo-labeled points.  Stops once both
    centers move by at most 1e-12 per coordinate.
    """
    labeled_x = np.asarray(labeled_x, dtype=np.float64)
    labeled_y = np.asarray(labeled_y)
    unlabeled_x = np.asarray(unlabeled_x, dtype=np.float64)
    masks = [labeled_y == LABEL_ALICE, labeled_y == LABEL_EVE]
    if not (masks[0].any() and masks[1].any()):
        raise ValueError("labeled set must contain at least one sample of each class")

    centers = np.stack([labeled_x[m].mean(axis=0) for m in masks])
    n_u = unlabeled_x.shape[0]
    pseudo = np.zeros(n_u, dtype=np.int64)
    iterations = 0
    while True:
        iterations += 1
        if n_u:
            d0 = np.einsum("ij,ij->i", unlabeled_x - centers[0], unlabeled_x - centers[0])
            d1 = np.einsum("ij,ij->i", unlabeled_x - centers[1], unlabeled_x - centers[1])
            pseudo = (d1 < d0).astype(np.int64)
        new_centers = np.empty_like(centers)
        for j in (LABEL_ALICE, LABEL_EVE):
            members = [labeled_x[masks[j]]]
            if n_u:
                members.append(unlabeled_x[pseudo == j])
            stacked = np.concatenate(members)
            new_centers[j] = stacked.mean(axis=0)
        moved = np.abs(new_centers - centers).max() if centers.size else 0.0
        centers = new_centers
        if moved <= CENTER_TOL:
            break
        if iterations >= max_iter:
            raise RuntimeError(f"k-means failed to converge in {max_iter} passes")
    return PseudoLabeledSet(pseudo_labels=pseudo, iterations=iterations,
                            final_centers=centers)


def pretrain(config, labeled_inputs, labeled_y, pseudo_inputs, pseudo_y,
             schedule, seed, val_inputs=None, val_y=None):
    """Train a fresh network on labeled plus pseudo-labeled data (DNN1)."""
    if len(labeled_inputs) + len(pseudo_inputs) == 0:
        raise ValueError("nothing to pre-train on")
    parts_x = [np.asarray(p, dtype=np.float64) for p in (labeled_inputs, pseudo_inputs)
               if len(p)]
    parts_y = [np.asarray(p, dtype=np.float64) for p in (labeled_y, pseudo_y) if len(p)]
    inputs = np.concatenate(parts_x)
    labels = np.concatenate(parts_y)
    net = build_network(config, seed)
    log = sgd_train(net, inputs, labels, schedule, substream(seed, 11),
                    val_inputs=val_inputs, val_labels=val_y)
    return net, log


def finetune(dnn1, labeled_inputs, labeled_y, schedule, seed,
             val_inputs=None, val_y=None):
    """Copy DNN1 and train only its dense head on the labeled data (DNN2).

    Convolutional and recurrent tensors are frozen and stay bitwise equal
    to DNN1's.
    """
    if len(labeled_inputs) == 0:
        raise ValueError("labeled set is empty")
    dense_params = set()
    for layer in dnn1.layers:
        if layer.kind == "dense":
            dense_params.update(layer.param_names)
    if not dense_params:
        raise ValueError("network has no dense layers to fine-tune")
    dnn2 = dnn1.copy()
    for name in dnn2.store.names:
        dnn2.store.set_frozen(name, name not in dense_params)
    log = sgd_train(dnn2, np.asarray(labeled_inputs, dtype=np.float64),
                    np.asarray(labeled_y, dtype=np.float64), schedule,
                    substream(seed, 13), val_inputs=val_inputs, val_labels=val_y)
    return dnn2, log


def run_pipeline(config, labeled_samples, unlabeled_samples, spec, seed,
                 val_samples=None):
    """Full pipeline on ChannelSamples: Algorithm-1 pseudo labels, then
    pre-train, then fine-tune.  Returns (dnn1, dnn2, pseudo_set, logs)."""
    from .chansim import flatten_samples, labels_of

    labeled_flat = flatten_samples(labeled_samples)
    labeled_y = labels_of(labeled_samples)
    if len(unlabeled_samples):
        unlabeled_flat = flatten_samples(unlabeled_samples)
    else:
        unlabeled_flat = np.empty((0, labeled_flat.shape[1]))
    pseudo_set = semi_kmeans(labeled_flat, labeled_y, unlabeled_flat)
    pseudo_y = pseudo_set.pseudo_labels

    lab_in = network_input(config, labeled_samples)
    unl_in = network_input(config, unlabeled_samples) if len(unlabeled_samples) \
        else np.empty((0,) + lab_in.shape[1:])
    val_in = network_input(config, val_samples) if val_samples else None
    val_y = labels_of(val_samples) if val_samples else None

    dnn1, log1 = pretrain(config, lab_in, labeled_y, unl_in, pseudo_y,
                          spec.pretrain, seed, val_inputs=val_in, val_y=val_y)
    dnn2, log2 = finetune(dnn1, lab_in, labeled_y, spec.finetune, seed,
                          val_inputs=val_in, val_y=val_y)
    return dnn1, dnn2, pseudo_set, (log1, log2)
