"""Classical comparison methods over flattened real/imag channel vectors:
the squared-distance threshold test, k-nearest-neighbor, logistic
regression, and a linear soft-margin SVM.
"""

from dataclasses import dataclass

import numpy as np

from .chansim import LABEL_ALICE, LABEL_EVE
from .models import build_network, parse_config
from .nn.train import TrainSchedule, sgd_train
from .rng import substream


# ---------------------------------------------------------------------------
# threshold test on the distance to Alice's mean channel
# ---------------------------------------------------------------------------

def np_statistic(sample_values, mean_alice):
    """Squared Frobenius norm of (sample - mean_alice)."""
    sample_values = np.asarray(sample_values)
    mean_alice = np.asarray(mean_alice)
    if sample_values.shape != mean_alice.shape:
        raise ValueError(f"sample shape {sample_values.shape} != mean shape "
                         f"{mean_alice.shape}")
    d = sample_values - mean_alice
    return float(np.sum(d.real ** 2 + d.imag ** 2))


def np_decide(statistic, gamma):
    """Eve iff the statistic exceeds gamma; the boundary goes to Alice."""
    return LABEL_EVE if statistic > gamma else LABEL_ALICE


def np_fit_gamma(statistics, labels):
    """Threshold maximizing training accuracy.

    Candidates are 0, the midpoints of consecutive distinct sorted
    statistics, and max+1; ties break toward the smallest candidate.
    Returns (gamma, training accuracy).
    """
    statistics = np.asarray(statistics, dtype=np.float64)
    labels = np.asarray(labels)
    if statistics.size == 0:
        raise ValueError("cannot fit a threshold on an empty set")
    uniq = np.unique(statistics)
    candidates = np.concatenate(([0.0], (uniq[:-1] + uniq[1:]) / 2.0, [uniq[-1] + 1.0]))
    is_eve = labels == LABEL_EVE
    best_gamma, best_acc = None, -1.0
    for gamma in candidates:
        acc = float(np.mean((statistics > gamma) == is_eve))
        if acc > best_acc:
            best_gamma, best_acc = float(gamma), acc
    return best_gamma, best_acc


@dataclass
class NPTestModel:
    mean_alice: np.ndarray
    gamma: float

    def predict_samples(self, samples):
        return np.array([np_decide(np_statistic(s.values, self.mean_alice), self.gamma)
                         for s in samples], dtype=np.int64)


def np_fit(train_samples, mean_alice):
    stats = [np_statistic(s.values, mean_alice) for s in train_samples]
    labels = [s.label for s in train_samples]
    gamma, _ = np_fit_gamma(stats, labels)
    return NPTestModel(mean_alice=mean_alice, gamma=gamma)


# ---------------------------------------------------------------------------
# k-nearest-neighbor
# ---------------------------------------------------------------------------

def knn_classify(train_x, train_y, query, k):
    """Majority vote among the k nearest training vectors.

    Distance ties prefer the lower sample index; vote ties go to Alice.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    if train_x.shape[0] == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= train_x.shape[0]:
        raise ValueError(f"k={k} not in [1, {train_x.shape[0]}]")
    d = np.einsum("ij,ij->i", train_x - query, train_x - query)
    order = np.argsort(d, kind="stable")
    votes = int(np.sum(train_y[order[:k]] == LABEL_EVE))
    return LABEL_EVE if votes > k - votes else LABEL_ALICE


def knn_predict(train_x, train_y, queries, k):
    return np.array([knn_classify(train_x, train_y, q, k) for q in queries],
                    dtype=np.int64)


# ---------------------------------------------------------------------------
# logistic regression: one dense+sigmoid unit on the shared SGD machinery
# ---------------------------------------------------------------------------

@dataclass
class LogisticModel:
    network: object

    @property
    def weights(self):
        return self.network.store["layer0.weight"][0]

    @property
    def bias(self):
        return float(self.network.store["layer0.bias"][0])

    def predict_proba(self, x):
        return self.network.forward(np.asarray(x, dtype=np.float64))

    def predict(self, x):
        return np.ceil(self.predict_proba(x) - 0.5).astype(np.int64)


def logistic_train(train_x, train_y, schedule=None, seed=0):
    """Train a single sigmoid unit with mini-batch SGD."""
    train_x = np.asarray(train_x, dtype=np.float64)
    if train_x.shape[0] == 0:
        raise ValueError("empty training set")
    d = train_x.shape[1]
    config = parse_config(f"FC-{d}-1", name="logistic")
    net = build_network(config, seed)
    schedule = schedule or TrainSchedule()
    log = sgd_train(net, train_x, np.asarray(train_y, dtype=np.float64),
                    schedule, substream(seed, 101))
    return LogisticModel(network=net), log


# ---------------------------------------------------------------------------
# linear soft-margin SVM via deterministic subgradient descent
# ---------------------------------------------------------------------------

SVM_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1)


@dataclass
class LinearSVM:
    w: np.ndarray
    b: float
    lam: float

    def decision(self, x):
        return np.asarray(x, dtype=np.float64) @ self.w + self.b

    def predict(self, x):
        return np.where(self.decision(x) > 0, LABEL_EVE, LABEL_ALICE).astype(np.int64)


def _svm_subgradient_descent(x, y_pm, lam, iters):
    """Full-batch Pegasos-style descent on lam/2 ||w||^2 + mean hinge."""
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    radius = 1.0 / np.sqrt(lam)
    for t in range(1, iters + 1):
        eta = 1.0 / (lam * t)
        margin = y_pm * (x @ w + b)
        active = margin < 1.0
        if active.any():
            gw = lam * w - (y_pm[active, None] * x[active]).sum(axis=0) / n
            gb = -float(y_pm[active].sum()) / n
        else:
            gw = lam * w
            gb = 0.0
        w -= eta * gw
        b -= eta * gb
        norm = np.linalg.norm(w)
        if norm > radius:
            w *= radius / norm
    return w, b


def svm_train(train_x, train_y, val_x=None, val_y=None,
              lambda_grid=SVM_LAMBDA_GRID, iters=500):
    """Fit a linear SVM, selecting lambda on the validation split.

    Labels are remapped to -1 (Alice) / +1 (Eve).  Without a validation
    set the first grid value is used.
    """
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y)
    if train_x.shape[0] == 0:
        raise ValueError("empty training set")
    y_pm = np.where(train_y == LABEL_EVE, 1.0, -1.0)

    best = None
    for lam in lambda_grid:
        w, b = _svm_subgradient_descent(train_x, y_pm, lam, iters)
        model = LinearSVM(w=w, b=b, lam=lam)
        if val_x is not None and len(val_x):
            score = float(np.mean(model.predict(val_x) == np.asarray(val_y)))
        else:
            score = float(np.mean(model.predict(train_x) == train_y))
        if best is None or score > best[0]:
            best = (score, model)
        if len(lambda_grid) == 1:
            break
    return best[1]
