"""Decision rule and evaluation metrics."""

import math
from dataclasses import dataclass, field

import numpy as np

from .chansim import LABEL_ALICE, LABEL_EVE


def authenticate(probability):
    """Map a class-1 probability to a hard identity: ceil(f - 1/2).

    Eve (1) iff f > 0.5; the boundary f = 0.5 authenticates as Alice (0).
    """
    return int(math.ceil(probability - 0.5))


def authenticate_batch(probabilities):
    return np.ceil(np.asarray(probabilities, dtype=np.float64) - 0.5).astype(np.int64)


@dataclass
class MetricsReport:
    accuracy: float
    false_alarm_rate: float        # Alice samples rejected; nan if no Alice
    miss_detection_rate: float     # Eve samples accepted; nan if no Eve
    n_test: int
    wall_time_s: float = 0.0
    per_epoch_losses: dict = field(default_factory=dict)


def compute_metrics(predictions, labels):
    """Accuracy, false-alarm rate, and miss-detection rate of predictions.

    FAR is the fraction of Alice (0) samples predicted Eve; MDR the
    fraction of Eve (1) samples predicted Alice.  A class absent from
    `labels` makes its rate nan; accuracy is always computed.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"predictions shape {predictions.shape} != labels shape "
                         f"{labels.shape}")
    if labels.size == 0:
        raise ValueError("empty evaluation set")
    if not np.isin(labels, (LABEL_ALICE, LABEL_EVE)).all():
        raise ValueError("labels must be 0 (Alice) or 1 (Eve)")
    if not np.isin(predictions, (LABEL_ALICE, LABEL_EVE)).all():
        raise ValueError("predictions must be 0 (Alice) or 1 (Eve)")
    alice = labels == LABEL_ALICE
    eve = labels == LABEL_EVE
    far = float(np.mean(predictions[alice] == LABEL_EVE)) if alice.any() else math.nan
    mdr = float(np.mean(predictions[eve] == LABEL_ALICE)) if eve.any() else math.nan
    acc = float(np.mean(predictions == labels))
    return MetricsReport(accuracy=acc, false_alarm_rate=far,
                         miss_detection_rate=mdr, n_test=int(labels.size))
