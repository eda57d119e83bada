from .gradcheck import grad_check
from .layers import (conv1d_forward, dense_forward, maxpool_forward,
                     pooled_length, recurrent_forward, relu, sigmoid)
from .network import Network
from .params import ParameterStore
from .train import (CLAMP_EPS, NumericError, TrainLog, TrainSchedule,
                    cross_entropy, cross_entropy_batch, sgd_train)

__all__ = [
    "CLAMP_EPS", "Network", "NumericError", "ParameterStore", "TrainLog",
    "TrainSchedule", "conv1d_forward", "cross_entropy", "cross_entropy_batch",
    "dense_forward", "grad_check", "maxpool_forward", "pooled_length",
    "recurrent_forward", "relu", "sgd_train", "sigmoid",
]
