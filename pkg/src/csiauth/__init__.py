"""CSI-based physical-layer authentication toolkit."""

from .chansim import (LABEL_ALICE, LABEL_EVE, LABEL_UNLABELED, ChannelSample,
                      SimConfig, TrialDataset, draw_average_gain,
                      draw_observation, generate_trial, pdp_tap_variances)
from .datafile import DataFormatError, read_dataset, read_records, write_dataset, write_records
from .experiments import ExperimentPlan, reproduce, run_experiment, run_single_trial
from .metrics import MetricsReport, authenticate, authenticate_batch, compute_metrics
from .models import (ConfigParseError, NetworkConfig, ShapeError, ZOO,
                     build_network, infer_shapes, load_checkpoint, load_network,
                     named_config, parse_config, render, save_checkpoint)
from .nn import (Network, NumericError, ParameterStore, TrainSchedule,
                 cross_entropy, grad_check, sgd_train)
from .semisup import PseudoLabeledSet, SemiSupSpec, finetune, pretrain, semi_kmeans

__version__ = "0.1.0"
