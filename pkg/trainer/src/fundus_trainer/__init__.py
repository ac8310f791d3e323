"""Toy-scale fine-tuning harness for fundus grading classifiers."""

__version__ = "0.1.0"

from .data import FundusDataset, TrainItem, class_count, load_dataset
from .early_stop import CONTINUE, STOP, early_stop_update
from .errors import (
    DataMismatch,
    EmptyBatch,
    IncompatibleBackbone,
    RangeError,
    TrainerError,
)
from .model import (
    BACKBONES,
    ClassifierHead,
    GradingModel,
    TinyCnnBackbone,
    build_head,
    make_backbone,
    swap_batchnorm_to_instancenorm,
)
from .optim import accumulated_step
from .schedule import lr_at_epoch
from .train import TrainConfig, TrainResult, train_and_export, tuning_metric
