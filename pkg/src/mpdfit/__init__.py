"""Exact single-parameter descent for piecewise-linear networks."""

from ._backend import COMPILED
from .baselines import AdamState, GdConfig, adam_step, nag_step, train_gd
from .data import (
    DataError,
    Dataset,
    Split,
    Standardization,
    load_csv,
    load_dataset,
    save_dataset,
    split_80_20,
    standardize,
    synthetic_rugged,
)
from .mpd import Growth, LogRecord, TrainConfig, TrainLog, init_params, minibatch_indices, mpd_step, train
from .network import (
    NetworkParams,
    NetworkShape,
    ParamRef,
    Sample,
    build_message,
    forward,
    gradient,
    loss,
    output_trace,
    param_count,
)
from .pwp import (
    MinResult,
    PwlActivation,
    PwpFunction,
    UnboundedBelow,
    compose_activation,
    evaluate,
    global_min,
    leaky_hard_tanh,
    square_residual,
    sum_pwp,
)

__version__ = "0.1.0"
