"""Seed-sensitivity benchmark for machine-unlearning methods."""

from .datagen import Dataset, DatasetSpec, ForgetSplit, ForgetTarget, generate, split_forget
from .nncore import Architecture, ModelParams, TrainConfig, accuracy, train
from .seedkit import RngStream, derive_seed, derive_stream
from .stats import EmpiricalDistribution, conditional_variance, decompose, quantiles, wasserstein2
from .sweep import SweepGrid, SweepPlan, grid_metric, plan_common_practice, plan_recommended, run_sweep
from .unlearners import UnlearnMethod, unlearn

__version__ = "0.1.0"
