"""itseek: classify long irregularly-sampled time series by learning
where in the timeline to look.

A moment policy positions a magnifying receptor over a handful of
timeline locations, a GRU fuses the readings, and a discriminator
classifies from the final state; training couples cross-entropy with a
score-function policy gradient and a learned return baseline.
"""

from .autodiff import (
    DiffError,
    DimMismatch,
    FdReport,
    NonFiniteGradient,
    NonScalarLoss,
    Param,
    ParamStore,
    Tape,
    adam_step,
    finite_diff_check,
    load_checkpoint,
    save_checkpoint,
)
from .baselines import ImputeConfig, evaluate_baseline, impute, train_baseline
from .config import ConfigError, RunConfig
from .experiments import (
    ablate_moment_network,
    couple_delta,
    sweep_receptor_width,
    sweep_signal_width,
    timing_benchmark,
)
from .features import PreparedSeries, ReceptorConfig, extract_features, prepare_series
from .model import AgentConfig, EpisodeTrace, init_agent, run_episode
from .series import (
    Channel,
    DatasetError,
    Instance,
    IrregularSeries,
    LabeledDataset,
    SplitSpec,
    read_dataset,
    split,
    validate,
    write_dataset,
)
from .synth import MpiConfig, ProbeConfig, gen_mpi, listening_probe, random_downsample
from .training import RunMetrics, TrainConfig, evaluate, fit, joint_step

__version__ = "0.1.0"
