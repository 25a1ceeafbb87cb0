"""Desk-scale spatio-temporal CNN library with class-weight-driven
activation excitation blocks: training, gradient-checked layers, saliency
export, and cost/latency accounting."""

from .backend import get_backend, set_backend
from .block import (
    ClassifierSnapshot,
    ClassRegBlock,
    class_logits,
    normalize_affection,
    select_class,
)
from .config import DEFAULT_CONFIG, RunConfig, load_run_config, parse_run_config
from .data import ClipSpec, generate_clip, generate_dataset, make_split
from .errors import (
    ClassRegError,
    ConfigError,
    FormatError,
    InputError,
    ShapeError,
    StateError,
)
from .layers import (
    Conv3dLayer,
    FcLayer,
    cross_entropy_loss,
    global_avg_pool_stfw,
    sgd_momentum_step,
    softmax,
)
from .network import BlockPlacement, Network, NetworkSpec
from .train import EpochMetrics, TrainConfig, evaluate, paired_comparison, train

__version__ = "0.1.0"
