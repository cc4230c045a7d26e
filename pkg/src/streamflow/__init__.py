"""Stream-level conditional flow matching with Gaussian-process stream models.

Train a velocity regressor against closed-form joint draws of (position,
velocity) from a stream model conditioned on pinned observations, generate
samples by ODE integration, and benchmark coupling/stream choices with the
exact 2-Wasserstein distance.
"""

from .coupling import (
    Batch,
    EmpiricalSource,
    GaussianSource,
    grouped_tuple_sampler,
    independent_coupling,
    ot_coupling,
)
from .datasets import DatasetSpec
from .datasets import generate as generate_dataset
from .evaluation import FieldEstimate, RunMetrics, oracle_field, summarize, w2
from .gp_stream import (
    ConditionalGaussian,
    ObservationSet,
    StreamSample,
    ZeroMean,
    condition,
    path_stats,
    sample_point,
)
from .kernels import (
    DotProductDecreasing,
    DotProductIncreasing,
    GramBundle,
    Linear,
    Nugget,
    SquaredExponential,
    Sum,
    build_gram,
    eval_blocks,
    kernel_from_config,
)
from .ode import IntegratorSpec, generate, integrate
from .trainer import TrainConfig, make_scheme_kernel, train, train_multimarginal
from .vector_field import (
    AdamState,
    Architecture,
    VectorFieldModel,
    adam_step,
    forward,
    init_params,
    load_checkpoint,
    loss_and_grad,
    save_checkpoint,
)

__version__ = "0.1.0"
