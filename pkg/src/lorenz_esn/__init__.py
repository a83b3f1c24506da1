"""Echo state networks for Lorenz-63 forecasting, denoising and benchmarking."""

from .errors import (
    AllCandidatesDivergedError,
    DegenerateMatrixError,
    DivergenceError,
    InsufficientDataError,
    SingularSystemError,
)
from .esn import (
    EchoStateNetwork,
    ReadoutAccumulator,
    Reservoir,
    ReservoirConfig,
    build_reservoir,
    drive,
    estimate_spectral_radius,
    load_model,
    save_model,
    solve_readout,
    update_state,
)
from .harness import RunConfig, run_all, run_pair
from .lorenz import (
    LorenzParams,
    PairSpec,
    Trajectory,
    add_noise,
    default_pair_spec,
    generate_pair,
    load_pair,
    rk4_step,
    save_pair,
    simulate,
)
from .metrics import (
    bin_edges,
    build_histogram,
    histogram_l2,
    normalize_score,
    reconstruction_error,
    short_time_rmse,
)
from .strategies import StrategyConfig

__version__ = "0.1.0"

__all__ = [
    "AllCandidatesDivergedError",
    "DegenerateMatrixError",
    "DivergenceError",
    "EchoStateNetwork",
    "InsufficientDataError",
    "LorenzParams",
    "PairSpec",
    "ReadoutAccumulator",
    "Reservoir",
    "ReservoirConfig",
    "RunConfig",
    "SingularSystemError",
    "StrategyConfig",
    "Trajectory",
    "add_noise",
    "bin_edges",
    "build_histogram",
    "build_reservoir",
    "default_pair_spec",
    "drive",
    "estimate_spectral_radius",
    "generate_pair",
    "histogram_l2",
    "load_model",
    "load_pair",
    "normalize_score",
    "reconstruction_error",
    "rk4_step",
    "run_all",
    "run_pair",
    "save_model",
    "save_pair",
    "short_time_rmse",
    "simulate",
    "solve_readout",
    "update_state",
]
