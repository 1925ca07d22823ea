"""Robust pricing and hedging for generalized affine diffusions under
interval parameter uncertainty: uncertainty-dominated path simulation,
deep quadratic hedging, worst-case PDE price bounds, and rolling-window
maximum-likelihood estimation of the uncertainty box.
"""

__version__ = "0.1.0"

from .model import (
    ParameterBox,
    ParameterPoint,
    PathBatch,
    RngSpec,
    TimeGrid,
    ValidationReport,
    diffusion,
    drift,
    euler_step,
    sample_paths,
    validate_box,
)
from .payoffs import PayoffSpec, asian_put, butterfly, call, lookback_call, put
from .network import AdamState, MlpNetwork, adam_step
from .hedging import (
    HedgeModel,
    HedgeReport,
    TrainConfig,
    evaluate,
    hedge_loss,
    load_model,
    save_model,
    train,
)
from .pde import PdeConfig, PdeGrid, generator_extremum, price_bounds, solve_pde
from .estimation import (
    EstimationConfig,
    PriceSeries,
    ThetaHat,
    log_likelihood,
    mle_fit,
    restrict_box,
    rolling_estimate,
)
from .config import ConfigError, RunManifest, load_config, validate_config
from .experiments import (
    make_regime_fixture,
    run_backtest_table,
    run_bounds_profile,
    run_hedge_table,
)
