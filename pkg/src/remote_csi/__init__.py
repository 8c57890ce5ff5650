"""Remote-site channel inference from local-site CSI: one-ring channel model, Cramer-Rao
bounds for local and remote angles, an ML LoS estimator and a small numpy MLP."""

from .channel import RingModel, covariance_analytic, covariance_sampled, farfield_batch
from .config import ExperimentConfig, load_config, parse_config
from .crlb import (
    crlb_los_closed_form,
    crlb_remote_one_site,
    crlb_remote_two_site,
    fim_general,
    fim_los,
    fit_power_law,
)
from .estimator import estimate_los, mse_vs_crlb_sweep
from .geometry import SiteLayout, UlaConfig, steering_vector
from .mlp import MlpModel, TrainConfig, train_and_eval

__version__ = "0.1.0"
