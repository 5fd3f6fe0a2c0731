"""Inverse source toolkit for stochastic multi-term time-fractional diffusion-wave equations."""
from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text
from .fbm import FbmPath, covariance_oracle, generate_fbm, generate_fbm_batch
from .fdm import (BoundaryEnsemble, GridSpec, assemble_beta, assemble_rhs, march,
                  simulate_ensemble, solve_forward, tridiag_solve)
from .frac_core import (FractionalOrders, HurstIndex, QuadratureError, QuadratureSpec,
                        compute_R, compute_s, green_hat_boundary, green_l2_norm_sq,
                        green_norm_bound, green_value)
from .phaselift import (LiftedMatrix, MaskSet, MeasurementOperator, extract_signal,
                        forward_magnitudes, make_masks, solve_phaselift)
from .pipelines import (PipelineError, reconstruct, run_direct, run_fbm, run_r_omega,
                        run_reconstruct)
from .sources import builtin_source
from .spectral import (FrequencyGrid, NoisySpec, PhaselessModes, add_noise, dft_boundary,
                       ensemble_variance, recover_fhat_abs)

__version__ = "0.1.0"
