"""Explicit geometric-ergodicity certificates for random walk Metropolis-Hastings chains."""
from .drift import DriftMinCert, drift_certificate, verify_drift_mc, verify_minorization_grid
from .geometry import ConeParams, cone_box_mass, cone_radius, drift_factor, epsilon_delta
from .glm import (GLMConstants, GLMData, PriorSpec, gaussian_prior, glm_constants, load_glm_csv,
                  logistic_bundle, logistic_constants, logistic_preset, poisson_lower_bound,
                  poisson_preset)
from .grid import Grid1D, Grid2D
from .oracle import discretize, sandwich_check, stationary_and_slem, tv_decay
from .proposal import RadialProposal, box_probability, gaussian_proposal, laplace_proposal, tail_radius
from .rates import (LowerBound, RateReport, lower_bounds, rate_report, rosenthal_optimize,
                    rosenthal_upper)
from .roots import invert_monotone
from .sampler import ChainConfig, ChainOutput, estimate_acceptance, rwmh_step, run_chain
from .target import (CurvatureCert, EnvelopeFn, LogTarget, SuperexpCert, TargetBundle,
                     combine_mixture, combine_product, find_mode, gaussian_bundle,
                     gaussian_mixture_bundle, make_bundle, standard_normal_bundle,
                     verify_assumptions)

__version__ = "0.1.0"
