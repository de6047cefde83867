"""Diverse sampling from flow-matching models with a determinantal diversity force."""
from ._backend import NAME as BACKEND
from .bench import BenchResult, SweepGrid, run_mode_trials, sweep_heatmap, trial_rng
from .cfm import FlowPathSpec, TrainConfig, default_target, sample_path, train
from .dpp import (DppKernel, FeatureMap, IDENTITY, LikelihoodReport, QualityParams, apply_quality,
                  build_kernel, grad_loglik, likelihood_report, quality_vector)
from .errors import (CheckpointError, ConfigError, ConvergenceError, DegenerateInputError, DppFlowError,
                     IntegrationError, InvalidInputError, NumericError, SchemaVersionError,
                     SingularKernelError, TrainingError, TransportError)
from .gmm import GmmSpec, count_modes, gmm_noised_score, gmm_sample, make_random_gmm, make_source_8gauss
from .sampler import (GuidanceConfig, InpaintTask, ParticleBatch, SolverConfig, diverse_step,
                      estimate_x0, estimate_x1, gamma, mcg_inpaint, particle_guidance_step,
                      progressive_sample, sample_flow, sample_ideal_score)
from .velocity import (Checkpoint, VelocityField, forward, init_field, load_checkpoint, save_checkpoint,
                       vjp_input, vjp_params)

__version__ = "0.1.0"
