"""sdelab: a numerical laboratory for linear diffusion SDE samplers."""

from .bounds import BoundInputs, OrderFit, cvp_bound, discretization_order, \
    sampling_error_bound, u_of_t
from .datasets import DatasetSpec, empirical_target, generate_dataset, swiss_roll
from .errors import (CapabilityError, ConfigurationError, DomainError,
                     IntegrationDivergedError, SdelabError,
                     SingularDensityError, UsageError)
from .matching import dsm_loss, esm_loss, ism_loss, ssm_loss
from .sampler import (DecayRecord, ReverseProcess, SamplerConfig,
                      TrajectoryBatch, corrector_update, coupled_contraction,
                      langevin_chain, reverse_drift, sample, sample_em,
                      sample_forward, sample_pc)
from .scores import (AffineScoreFamily, NoiseModel, NoiseMode, NoisyScoreField,
                     ScoreField, mixture_score_field, noisy_score)
from .sde import (CONTRACTIVE_KINDS, ContractionProfile, DiffusionSpec,
                  PerturbationKernel, PriorSpec, SDEKind, contraction_profile,
                  diffusion_coeff, drift_factor, kernel, kernel_arrays, prior)
from .targets import (LipschitzEstimate, MixtureTarget, exact_score,
                      exact_score_divergence, gaussian, marginal_logdensity,
                      marginal_params, point_mass, score_lipschitz)
from .transform import (PreconditionReport, TransformMap, check_precondition,
                        tau, transport_logdensity, transport_score)
from .wasserstein import (W2Report, bootstrap_stderr, w2_assignment, w2_auto,
                          w2_gaussian, w2_sinkhorn, w2_sorted_1d)

__version__ = "0.1.0"
