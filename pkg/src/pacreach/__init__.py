"""PAC-certified support and reachable-set estimation.

Estimate the support of a random variable (for instance, the forward
reachable set of a dynamical system sampled by simulation) as a sublevel set
of an empirical inverse Christoffel function, with a finite-sample
probably-approximately-correct certificate attached to the estimate.
"""

from .algorithms import (AlgorithmConfig, ArraySource, CoverageReport,
                         fit_classical, fit_pacbayes_kernel, fit_pacbayes_poly,
                         training_rng, validate_estimate, validation_rng)
from .bounds import (IterationRecord, PacCertificate, bernoulli_kl,
                     central_concept_scale, chi2_cdf_1dof,
                     classical_sample_bound, empirical_stochastic_risk,
                     epsilon_schedule, gaussian_kl_generic,
                     gaussian_kl_kernel_dense, gaussian_kl_kernel_spectral,
                     gaussian_kl_kernel_truncated, gaussian_kl_poly,
                     kl_inverse_upper, pacbayes_risk_bound)
from .errors import CapacityError, IntegrationError
from .estimators import (AffineTransform, KernelChristoffel,
                         NystromChristoffel, PolyChristoffel, SupportEstimate,
                         estimate_from_dict, estimate_to_dict, membership)
from .kernels import (PolynomialInnerProductKernel, SquaredExponentialKernel,
                      kernel_from_spec)
from .polybasis import MultiIndexBasis, basis_dimension
from .systems import (DynamicalSystem, ReachProblem, ReachSampler,
                      duffing, duffing_problem, interval_hull,
                      monotone_interval_hull, quadrotor, quadrotor_problem,
                      reach_sampler, rk4_integrate, traffic, traffic_problem)

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "AlgorithmConfig",
    "ArraySource",
    "CapacityError",
    "CoverageReport",
    "DynamicalSystem",
    "IntegrationError",
    "IterationRecord",
    "KernelChristoffel",
    "MultiIndexBasis",
    "NystromChristoffel",
    "PacCertificate",
    "PolyChristoffel",
    "PolynomialInnerProductKernel",
    "ReachProblem",
    "ReachSampler",
    "SquaredExponentialKernel",
    "SupportEstimate",
    "basis_dimension",
    "bernoulli_kl",
    "central_concept_scale",
    "chi2_cdf_1dof",
    "classical_sample_bound",
    "duffing",
    "duffing_problem",
    "empirical_stochastic_risk",
    "epsilon_schedule",
    "estimate_from_dict",
    "estimate_to_dict",
    "fit_classical",
    "fit_pacbayes_kernel",
    "fit_pacbayes_poly",
    "gaussian_kl_generic",
    "gaussian_kl_kernel_dense",
    "gaussian_kl_kernel_spectral",
    "gaussian_kl_kernel_truncated",
    "gaussian_kl_poly",
    "interval_hull",
    "kernel_from_spec",
    "kl_inverse_upper",
    "membership",
    "monotone_interval_hull",
    "pacbayes_risk_bound",
    "quadrotor",
    "quadrotor_problem",
    "reach_sampler",
    "rk4_integrate",
    "traffic",
    "traffic_problem",
    "training_rng",
    "validate_estimate",
    "validation_rng",
]
