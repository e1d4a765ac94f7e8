"""
noisereversal removes a known total of background photons from measured
photon counts by choosing the noise field that leaves the smoothest signal
behind.

the measured data is M, the noise field N (nonnegative integers, summing to
a given total), and the recovered signal M - N. smoothness is the sum over
pixels of the squared second difference

    C(N) = sum_i ((M_i - N_i) - ((M_{i-1} - N_{i-1}) + (M_{i+1} - N_{i+1})) / 2)^2

which is a quadratic polynomial in N. minimizing it under the sum constraint
is the same problem an optical machine with a fixed photon count solves by
relaxing a mean field toward its ground state; this package emulates that.

layers, bottom up:

    polynomial   sum-constrained polynomials of degree <= 3, stored once per
                 monomial, with batched energy and gradient kernels
    smoothness   maps a measured frame (and optional neighboring columns) to
                 such a polynomial
    solver       mean-field relaxation on the scaled simplex with annealed
                 noise and restarts, then rounding and integer local search;
                 an exhaustive solver for small instances
    pipeline     1d frames whole or in blocks, 2d images column by column
    datagen      decaying-sinusoid ground truths and Poisson corruption
    metrics      rmse and improvement factors, report documents
    serialization JSON documents, CSV grids, PGM previews
    cli          the `noisereversal` command

randomness comes from explicit seeds only. the same inputs and seed give the
same outputs, byte for byte, whatever the thread count (NR_THREADS).
"""

from .errors import (NoiseReversalError, ContractViolation, NumericOverflow,
        InputError, SolverError, InvalidDocument)
from .polynomial import SumConstrainedPolynomial, evaluate, gradient, validate
from .smoothness import (MeasuredFrame, BoundaryPolicy, CrossColumnContext,
        build_cost_form, residual_cost, augment_cross_column)
from .solver import (SolverConfig, SolveReport, mean_field_solve, brute_force,
        round_to_integers, integer_local_search)
from .pipeline import (Image2D, DenoiseResult, BudgetPolicy, denoise_1d,
        denoise_1d_blocked, denoise_2d, check_hardware_profile)
from .datagen import (CorruptionSpec, decaying_sinusoid_1d,
        decaying_sinusoid_2d, poisson_corrupt, estimate_noise_total)
from .metrics import RecoveryMetrics, compute_metrics
from .serialization import dumps, loads


VERSION = (0, 1, 0, "")
__version__ = ".".join(filter(None, map(str, VERSION)))


__all__ = ["NoiseReversalError", "ContractViolation", "NumericOverflow",
        "InputError", "SolverError", "InvalidDocument",
        "SumConstrainedPolynomial", "evaluate", "gradient", "validate",
        "MeasuredFrame", "BoundaryPolicy", "CrossColumnContext",
        "build_cost_form", "residual_cost", "augment_cross_column",
        "SolverConfig", "SolveReport", "mean_field_solve", "brute_force",
        "round_to_integers", "integer_local_search",
        "Image2D", "DenoiseResult", "BudgetPolicy", "denoise_1d",
        "denoise_1d_blocked", "denoise_2d", "check_hardware_profile",
        "CorruptionSpec", "decaying_sinusoid_1d", "decaying_sinusoid_2d",
        "poisson_corrupt", "estimate_noise_total",
        "RecoveryMetrics", "compute_metrics", "dumps", "loads"]
