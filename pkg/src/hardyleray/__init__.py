"""Numerical toolkit for the Hardy-Leray operator -Delta + mu/|x|^2 on balls."""

__version__ = "0.1.0"

from .core import (HardyParams, RadialFunction, Regime, TestFunction, apply_dual,
                   apply_dual_point, apply_hardy, bump_library, default_library,
                   derive_params, gamma_branch, green_ball_closed, phi, sphere_area,
                   translated, xi0_ball_closed, xi0_test_function)
from .errors import (DivergentIntegral, DomainError, HardyError, Inconclusive,
                     InvalidDimension, NoLimit, NoSolution, NumericFailure, ProbeFailure,
                     SingularDiagonal, ToleranceNotMet, TruncationError, UnknownKind,
                     UnsupportedRegime, WrongRegime)
from .green import (BoundReport, GreenKernelSeries, check_kernel_bounds, green_apply,
                    green_kernel, mode_green)
from .probes import (EigenCurve, ExhaustionSeries, OscillationReport, SourceClass,
                     classify_source, eigen_scan, nonexistence_probe, sub_hardy_probe)
from .quadrature import (QuadratureSpec, integrate_weighted, rho_weighted_l1_norm,
                         weighted_l1_norm)
from .solver import (RadialSolution, approximate_green_mollifier,
                     extract_singularity_coefficient, solve_annulus, solve_dual_radial,
                     solve_radial_bvp)
from .verifier import (IdentityResidual, InequalityReport, check_kato, classify_solution,
                       verify_fundamental_identity, verify_green_identity,
                       verify_weak_solution)
