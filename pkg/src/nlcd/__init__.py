"""Numerical study of nonlocal convection-diffusion ``u_t = J*u - u - a(|u|^{q-1}u)_x``."""
__version__ = "0.1.0"

from .grid import (Field, Grid, OutOfRangeError, field_at_time, interpolate, lp_norm, mass,
                   read_field_csv, rescale, tail_mass, total_variation, write_field_csv)
from .kernel import (Box, Bump, DiscreteKernel, Exponential, Gaussian, KernelSpec, Scaled,
                     TabulatedEven, convolve, discretize, fourier_constants, load_tabulated_csv,
                     second_moment)
from .solver import (SCHEMES, CFLViolation, SolutionStore, SolverAbort, SolverConfig,
                     energy_ledger_check, entropy_residual, run, stable_dt, step,
                     vanishing_viscosity_compare)
from .profiles import (BurgersProfile, HeatProfile, make_profile, profile_residual,
                       self_similarity_check)
from .analysis import (DecayFit, IneqReport, audit_balance, audit_est_ariba, audit_local_sup,
                       check_balance, check_est_ariba, check_local_sup, decay_exponent,
                       fourier_splitting_bound, renormalized_distance, rescaled_l1_distance,
                       tail_bound_check)
from .experiment import ExperimentSpec, RunManifest, SpecError, emit_plot_data, execute, load_spec
