"""Pseudo-spectral vorticity simulations of 3D MHD with transport noise.

Layout:
  lattice     wavevector sets, sign partition, per-mode frames
  fields      spectral vector fields, projections, Biot-Savart, norms
  transforms  grid transforms and alias-free product evaluation
  operators   Lie derivatives, stretching coupling, quadratic drift, cutoff
  corrector   Stratonovich-to-Ito drift correction and its diffusive limit
  noise       shell weights, complex Brownian increments, transport term
  integrator  exponential Euler-Maruyama stepping and trajectories
  experiments desk-scale studies (corrector limit, scaling limit, decay,
              global existence frequency, energy budget)
  config/cli  TOML run configuration and the command-line entry point
  results_io  CSV tables, binary snapshots, manifests
  kernels     numba hot loops with numpy fallbacks (VORTEXNOISE_NUMBA)
"""

from .lattice import Lattice, build_lattice, frame_vectors
from .fields import (SpectralField, State, biot_savart, curl, initial_state,
                     l2_inner, laplacian, leray_perp, leray_project,
                     random_solenoidal, sobolev_norm, state_sobolev_norm,
                     zero_field)
from .transforms import transform_to_grid, transform_to_spectrum
from .operators import (CutoffFn, PhysicsParams, cutoff_value, lie_adjoint,
                        lie_derivative, nonlinearity_b, stretching_T)
from .corrector import (angular_integral_check, assemble_corrector_matrices,
                        corrector_limit, corrector_perp, corrector_S_theta,
                        shell_sin4_average)
from .noise import (BrownianDriver, ThetaSequence, make_theta_N, noise_term,
                    sample_increments)
from .integrator import (DiagnosticsRecord, RunConfig, Trajectory,
                         galerkin_project, simulate, step_deterministic,
                         step_stochastic, suggest_dt)
from .errors import BlowUpError, ConfigError, ContractViolation, VortexNoiseError

__version__ = "0.1.0"
