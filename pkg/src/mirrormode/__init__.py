"""Steady-state emission of a driven qubit at a mirror.

Simulates the coherently driven two-level emitter terminating a semi-infinite
waveguide, captures its output into user-defined temporal modes, and runs the
tomography chain: field moments, maximum-likelihood state reconstruction,
Wigner function, and Wigner logarithmic negativity.
"""

from .errors import (BudgetExhausted, ConfigError, ConvergenceError,
                     DegenerateError, IllConditionedError, IntegratorError,
                     MirrorModeError, NoSolutionError, RankError,
                     TruncationError, UnresolvedError, WindowError)
from .hilbert import (FockSpace, coherent_density, create, destroy,
                      displaced_fock_block, displacement_leakage,
                      displacement_operator, expm, fock_density, fock_state,
                      kron, number_op, padded_space_for, parity_operator,
                      partial_trace_first)
from .qubit import (BoundaryModel, QubitState, ReflectionFit, SystemParams,
                    compensate_mismatch, critical_drive,
                    dephasing_from_flux_noise, fit_reflection, hamiltonian,
                    liouvillian, mismatch_from_boundary, mismatch_scale,
                    reflection_coefficient, steady_state_analytic,
                    steady_state_numeric, weak_probe_reflection)
from .spectrum import (CalibrationFit, RabiFit, Spectrum, emission_spectrum,
                       fit_gain, fit_rabi_from_psd, psd, rabi_to_power,
                       sideband_positions, two_time_correlation)
from .temporal import (CaptureResult, SimOptions, TemporalFilter,
                       capture_coupling, coherent_amplitude, make_boxcar,
                       make_custom, make_gaussian, moment_oracle_low_order,
                       simulate_capture)
from .tomography import (MomentSet, RecordBatch, ReconstructionResult,
                         displace_moments, displace_state, fidelity,
                         mle_reconstruct, moments_from_records,
                         moments_from_state, state_summary,
                         synthesize_records)
from .wigner import (ConvergenceReport, WignerGrid, fock_wln_exact,
                     grid_converged, wigner_grid, wigner_point_reference,
                     wln, wln_of_state)

__version__ = "0.1.0"
