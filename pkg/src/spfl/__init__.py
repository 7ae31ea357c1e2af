"""Simulation and design tools for a dispersion-managed nonlinear Sagnac fiber loop
that routes photon pairs to the same or to different output ports."""

from .design import detuning_sensitivity, solve_length_difference, switching_table
from .detection import (CountRecord, DetectorSpec, SourceSpec, power_sweep, simulate_counts,
                        sweep_experiment, true_coincidence)
from .dispersion import (FiberSpec, FrequencyQuad, LoopConfig, detuning_to_omega,
                         omega_to_detuning, phase_mismatch, phi_d_approx, phi_d_exact,
                         pump_reflectivity, wavevector)
from .pairstate import (RoutingProbabilities, TwoPhotonState, output_state,
                        routing_probabilities, single_counts_marginal, switching_detuning,
                        total_phase)
from .spectral import (FilterSpec, SpectralConfig, SweepCurve, bandwidth_averaged_fringe,
                       contrast_ratio, fit_fringe, fringe_argument_root, fringe_model)

__version__ = "0.1.0"
