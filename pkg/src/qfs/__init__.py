"""Simulator and stability analyzer for a ladder atom in a cavity with
delayed waveguide feedback."""

from .model import (SystemConfig, WaveguideArrayConfig, BasisIndex,
                    DelaySystem, build_cavity_delay_system,
                    build_real_embedding, zero_delay_variant,
                    complex_from_real, build_gw_matrix, upsilon_norm,
                    upsilon_norm_bruteforce, upsilon_sup_norm)
from .dde import Trajectory, DivergenceError, integrate_delay, integrate_ode
from .spectral import (analytic_three_level, final_values,
                       detuned_dark_state_check, QuasiPolynomial,
                       rightmost_roots)
from .stability import (StabilityCertificate, check_certificate,
                        search_certificate, verify_envelope)
from .parallel import (propagate_single_excitation, characteristic_poles,
                       no_photon_criterion)
from .fullsim import (ModeGrid, SimResult, simulate_single_waveguide,
                      simulate_waveguide_array, delay_kernel_check)

__version__ = "0.1.0"
