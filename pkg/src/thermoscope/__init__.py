"""Thermodynamic formalism for expanding circle maps.

Pressure curves, phase transitions, transfer-operator spectra and
Birkhoff entropy spectra for full-branch circle maps, including
intermittent maps with a neutral fixed point.
"""

from .circle_map import CircleMap, build_linear, build_mp, build_piecewise_poly
from .circle_map import from_spec as map_from_spec
from .estimators import PressureEstimator, SpectrumEstimator
from .exceptions import (DomainError, InvalidMapError, NumericError, ResolutionError,
                         ResourceError, SpecError, ThermoscopeError)
from .potential import Potential, combine, constant, geometric, indicator, scale
from .potential import from_spec as potential_from_spec
from .pressure import (PressureConfig, PressureCurve, PressureSolver, TransitionReport, beta_max,
                       beta_min, cohomologous_to_constant, is_expanding, is_hyperbolic, pressure,
                       pressure_curve, transition_points)
from .spectra import (RateFunction, SpectrumResult, birkhoff_spectrum, delta_regions,
                      ld_interval, rate_function)
from .transfer_op import (apply, ess_radius_bound, growth_rate_pressure, leading_eigenpair,
                          spectral_report, subleading_modulus, ulam_matrix)

__version__ = "0.1.0"
