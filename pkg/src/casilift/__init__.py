"""casilift: finite-temperature Casimir suspension solver.

Computes Lifshitz pressures and free energies between stratified dielectric
bodies in fluids, tracks suspension equilibria versus temperature (including
gravity and sphere-plate proximity geometries), and evaluates Boltzmann
statistics of suspended objects.
"""

from .constants import C, HBAR, KB
from .errors import (CasiliftError, ConfigError, DomainError, NumericalError,
                     StaticMetalError)
from .materials import (ConstantModel, DrudeModel, IdealMetalModel, Material,
                        METALLIC, OscillatorModel, TabulatedModel,
                        drude_from_doping, load_material_library,
                        dump_material_library, permittivity, static_limit,
                        tabulate)
from .stratified import (GapGeometry, Layer, Polarization, Stack, fresnel,
                         frequency_integrand, kappa, predict_sign,
                         stack_reflection, zero_frequency_reflection)
from .lifshitz import (ReflectionCache, SpectralResult, ThermalSpec,
                       classical_pressure, free_energy_area,
                       free_energy_area_T0, gap_energy_integral, matsubara_xi,
                       pressure, pressure_T0, spectral_integrands,
                       spectral_sum, temperature_correction)
from .landscape import (Bifurcation, Branch, CallableCase, Equilibrium,
                        PlateCase, SlabGravity, SphereCase, SphereGravity,
                        branch_slope, find_equilibria, pfa_energy,
                        sweep_temperature, total_energy, total_force)
from .brownian import (BoltzmannDomain, BoltzmannStats, StictionRate, barrier,
                       boltzmann_stats, counterfactual_mean, resolve_domain,
                       stats_from_potential, stiction_exponent)
from .runner import parallel_map

__version__ = "0.1.0"
