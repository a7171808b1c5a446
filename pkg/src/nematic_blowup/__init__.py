"""Simulation and diagnostics for the Poiseuille-reduced Ericksen-Leslie system.

A parabolic equation for the axial velocity v(r, t) is coupled to a damped
k-equivariant wave map for the director angle phi(r, t); the package
evolves both on a radial grid, tracks the concentration scale lambda(t) of
the harmonic-map profile and reports the associated energy functionals.
"""

from .config import RunConfig, default_config, load_config, parse_config
from .diagnostics import EnergyReport, dissipation_residual, energy_report, h_energy_report
from .evolution import FieldState, SchemeConfig, evolve, stable_dt, step, step_h_formulation
from .grid import RadialGrid, build_grid
from .initial_data import BumpFamily, InitialDataSpec, build_initial, build_profile_state
from .modulation import LambdaTracker, ModulationTrack, extract_lambda, lambda_ode_rhs, riccati_monitor
from .profiles import ProfileParams, profile_constants
from .runner import resume, run, sweep, verify

__version__ = "0.1.0"
