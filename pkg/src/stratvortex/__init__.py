"""Variable-density incompressible Euler simulator for internal-wave breaking."""

from .grid import Grid, Placement, State, apply_wall_bc, discrete_divergence, make_grid
from .stratification import G, StratificationProfile, buoyancy_frequency, max_linear_phase_speed, rho0
from .solver import SolverConfig, cfl_dt, compute_fluxes, project, run, step
from .poisson import solve_variable_poisson
from .experiments import ScenarioConfig, preset, run_sweep

__all__ = [
    "G", "Grid", "Placement", "ScenarioConfig", "SolverConfig", "State", "StratificationProfile",
    "apply_wall_bc", "buoyancy_frequency", "cfl_dt", "compute_fluxes", "discrete_divergence",
    "make_grid", "max_linear_phase_speed", "preset", "project", "rho0", "run", "run_sweep",
    "solve_variable_poisson", "step",
]
__version__ = "0.1.0"
