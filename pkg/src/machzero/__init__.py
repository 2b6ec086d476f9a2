"""Steady potential flow in infinite nozzles and its low Mach number limit."""
from .errors import (AssemblyError, ConfigError, DomainError, GeometryError, MachZeroError,
                     NumericalError, RangeError)
from .gas import CutoffKnots, CutoffSpec, ForcePotential, GasLaw
from .geometry import Mesh, NozzleMap, Window, build_mesh
from .fem import ScalarField
from .incompressible import FlowState, incompressible_state, solve_incompressible
from .compressible import (CompressibleSolution, compressible_state, find_eps_c,
                           solve_compressible)
from .limit_lab import SweepReport, fit_rate, run_eps_sweep, run_L_sweep
from .config import RunConfig, load_config, parse_config

__version__ = "0.1.0"
