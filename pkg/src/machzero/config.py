"""Flat ``section.key = value`` run configuration with a strict schema."""
import dataclasses
from dataclasses import dataclass, fields
from typing import Optional, Tuple

from .errors import ConfigError
from .gas import CutoffSpec, ForcePotential, GasLaw
from .geometry import NozzleMap, Window

__all__ = ["RunConfig", "load_config", "parse_config", "REQUIRED_KEYS"]

REQUIRED_KEYS = ("geometry.kind", "domain.L", "mesh.nx", "mesh.nt", "gas.kind", "flow.m")


@dataclass(frozen=True)
class RunConfig:
    geometry_kind: str
    domain_L: float
    mesh_nx: int
    mesh_nt: int
    gas_kind: str
    flow_m: float
    geometry_amplitude: float = 0.0
    geometry_period: float = 4.0
    gas_gamma: float = 1.4
    cutoff_theta: float = 0.5
    cutoff_eps0: float = 0.2
    force_kind: str = "zero"
    force_g: float = 0.0
    force_axis: int = 0
    force_center_x1: float = 0.0
    force_center_x2: float = 0.0
    force_width: float = 1.0
    force_height: float = 0.0
    force_phi_star: Optional[float] = None
    eps: Optional[float] = None
    sweep_eps_list: Optional[Tuple[float, ...]] = None
    sweep_L_list: Optional[Tuple[float, ...]] = None
    sweep_window_a: float = -2.0
    sweep_window_b: float = 2.0
    sweep_cells_per_unit: int = 8
    solver_cg_tol: float = 1e-12
    solver_picard_tol: float = 1e-10
    solver_picard_maxit: int = 500
    output_dir: str = "out"
    output_vtk: bool = False

    def __post_init__(self):
        checks = [
            (self.domain_L > 0, "domain.L must be positive"),
            (self.mesh_nx >= 2 and self.mesh_nt >= 2, "mesh.nx and mesh.nt must be >= 2"),
            (self.gas_kind != "polytropic" or self.gas_gamma > 1, "gas.gamma must exceed 1"),
            (0 < self.cutoff_theta < 1, "cutoff.theta must lie in (0, 1)"),
            (0 < self.cutoff_eps0 < 1, "cutoff.eps0 must lie in (0, 1)"),
            (self.eps is None or 0 < self.eps <= self.cutoff_eps0, "eps must lie in (0, cutoff.eps0]"),
            (self.sweep_eps_list is None or all(0 < e <= self.cutoff_eps0 for e in self.sweep_eps_list),
             "sweep.eps_list entries must lie in (0, cutoff.eps0]"),
            (self.sweep_L_list is None or all(L > 0 for L in self.sweep_L_list),
             "sweep.L_list entries must be positive"),
            (0 < self.solver_cg_tol < 1 and 0 < self.solver_picard_tol < 1,
             "solver tolerances must lie in (0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def nozzle(self):
        return NozzleMap(self.geometry_kind, self.geometry_amplitude, self.geometry_period)

    def gas(self):
        return GasLaw(self.gas_kind, self.gas_gamma)

    def cutoff(self):
        return CutoffSpec(self.cutoff_theta, self.cutoff_eps0)

    def force(self):
        return ForcePotential(self.force_kind, self.force_g, self.force_axis,
                              (self.force_center_x1, self.force_center_x2),
                              self.force_width, self.force_height, self.force_phi_star)

    def window(self):
        return Window(self.sweep_window_a, self.sweep_window_b)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def _key_to_field(key):
    return key.replace(".", "_")


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name, raw):
    t = str(_FIELDS[name].type)
    try:
        if raw.lower() in ("none", "") and "Optional" in t:
            return None
        if "Tuple" in t:
            return tuple(float(x) for x in raw.replace(",", " ").split())
        if "bool" in t:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if "int" in t:
            return int(raw)
        if "float" in t:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for key {name.replace('_', '.', 1)!r}") from None


def parse_config(text):
    """Parse config text; unknown or duplicate keys and missing required keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        name = _key_to_field(key)
        if name not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if name in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[name] = _convert(name, raw)
    for key in REQUIRED_KEYS:
        if _key_to_field(key) not in values:
            raise ConfigError(f"missing required key {key!r}")
    return RunConfig(**values)


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
