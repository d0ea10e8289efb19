"""Scenario presets, initial conditions, snapshot output and the H sweep."""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagnosticsReport, Tolerances, mixing_fraction, write_diagnostics_csv
from .errors import BlowupError, ConfigurationError, InputError, StratVortexError
from .grid import Grid, Placement, State, apply_wall_bc, make_grid, vorticity
from .poisson import nodal_laplacian, solve_dirichlet_nodes
from .solver import SolverConfig, project
from .stratification import (
    StratificationProfile,
    background_density,
    buoyancy_frequency,
    hydrostatic_pressure,
)

log = logging.getLogger(__name__)

OUTPUT_ENV = "STRATVORTEX_OUTPUT_DIR"
PRESETS = ("baseline", "coarse", "H-half", "H-double", "H-huge", "homogeneous", "tank-50cm")
DESK_H = 0.005


@dataclass(frozen=True)
class GridSpec:
    width: float = 1.0
    height: float = 0.25
    h: float = 0.0025


@dataclass(frozen=True)
class VortexParams:
    """Gaussian streamfunction A exp(-((x-x0)/lx)^2 - ((z-z0)/lz)^2)."""

    A: float = -0.0095
    lx: float = 0.16
    lz: float = 0.052
    x0: float = 0.5
    z0: float = 0.125

    def psi(self, x, z):
        return self.A * np.exp(-(((x - self.x0) / self.lx) ** 2) - ((z - self.z0) / self.lz) ** 2)

    def u(self, x, z):
        return -2.0 * (z - self.z0) / self.lz**2 * self.psi(x, z)

    def w(self, x, z):
        return 2.0 * (x - self.x0) / self.lx**2 * self.psi(x, z)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "baseline"
    grid: GridSpec = GridSpec()
    profile: StratificationProfile = StratificationProfile()
    vortex: VortexParams = VortexParams()
    t_end: float = 14.0
    snapshot_times: tuple = (3.0, 7.0, 8.0, 9.0, 14.0)
    diag_interval: int = 1
    solver: SolverConfig = SolverConfig()
    output_dir: str | None = None

    def validate(self) -> None:
        if self.t_end < 0:
            raise ConfigurationError("t_end must be non-negative")
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_end:
                raise ConfigurationError(f"snapshot time {t} outside [0, {self.t_end}]")
        if self.diag_interval < 1:
            raise ConfigurationError("diag_interval must be at least 1")
        v, g = self.vortex, self.grid
        if not (0 < v.x0 < g.width and 0 < v.z0 < g.height):
            raise ConfigurationError(f"vortex centre ({v.x0}, {v.z0}) is not inside the domain")
        self.profile.check_domain(g.height)

    def make_grid(self) -> Grid:
        return make_grid(self.grid.width, self.grid.height, self.grid.h)


def preset(name: str) -> ScenarioConfig:
    base = ScenarioConfig()
    exp = StratificationProfile("exponential", 1000.0, 6.23)
    table = {
        "baseline": base,
        "coarse": dataclasses.replace(base, grid=GridSpec(h=DESK_H)),
        "H-half": dataclasses.replace(base, profile=dataclasses.replace(exp, H=3.1)),
        "H-double": dataclasses.replace(base, profile=dataclasses.replace(exp, H=12.4)),
        "H-huge": dataclasses.replace(base, profile=dataclasses.replace(exp, H=311.5), t_end=7.0,
                                      snapshot_times=(3.0, 6.0, 7.0)),
        "homogeneous": dataclasses.replace(base, profile=StratificationProfile("constant", 1000.0)),
        "tank-50cm": dataclasses.replace(base, grid=GridSpec(width=0.5),
                                         vortex=dataclasses.replace(base.vortex, x0=0.25)),
    }
    if name not in table:
        raise ConfigurationError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}")
    return dataclasses.replace(table[name], name=name)


# -- overrides and config files ------------------------------------------------

ALIASES = {"h": "grid.h", "H": "profile.H", "t-end": "t_end", "out": "output_dir"}


def _coerce(value, current, key):
    if not isinstance(value, str):
        return tuple(float(v) for v in value) if isinstance(current, tuple) else value
    text = value.strip()
    try:
        if isinstance(current, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError as exc:
        raise ConfigurationError(f"bad value {value!r} for {key}") from exc
    if text.lower() in ("null", ""):
        return None
    return text


def apply_overrides(cfg: ScenarioConfig, overrides: dict | None) -> ScenarioConfig:
    """Return a copy with dotted-key overrides applied, e.g. {"grid.h": 0.005}."""
    for key, value in (overrides or {}).items():
        path = ALIASES.get(key, key).split(".")
        cfg = _set_path(cfg, path, value, key)
    return cfg


def _set_path(obj, path, value, key):
    names = {f.name for f in dataclasses.fields(obj)}
    if path[0] not in names:
        raise ConfigurationError(f"unknown configuration key {key!r}")
    current = getattr(obj, path[0])
    if len(path) == 1:
        new = _coerce(value, current, key)
    else:
        if not dataclasses.is_dataclass(current):
            raise ConfigurationError(f"unknown configuration key {key!r}")
        new = _set_path(current, path[1:], value, key)
    return dataclasses.replace(obj, **{path[0]: new})


def parse_key_values(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> ScenarioConfig:
    """Read a key=value scenario file.

    ``name`` selects the starting preset when it names one (otherwise the
    baseline preset is used and renamed); every other key is a dotted
    ScenarioConfig field path.
    """
    with open(path) as fh:
        values = parse_key_values(fh.read())
    name = values.pop("name", "baseline")
    cfg = preset(name) if name in PRESETS else dataclasses.replace(preset("baseline"), name=name)
    return apply_overrides(cfg, values)


def default_output_dir(name: str) -> str:
    return os.path.join(os.environ.get(OUTPUT_ENV, "output"), name)


# -- initial conditions ---------------------------------------------------------

def gaussian_vortex_init(grid: Grid, profile: StratificationProfile, vortex: VortexParams,
                         cfg: SolverConfig | None = None) -> State:
    """Undisturbed density plus the Gaussian-streamfunction vortex.

    Face velocities are the analytic derivatives of the streamfunction; wall
    faces are zeroed and one projection removes the residual discrete
    divergence. Pressure starts in discrete hydrostatic balance.
    """
    cfg = cfg or SolverConfig()
    xs, zs = grid.coords(Placement.NODE)
    wall_psi = max(
        np.max(np.abs(vortex.psi(xs, 0.0))), np.max(np.abs(vortex.psi(xs, grid.height))),
        np.max(np.abs(vortex.psi(0.0, zs))), np.max(np.abs(vortex.psi(grid.width, zs))),
    )
    if wall_psi > 1e-6 * abs(vortex.A):
        warnings.warn(
            f"vortex streamfunction reaches {wall_psi / abs(vortex.A):.2e} of |A| on the walls",
            stacklevel=2,
        )
    rho = background_density(grid, profile)
    xu, zu = grid.mesh(Placement.XFACE)
    xw, zw = grid.mesh(Placement.ZFACE)
    state = State(0.0, rho, vortex.u(xu, zu), vortex.w(xw, zw))
    state = project(apply_wall_bc(state), 1.0, grid, cfg)
    state.p = hydrostatic_pressure(grid, rho)
    return state


def standing_wave_frequency(profile: StratificationProfile, width: float, height: float,
                            mode: tuple[int, int] = (2, 1)) -> float:
    """Linear dispersion N kx / |k| for the (m, n) box mode."""
    kx = mode[0] * math.pi / width
    kz = mode[1] * math.pi / height
    return buoyancy_frequency(profile) * kx / math.hypot(kx, kz)


def standing_wave_init(grid: Grid, profile: StratificationProfile, amplitude: float,
                       mode: tuple[int, int] = (2, 1)) -> State:
    """Box-mode standing internal wave at maximum velocity, density undisturbed.

    The velocity is the discrete curl of psi = sin(m pi x / W) sin(n pi z / D)
    on nodes, so it is exactly divergence free; it is scaled so that the
    largest face speed equals ``amplitude``.
    """
    xn, zn = grid.mesh(Placement.NODE)
    psi = np.sin(mode[0] * np.pi * xn / grid.width) * np.sin(mode[1] * np.pi * zn / grid.height)
    u = np.diff(psi, axis=1) / grid.h
    w = -np.diff(psi, axis=0) / grid.h
    scale = amplitude / max(np.max(np.abs(u)), np.max(np.abs(w)))
    rho = background_density(grid, profile)
    return State(0.0, rho, u * scale, w * scale, hydrostatic_pressure(grid, rho))


def build_initial_state(scenario: ScenarioConfig, grid: Grid) -> State:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore" if scenario.name in PRESETS else "default")
        return gaussian_vortex_init(grid, scenario.profile, scenario.vortex, scenario.solver)


# -- streamfunction and snapshots ------------------------------------------------

def diagnose_streamfunction(state: State, grid: Grid, cfg: SolverConfig | None = None,
                            strict: bool = False, rtol: float = 1e-6) -> np.ndarray:
    """Nodal psi with laplacian(psi) = xi and psi = 0 on the walls.

    u = dpsi/dz and w = -dpsi/dx, so the vorticity du/dz - dw/dx equals the
    Laplacian of psi. With ``strict``, a velocity field that psi cannot
    reproduce (relative mismatch above ``rtol``) raises InputError.
    """
    xi = vorticity(state, grid)
    psi = solve_dirichlet_nodes(xi[1:-1, 1:-1], grid.h)
    tol = cfg.poisson_tol if cfg is not None else 1e-10
    scale = max(np.max(np.abs(xi)), 1e-300)
    resid = np.max(np.abs(nodal_laplacian(psi, grid.h) - xi[1:-1, 1:-1])) / scale
    if resid > max(tol, 1e-9):
        from .errors import ConvergenceError

        raise ConvergenceError(f"streamfunction residual {resid:.3e}")
    if strict:
        mismatch = streamfunction_mismatch(state, grid, psi)
        if mismatch > rtol:
            raise InputError(
                f"velocity is not representable by a streamfunction vanishing on the walls "
                f"(relative mismatch {mismatch:.3e})"
            )
    return psi


def streamfunction_mismatch(state: State, grid: Grid, psi: np.ndarray) -> float:
    """Max velocity difference between the state and the curl of psi, relative to max speed."""
    u = np.diff(psi, axis=1) / grid.h
    w = -np.diff(psi, axis=0) / grid.h
    scale = max(np.max(np.abs(state.u)), np.max(np.abs(state.w)))
    if scale == 0:
        return 0.0
    return float(max(np.max(np.abs(u - state.u)), np.max(np.abs(w - state.w))) / scale)


@dataclass
class Snapshot:
    t: float
    rho: np.ndarray
    u: np.ndarray
    w: np.ndarray
    p: np.ndarray
    psi: np.ndarray
    xi: np.ndarray

    def state(self) -> State:
        return State(self.t, self.rho.copy(), self.u.copy(), self.w.copy(), self.p.copy())


def make_snapshot(state: State, grid: Grid) -> Snapshot:
    return Snapshot(state.t, state.rho.copy(), state.u.copy(), state.w.copy(), state.p.copy(),
                    diagnose_streamfunction(state, grid), vorticity(state, grid))


def _node_to_cell(a):
    return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])


def write_snapshot(snapshot: Snapshot, grid: Grid, path) -> str:
    """CSV: ``# t=.. nx=.. nz=.. h=..`` header then x,z,rho,u,w,psi,xi per cell.

    Cells are written row by row (z index outer, x index inner) with 9
    significant digits; face and node fields are averaged to cell centres.
    """
    x, z = grid.mesh(Placement.CELL)
    cols = [
        x, z, snapshot.rho,
        0.5 * (snapshot.u[:-1] + snapshot.u[1:]),
        0.5 * (snapshot.w[:, :-1] + snapshot.w[:, 1:]),
        _node_to_cell(snapshot.psi), _node_to_cell(snapshot.xi),
    ]
    flat = np.column_stack([c.T.ravel() for c in cols])
    lines = [f"# t={snapshot.t:.9g} nx={grid.nx} nz={grid.nz} h={grid.h:.9g}"]
    lines += [",".join(f"{v:.9g}" for v in row) for row in flat]
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc
    return str(path)


def read_snapshot(path) -> tuple[dict, dict]:
    """Inverse of write_snapshot: (metadata, cell-centred arrays of shape (nx, nz))."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise InputError(f"{path}: missing metadata header")
        meta = {}
        for token in header[1:].split():
            key, value = token.split("=")
            meta[key] = int(value) if key in ("nx", "nz") else float(value)
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    nx, nz = meta["nx"], meta["nz"]
    names = ("x", "z", "rho", "u", "w", "psi", "xi")
    fields_ = {n: data[:, j].reshape(nz, nx).T for j, n in enumerate(names)}
    return meta, fields_


def snapshot_filename(t: float) -> str:
    return f"snapshot_t{t:08.3f}.csv"


def write_run_outputs(scenario: ScenarioConfig, snapshots, report: DiagnosticsReport, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    grid = scenario.make_grid()
    for snap in snapshots:
        write_snapshot(snap, grid, os.path.join(out_dir, snapshot_filename(snap.t)))
    write_diagnostics_csv(report.samples, os.path.join(out_dir, "diagnostics.csv"))


# -- sweep ---------------------------------------------------------------------

SWEEP_TIME = 7.0


@dataclass
class SweepRow:
    name: str
    H: float
    mixing_fraction: float
    F_initial: float
    F_final: float
    report: DiagnosticsReport | None = None
    error: str | None = None

    @property
    def F_decay(self) -> float:
        """Relative decrease of F over the run (F is negative, so decay is positive)."""
        if self.F_initial == 0:
            return self.F_initial - self.F_final
        return (self.F_initial - self.F_final) / abs(self.F_initial)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def table(self) -> str:
        head = f"{'scenario':<12} {'H [m]':>9} {'mix(7s)':>9} {'F decay':>10}  status"
        lines = [head]
        for r in self.rows:
            status = "ok" if r.error is None else f"error: {r.error}"
            if r.error is None and r.report is not None and r.report.verdict is not None:
                status = "ok" if r.report.verdict.passed else "inadmissible"
            lines.append(f"{r.name:<12} {r.H:>9.4g} {r.mixing_fraction:>9.4f} {r.F_decay:>10.3e}  {status}")
        return "\n".join(lines)


def _sweep_one(args):
    from .solver import run

    cfg, tol = args
    if cfg.t_end >= SWEEP_TIME:
        cfg = dataclasses.replace(cfg, snapshot_times=tuple(sorted(set(cfg.snapshot_times) | {SWEEP_TIME})))
    H = cfg.profile.scale_height
    try:
        snapshots, report = run(cfg)
    except (BlowupError, StratVortexError) as exc:
        return SweepRow(cfg.name, H, math.nan, math.nan, math.nan, None, str(exc))
    report.evaluate(tol)
    grid = cfg.make_grid()
    mix = math.nan
    for snap in snapshots:
        if abs(snap.t - SWEEP_TIME) < 1e-9:
            mix = mixing_fraction(snap.state(), grid)
    if cfg.output_dir:
        write_run_outputs(cfg, snapshots, report, cfg.output_dir)
    return SweepRow(cfg.name, H, mix, report.samples[0].F, report.samples[-1].F, report)


def run_sweep(names, overrides: dict | None = None, *, workers: int = 1, output_dir=None,
              tol: Tolerances | None = None) -> SweepResult:
    """Run several presets with shared overrides; rows sorted by stratification scale."""
    configs = []
    for name in names:
        cfg = apply_overrides(preset(name), overrides)
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output_dir=os.path.join(output_dir, name))
        configs.append((cfg, tol))
    if not configs:
        return SweepResult([])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, configs))
    else:
        rows = [_sweep_one(c) for c in configs]
    rows.sort(key=lambda r: r.H)
    return SweepResult(rows)
