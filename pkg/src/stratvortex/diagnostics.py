"""Discrete energy/entropy functionals and admissibility verdicts.

All integrals use the midpoint rule (cell sum times h^2); velocities enter
through their cell-centre averages.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DomainError, InputError
from .grid import Grid, Placement, State, cell_velocity, vorticity
from .stratification import G, StratificationProfile, rho0

CSV_COLUMNS = ("t", "mass", "hydro_energy", "H_nonl", "H_lin", "F", "mixing_fraction")


def _z_cells(grid: Grid) -> np.ndarray:
    return grid.coords(Placement.CELL)[1][None, :]


def _background(grid: Grid, profile: StratificationProfile) -> np.ndarray:
    return rho0(profile, _z_cells(grid))


def _require_positive(rho: np.ndarray) -> None:
    if not np.all(rho > 0):
        raise DomainError("density must be positive everywhere")


def _require_exponential(profile: StratificationProfile) -> None:
    if profile.kind != "exponential":
        raise DomainError(f"wave energy functionals need an exponential profile, got {profile.kind}")


def kinetic_energy(state: State, grid: Grid) -> float:
    uc, wc = cell_velocity(state)
    return float(np.sum(0.5 * state.rho * (uc**2 + wc**2)) * grid.cell_area)


def mass(state: State, grid: Grid) -> float:
    return float(np.sum(state.rho) * grid.cell_area)


def hydro_energy(state: State, grid: Grid, g: float = G) -> float:
    """Kinetic plus gravitational potential energy per unit depth."""
    uc, wc = cell_velocity(state)
    e = state.rho * (0.5 * (uc**2 + wc**2) + g * _z_cells(grid))
    return float(np.sum(e) * grid.cell_area)


def wave_energy_density(state: State, grid: Grid, profile: StratificationProfile, g: float = G) -> np.ndarray:
    """Cellwise integrand of the nonlinear wave-energy functional.

    Written as rho|v|^2/2 + g H rho0 [(1 + eta) ln(1 + eta) - eta] with
    rho = rho0 (1 + eta), which is algebraically the same integrand but
    avoids cancelling the O(rho g z) terms.
    """
    _require_exponential(profile)
    _require_positive(state.rho)
    uc, wc = cell_velocity(state)
    r0 = _background(grid, profile)
    eta = state.rho / r0 - 1.0
    potential = g * profile.H * r0 * ((1.0 + eta) * np.log1p(eta) - eta)
    return 0.5 * state.rho * (uc**2 + wc**2) + potential


def wave_energy_nonlinear(state: State, grid: Grid, profile: StratificationProfile, g: float = G) -> float:
    return float(np.sum(wave_energy_density(state, grid, profile, g)) * grid.cell_area)


def wave_energy_linear(state: State, grid: Grid, profile: StratificationProfile, g: float = G) -> float:
    _require_exponential(profile)
    uc, wc = cell_velocity(state)
    r0 = _background(grid, profile)
    phi = state.rho / r0 - 1.0
    return float(0.5 * np.sum(r0 * ((uc**2 + wc**2) + g * profile.H * phi**2)) * grid.cell_area)


def hydro_energy_linear(state: State, grid: Grid, profile: StratificationProfile, g: float = G) -> float:
    uc, wc = cell_velocity(state)
    r0 = _background(grid, profile)
    phi = state.rho / r0 - 1.0
    return float(np.sum(r0 * (0.5 * (uc**2 + wc**2) + g * _z_cells(grid) * phi)) * grid.cell_area)


def f_functional(state: State, grid: Grid, rho_ref: float) -> float:
    """Sum of rho ln(rho / rho_ref) h^2; rho_ref is the bottom (maximum) background density."""
    _require_positive(state.rho)
    return float(np.sum(state.rho * np.log(state.rho / rho_ref)) * grid.cell_area)


def mixing_fraction(state: State, grid: Grid, rtol: float = 1e-10) -> float:
    """Fraction of cells lighter than the cell directly above them.

    A difference only counts when it exceeds ``rtol * max(rho)``, so
    round-off in a homogeneous fluid is not reported as overturning.
    The top row has no cell above and counts as stable.
    """
    rho = state.rho
    unstable = np.diff(rho, axis=1) > rtol * np.max(rho)
    return float(np.count_nonzero(unstable)) / rho.size


@dataclass
class FunctionalSample:
    t: float
    mass: float
    hydro_energy: float
    H_nonl: float
    H_lin: float
    E_lin: float
    F: float
    mixing_fraction: float
    kinetic_energy: float = math.nan
    max_vorticity: float = math.nan


def sample(state: State, grid: Grid, profile: StratificationProfile, g: float = G) -> FunctionalSample:
    """Evaluate every functional on one state.

    Wave-energy functionals are only defined for exponential profiles; other
    profiles record NaN for them.
    """
    if profile.kind == "exponential":
        h_nonl = wave_energy_nonlinear(state, grid, profile, g)
        h_lin = wave_energy_linear(state, grid, profile, g)
    else:
        h_nonl = h_lin = math.nan
    return FunctionalSample(
        t=state.t,
        mass=mass(state, grid),
        hydro_energy=hydro_energy(state, grid, g),
        H_nonl=h_nonl,
        H_lin=h_lin,
        E_lin=hydro_energy_linear(state, grid, profile, g),
        F=f_functional(state, grid, profile.rho00),
        mixing_fraction=mixing_fraction(state, grid),
        kinetic_energy=kinetic_energy(state, grid),
        max_vorticity=float(np.max(np.abs(vorticity(state, grid)))),
    )


@dataclass
class Tolerances:
    """Admissibility tolerances.

    ``energy`` is relative to the initial kinetic energy, ``mass`` to the
    initial mass, ``f_rel`` to |F(0)| and ``h_rel`` to H_nonl (its maximum
    over the series, or its initial value when ``h_reference="initial"``).
    The absolute floors keep exactly-constant series (F = 0 in a homogeneous
    fluid) from failing on round-off.
    """

    energy: float = 0.02
    mass: float = 1e-11
    f_rel: float = 1e-8
    h_rel: float = 1e-6
    h_reference: str = "max"
    f_abs: float = 1e-12
    h_abs: float = 1e-15


@dataclass
class AdmissibilityVerdict:
    energy_conserved: bool
    energy_drift: float
    F_monotone: bool
    F_violation: float
    F_violation_index: int | None
    H_nonl_monotone: bool
    H_nonl_violation: float
    H_nonl_violation_index: int | None
    mass_conserved: bool
    mass_drift: float

    @property
    def passed(self) -> bool:
        return self.energy_conserved and self.F_monotone and self.H_nonl_monotone and self.mass_conserved

    def lines(self) -> list[str]:
        def mark(ok):
            return "PASS" if ok else "FAIL"

        def where(idx):
            return "" if idx is None else f" at sample {idx}"

        return [
            f"{mark(self.mass_conserved)} mass conservation: max relative drift {self.mass_drift:.3e}",
            f"{mark(self.energy_conserved)} energy conservation: max drift / initial KE {self.energy_drift:.3e}",
            f"{mark(self.F_monotone)} F non-increasing: worst rise {self.F_violation:.3e}"
            + where(self.F_violation_index),
            f"{mark(self.H_nonl_monotone)} H_nonl non-increasing: worst rise {self.H_nonl_violation:.3e}"
            + where(self.H_nonl_violation_index),
        ]


def monotone_violation(values) -> tuple[float, int | None]:
    """Worst rise max_j (v_j - min_{i<j} v_i) and the index where it occurs."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0, None
    running_min = np.minimum.accumulate(v)[:-1]
    rise = v[1:] - running_min
    j = int(np.argmax(rise))
    return float(rise[j]), j + 1


def admissibility_report(series, tol: Tolerances | None = None, energy_scale: float | None = None
                         ) -> AdmissibilityVerdict:
    """Check mass/energy conservation and monotone F, H_nonl over a series.

    ``energy_scale`` defaults to the first sample's kinetic energy, falling
    back to H_nonl(0) (equal to it when the run starts from undisturbed
    density) and finally to |E(0)|.
    """
    tol = tol or Tolerances()
    series = list(series)
    if not series:
        raise InputError("empty diagnostics series")
    t = np.array([s.t for s in series])
    if np.any(np.diff(t) <= 0):
        raise InputError("diagnostics times must be strictly increasing")

    m = np.array([s.mass for s in series])
    e = np.array([s.hydro_energy for s in series])
    f = np.array([s.F for s in series])
    hn = np.array([s.H_nonl for s in series])

    mass_drift = float(np.max(np.abs(m - m[0])) / m[0])

    if energy_scale is None:
        for candidate in (series[0].kinetic_energy, series[0].H_nonl, abs(e[0])):
            if candidate is not None and math.isfinite(candidate) and candidate > 0:
                energy_scale = candidate
                break
        else:
            energy_scale = 1.0
    energy_drift = float(np.max(np.abs(e - e[0])) / energy_scale)

    f_tol = tol.f_rel * abs(f[0]) + tol.f_abs * abs(m[0])
    f_rise, f_idx = monotone_violation(f)
    f_ok = f_rise <= f_tol

    if np.all(np.isfinite(hn)):
        ref = np.max(hn) if tol.h_reference == "max" else hn[0]
        h_tol = tol.h_rel * abs(ref) + tol.h_abs * abs(e[0])
        h_rise, h_idx = monotone_violation(hn)
        h_ok = h_rise <= h_tol
    else:
        h_rise, h_idx, h_ok = 0.0, None, True

    return AdmissibilityVerdict(
        energy_conserved=energy_drift <= tol.energy,
        energy_drift=energy_drift,
        F_monotone=bool(f_ok),
        F_violation=f_rise,
        F_violation_index=f_idx if not f_ok else None,
        H_nonl_monotone=bool(h_ok),
        H_nonl_violation=h_rise,
        H_nonl_violation_index=h_idx if not h_ok else None,
        mass_conserved=mass_drift <= tol.mass,
        mass_drift=mass_drift,
    )


@dataclass
class DiagnosticsReport:
    samples: list = field(default_factory=list)
    verdict: AdmissibilityVerdict | None = None
    steps: int = 0

    def append(self, s: FunctionalSample) -> None:
        self.samples.append(s)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])

    def at(self, t: float) -> FunctionalSample:
        """Sample closest in time to t."""
        times = self.column("t")
        return self.samples[int(np.argmin(np.abs(times - t)))]

    def evaluate(self, tol: Tolerances | None = None, energy_scale: float | None = None) -> AdmissibilityVerdict:
        self.verdict = admissibility_report(self.samples, tol, energy_scale)
        return self.verdict


def write_diagnostics_csv(samples, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for s in samples:
            writer.writerow([f"{getattr(s, c):.17g}" for c in CSV_COLUMNS])


def read_diagnostics_csv(path) -> list[FunctionalSample]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for row in reader:
            vals = {c: float(row[c]) for c in CSV_COLUMNS}
            out.append(FunctionalSample(E_lin=math.nan, **vals))
    return out


def sample_as_dict(s: FunctionalSample) -> dict:
    return {f.name: getattr(s, f.name) for f in fields(s)}
