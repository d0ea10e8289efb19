"""Conservative finite-difference integrator for the variable-density Euler system.

Each explicit stage:

1. mass fluxes on cell faces from MUSCL-reconstructed density, upwinded by
   the face velocity;
2. momentum on the staggered face control volumes, transported by the
   averaged mass fluxes (so a uniform velocity stays uniform) with MUSCL
   velocity reconstruction;
3. gravity -rho g on vertical momentum using the same face-averaged density
   as the pressure-gradient stencil, so discrete hydrostatic states are
   fixed points;
4. projection: solve div(grad(dp) / rho) = div(v*) / dt and correct.

Stages are combined with strong-stability-preserving Runge-Kutta weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowupError, ConfigurationError, ConvergenceError
from .grid import Grid, State, apply_wall_bc, discrete_divergence
from .poisson import face_coefficients, solve_variable_poisson
from .stratification import G, StratificationProfile, buoyancy_frequency


LIMITERS = ("minmod", "none", "fromm", "third")
KAPPA = {"none": 1.0 / 3.0, "fromm": 0.0, "third": 1.0 / 3.0}

# SSP Runge-Kutta weights: stage s = a * u^n + (1 - a) * Euler(stage s-1)
_SSP_WEIGHTS = {1: (0.0,), 2: (0.0, 0.5), 3: (0.0, 0.75, 1.0 / 3.0)}


@dataclass(frozen=True)
class SolverConfig:
    courant: float = 0.4
    div_tol: float = 1e-8
    poisson_tol: float = 1e-10
    poisson_max_iter: int = 500
    limiter: str = "minmod"
    dt_max: float = 0.05
    stages: int = 3
    momentum_limiter: str | None = "none"
    blowup_factor: float = 100.0

    def __post_init__(self):
        if not 0 < self.courant <= 1:
            raise ConfigurationError(f"courant must lie in (0, 1], got {self.courant}")
        if not (self.div_tol > 0 and self.poisson_tol > 0 and self.dt_max > 0):
            raise ConfigurationError("tolerances and dt_max must be positive")
        if self.poisson_max_iter < 1:
            raise ConfigurationError("poisson_max_iter must be at least 1")
        for lim in (self.limiter, self.momentum_limiter):
            if lim is not None and lim not in LIMITERS:
                raise ConfigurationError(f"unknown limiter {lim!r}; expected one of {LIMITERS}")
        if self.stages not in _SSP_WEIGHTS:
            raise ConfigurationError("stages must be 1, 2 or 3")

    @property
    def velocity_limiter(self) -> str:
        return self.momentum_limiter or self.limiter


@dataclass
class Flux:
    """Face fluxes of one explicit stage.

    ``mass_x`` (nx+1, nz) and ``mass_z`` (nx, nz+1) are rho*u and rho*w on
    the cell faces. Momentum fluxes live on the faces of the staggered
    control volumes: ``umom_x`` at cell centres, ``umom_z`` on nodes for the
    x-momentum; ``wmom_x`` on nodes, ``wmom_z`` at cell centres for the
    z-momentum. Wall entries are zero.
    """

    mass_x: np.ndarray
    mass_z: np.ndarray
    umom_x: np.ndarray
    umom_z: np.ndarray
    wmom_x: np.ndarray
    wmom_z: np.ndarray

    def mass_divergence(self, h: float) -> np.ndarray:
        return (np.diff(self.mass_x, axis=0) + np.diff(self.mass_z, axis=1)) / h

    def umom_divergence(self, h: float) -> np.ndarray:
        return (np.diff(self.umom_x, axis=0) + np.diff(self.umom_z[1:-1, :], axis=1)) / h

    def wmom_divergence(self, h: float) -> np.ndarray:
        return (np.diff(self.wmom_x[:, 1:-1], axis=0) + np.diff(self.wmom_z, axis=1)) / h


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def interface_values(q: np.ndarray, vel: np.ndarray, axis: int, limiter: str, ghost: str) -> np.ndarray:
    """Upwind MUSCL values of q at the n-1 interfaces between neighbours along axis.

    ``ghost`` is "even" (zero-gradient, cell data) or "odd" (wall-normal face
    data whose end entries sit on the wall). Zero velocity takes the mean of
    the two one-sided values.
    """
    q = np.moveaxis(q, axis, 0)
    vel = np.moveaxis(vel, axis, 0)
    if ghost == "even":
        lo, hi = q[:1], q[-1:]
    else:
        lo, hi = -q[1:2], -q[-2:-1]
    qp = np.concatenate([lo, q, hi], axis=0)
    fwd = qp[2:] - qp[1:-1]
    bwd = qp[1:-1] - qp[:-2]
    if limiter == "minmod":
        s = _minmod(bwd, fwd)
        left = q[:-1] + 0.5 * s[:-1]
        right = q[1:] - 0.5 * s[1:]
    else:
        k = KAPPA[limiter]
        left = q[:-1] + 0.25 * ((1 - k) * bwd[:-1] + (1 + k) * fwd[:-1])
        right = q[1:] - 0.25 * ((1 + k) * bwd[1:] + (1 - k) * fwd[1:])
    out = np.where(vel > 0, left, np.where(vel < 0, right, 0.5 * (left + right)))
    return np.moveaxis(out, 0, axis)


def compute_fluxes(state: State, grid: Grid, limiter: str = "minmod",
                   momentum_limiter: str | None = "none") -> Flux:
    momentum_limiter = momentum_limiter or limiter
    rho, u, w = state.rho, state.u, state.w
    nx, nz = grid.nx, grid.nz

    fx = np.zeros((nx + 1, nz))
    fz = np.zeros((nx, nz + 1))
    fx[1:-1] = u[1:-1] * interface_values(rho, u[1:-1], 0, limiter, "even")
    fz[:, 1:-1] = w[:, 1:-1] * interface_values(rho, w[:, 1:-1], 1, limiter, "even")

    # x-momentum control volumes sit on x-faces
    mxc = 0.5 * (fx[:-1] + fx[1:])
    umom_x = mxc * interface_values(u, mxc, 0, momentum_limiter, "odd")
    mzn = 0.5 * (fz[:-1, 1:-1] + fz[1:, 1:-1])
    umom_z = np.zeros((nx + 1, nz + 1))
    umom_z[1:-1, 1:-1] = mzn * interface_values(u[1:-1], mzn, 1, momentum_limiter, "even")

    # z-momentum control volumes sit on z-faces
    mzc = 0.5 * (fz[:, :-1] + fz[:, 1:])
    wmom_z = mzc * interface_values(w, mzc, 1, momentum_limiter, "odd")
    mxn = 0.5 * (fx[1:-1, :-1] + fx[1:-1, 1:])
    wmom_x = np.zeros((nx + 1, nz + 1))
    wmom_x[1:-1, 1:-1] = mxn * interface_values(w[:, 1:-1], mxn, 0, momentum_limiter, "even")

    return Flux(fx, fz, umom_x, umom_z, wmom_x, wmom_z)


def max_speed(state: State) -> float:
    return float(np.max(np.abs(state.u)) + np.max(np.abs(state.w)))


def cfl_dt(state: State, grid: Grid, cfg: SolverConfig, profile: StratificationProfile) -> float:
    """Advective and buoyancy limited step, capped by dt_max.

    The advective speed is max|u| + max|w|, which bounds the unsplit 2-D
    Courant number.
    """
    if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.w))):
        raise BlowupError("non-finite velocity while computing the time step")
    dt = min(cfg.courant * grid.h / (max_speed(state) + 1e-12), cfg.dt_max)
    n = buoyancy_frequency(profile)
    if n > 0:
        dt = min(dt, cfg.courant / n)
    return dt


def project(state: State, dt: float, grid: Grid, cfg: SolverConfig) -> State:
    """Remove the divergent part of the velocity, weighted by 1/rho.

    The pressure increment dp solving div(grad(dp)/rho) = div(v)/dt is
    added to ``state.p``. If round-off leaves the divergence above
    ``div_tol``, the correction is repeated a few times before giving up.
    """
    out = apply_wall_bc(state)
    bx, bz = face_coefficients(1.0 / out.rho)
    for _ in range(4):
        div = discrete_divergence(out, grid)
        if np.max(np.abs(div)) <= 0.01 * cfg.div_tol:
            break
        # closed walls make sum(div) vanish exactly; only round-off of the
        # (much larger) face velocities remains, so drop it
        div -= div.mean()
        dp = solve_variable_poisson(None, div / dt, grid, cfg, faces=(bx, bz))
        out.u[1:-1, :] -= dt * bx[1:-1, :] * np.diff(dp, axis=0) / grid.h
        out.w[:, 1:-1] -= dt * bz[:, 1:-1] * np.diff(dp, axis=1) / grid.h
        out.p += dp
    resid = np.max(np.abs(discrete_divergence(out, grid)))
    if resid > cfg.div_tol:
        raise ConvergenceError(f"divergence {resid:.3e} above div_tol {cfg.div_tol:g} after projection")
    return out


def euler_stage(state: State, dt: float, grid: Grid, cfg: SolverConfig, g: float = G) -> State:
    """One forward-Euler update followed by projection."""
    h = grid.h
    flux = compute_fluxes(state, grid, cfg.limiter, cfg.velocity_limiter)
    rho, u, w, p = state.rho, state.u, state.w, state.p

    rho1 = rho - dt * flux.mass_divergence(h)

    ru0 = 0.5 * (rho[:-1] + rho[1:])
    ru1 = 0.5 * (rho1[:-1] + rho1[1:])
    mu = ru0 * u[1:-1] - dt * flux.umom_divergence(h) - dt * np.diff(p, axis=0) / h

    rw0 = 0.5 * (rho[:, :-1] + rho[:, 1:])
    rw1 = 0.5 * (rho1[:, :-1] + rho1[:, 1:])
    mw = rw0 * w[:, 1:-1] - dt * flux.wmom_divergence(h) - dt * (np.diff(p, axis=1) / h + g * rw0)

    u1 = np.zeros_like(u)
    w1 = np.zeros_like(w)
    u1[1:-1] = mu / ru1
    w1[:, 1:-1] = mw / rw1
    return project(State(state.t + dt, rho1, u1, w1, p.copy()), dt, grid, cfg)


def _combine(a: float, s0: State, s1: State) -> State:
    if a == 0.0:
        return s1
    b = 1.0 - a
    return State(s1.t, a * s0.rho + b * s1.rho, a * s0.u + b * s1.u, a * s0.w + b * s1.w, a * s0.p + b * s1.p)


def _check_finite(state: State, step_index):
    for name in ("rho", "u", "w", "p"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise BlowupError(f"non-finite {name} at step {step_index}", step_index=step_index)
    if not np.all(state.rho > 0):
        raise BlowupError(f"non-positive density at step {step_index}", step_index=step_index)


def step(state: State, grid: Grid, cfg: SolverConfig, profile: StratificationProfile,
         dt: float | None = None, step_index: int | None = None, g: float = G) -> State:
    """Advance one time step (CFL step unless ``dt`` is given)."""
    if dt is None:
        dt = cfl_dt(state, grid, cfg, profile)
    _check_finite(state, step_index)
    current = state
    for a in _SSP_WEIGHTS[cfg.stages]:
        try:
            stage = euler_stage(current, dt, grid, cfg, g)
        except ConvergenceError as exc:
            if not all(np.all(np.isfinite(getattr(current, n))) for n in ("rho", "u", "w", "p")):
                raise BlowupError(f"non-finite stage values at step {step_index}",
                                  step_index=step_index) from exc
            raise
        _check_finite(stage, step_index)
        current = _combine(a, state, stage)
    current.t = state.t + dt
    _check_finite(current, step_index)
    return current


def run(scenario, *, progress=None):
    """Integrate a ScenarioConfig; returns (snapshots, DiagnosticsReport).

    Time steps are shortened so that every scheduled snapshot time is hit
    exactly. Diagnostics are sampled every ``diag_interval`` steps and at
    every snapshot.
    """
    from .diagnostics import DiagnosticsReport, sample
    from .experiments import build_initial_state, make_snapshot

    scenario.validate()
    grid = scenario.make_grid()
    cfg = scenario.solver
    profile = scenario.profile

    state = build_initial_state(scenario, grid)
    report = DiagnosticsReport()
    report.append(sample(state, grid, profile))
    targets = sorted(set(float(t) for t in scenario.snapshot_times) | {float(scenario.t_end)})
    snapshots = []
    if 0.0 in targets or scenario.t_end == 0:
        snapshots.append(make_snapshot(state, grid))
    targets = [t for t in targets if t > 0]

    v0 = max(float(np.max(np.abs(state.u))), float(np.max(np.abs(state.w))), 1e-6)
    limit = cfg.blowup_factor * v0
    n = 0
    last_snapshot = snapshots[-1] if snapshots else make_snapshot(state, grid)
    snapshot_set = set(float(t) for t in scenario.snapshot_times)
    for target in targets:
        while state.t < target - 1e-12 * max(1.0, target):
            dt = cfl_dt(state, grid, cfg, profile)
            remaining = target - state.t
            if dt >= remaining:
                dt = remaining
            elif dt > 0.5 * remaining:
                dt = 0.5 * remaining  # avoid a sliver step before the target
            try:
                state = step(state, grid, cfg, profile, dt=dt, step_index=n + 1)
            except (BlowupError, ConvergenceError) as exc:
                raise BlowupError(f"{scenario.name}: {exc} (t={state.t:.4f})", step_index=n + 1,
                                  last_good=last_snapshot) from exc
            n += 1
            vmax = max(float(np.max(np.abs(state.u))), float(np.max(np.abs(state.w))))
            if vmax > limit:
                raise BlowupError(f"{scenario.name}: speed {vmax:.3g} m/s exceeds {limit:.3g} at step {n}",
                                  step_index=n, last_good=last_snapshot)
            at_target = state.t >= target - 1e-12 * max(1.0, target)
            if at_target:
                state.t = target
            if n % scenario.diag_interval == 0 or at_target:
                report.append(sample(state, grid, profile))
            if progress is not None:
                progress(n, state)
        if target in snapshot_set or target == scenario.t_end:
            last_snapshot = make_snapshot(state, grid)
            snapshots.append(last_snapshot)
    report.steps = n
    return snapshots, report
