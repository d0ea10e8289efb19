import dataclasses

import numpy as np
import pytest

from stratvortex.diagnostics import mass
from stratvortex.errors import BlowupError, ConfigurationError
from stratvortex.experiments import VortexParams, gaussian_vortex_init, preset
from stratvortex.grid import Placement, State, apply_wall_bc, discrete_divergence, make_grid, rest_state, vorticity
from stratvortex.solver import SolverConfig, cfl_dt, compute_fluxes, project, run, step
from stratvortex.stratification import StratificationProfile, background_density, hydrostatic_pressure

pytestmark = pytest.mark.filterwarnings("ignore:vortex streamfunction reaches")

EXP = StratificationProfile("exponential", 1000.0, 6.23)
CONST = StratificationProfile("constant", 1000.0)


@pytest.fixture(scope="module")
def grid():
    return make_grid(1.0, 0.25, 0.025)


def random_state(grid, seed=0, amp=0.05):
    rng = np.random.default_rng(seed)
    rho = background_density(grid, EXP) * (1 + 0.01 * rng.random(grid.shape(Placement.CELL)))
    u = amp * rng.normal(size=grid.shape(Placement.XFACE))
    w = amp * rng.normal(size=grid.shape(Placement.ZFACE))
    return apply_wall_bc(State(0.0, rho, u, w))


def test_rest_fluxes_zero(grid):
    f = compute_fluxes(rest_state(grid, background_density(grid, EXP)), grid)
    for name in ("mass_x", "mass_z", "umom_x", "umom_z", "wmom_x", "wmom_z"):
        assert np.all(getattr(f, name) == 0)


def test_uniform_advection_mass_flux(grid):
    s = State(0.0, np.full(grid.shape(Placement.CELL), 1000.0),
              np.full(grid.shape(Placement.XFACE), 0.1), grid.zeros(Placement.ZFACE))
    s = apply_wall_bc(s)
    f = compute_fluxes(s, grid)
    assert np.allclose(f.mass_x[1:-1], 100.0, rtol=1e-14)
    assert np.all(f.mass_x[[0, -1]] == 0)


@pytest.mark.parametrize("limiter", ["minmod", "none", "fromm", "third"])
def test_flux_divergence_telescopes(grid, limiter):
    s = random_state(grid, 4)
    f = compute_fluxes(s, grid, limiter)
    total = np.sum(f.mass_divergence(grid.h))
    scale = np.sum(np.abs(f.mass_divergence(grid.h)))
    assert abs(total) <= 1e-12 * scale


@pytest.mark.parametrize("speed, h, courant, expected", [
    (0.16, 0.0025, 0.4, 0.00625),
    (0.08, 0.005, 0.4, 0.025),
])
def test_cfl_examples(speed, h, courant, expected):
    g = make_grid(1.0, 0.25, h)
    s = rest_state(g, np.ones(g.shape(Placement.CELL)))
    s.u[g.nx // 2, 5] = speed
    cfg = SolverConfig(courant=courant, dt_max=1.0)
    assert cfl_dt(s, g, cfg, CONST) == pytest.approx(expected, rel=1e-9)


def test_cfl_buoyancy_limit(grid):
    s = rest_state(grid, background_density(grid, EXP))
    assert cfl_dt(s, grid, SolverConfig(dt_max=1.0), EXP) == pytest.approx(0.4 / 1.25484, rel=1e-4)
    assert cfl_dt(s, grid, SolverConfig(), EXP) == 0.05


def test_cfl_nan_blowup(grid):
    s = rest_state(grid, background_density(grid, EXP))
    s.u[3, 3] = np.nan
    with pytest.raises(BlowupError):
        cfl_dt(s, grid, SolverConfig(), EXP)


@pytest.mark.parametrize("courant", [0.0, 2.0, -0.1])
def test_courant_bounds(courant):
    with pytest.raises(ConfigurationError):
        SolverConfig(courant=courant)


def test_courant_two_scenario_rejected():
    with pytest.raises(ConfigurationError):
        dataclasses.replace(preset("coarse"), solver=SolverConfig(courant=2.0))


def test_projection_divergence_and_idempotence(grid):
    cfg = SolverConfig()
    s = project(random_state(grid, 7), 0.01, grid, cfg)
    assert np.max(np.abs(discrete_divergence(s, grid))) <= cfg.div_tol
    again = project(s, 0.01, grid, cfg)
    vmax = max(np.abs(s.u).max(), np.abs(s.w).max())
    assert np.max(np.abs(again.u - s.u)) <= cfg.poisson_tol * vmax * 10
    assert np.max(np.abs(again.w - s.w)) <= cfg.poisson_tol * vmax * 10


@pytest.mark.parametrize("profile", [CONST, EXP])
def test_projection_annihilates_gradient(grid, profile):
    # the density-weighted projection removes fields of the form grad(phi)/rho
    x, z = grid.mesh(Placement.CELL)
    phi = np.cos(2 * np.pi * x) * np.cos(np.pi * z / 0.25) + 0.3 * x**2 * z
    rho = background_density(grid, profile)
    s = rest_state(grid, rho)
    s.u[1:-1] = np.diff(phi, axis=0) / grid.h / (0.5 * (rho[1:] + rho[:-1]))
    s.w[:, 1:-1] = np.diff(phi, axis=1) / grid.h / (0.5 * (rho[:, 1:] + rho[:, :-1]))
    out = project(s, 1.0, grid, SolverConfig())
    vmax = np.abs(s.u).max()
    # what remains is bounded by the divergence tolerance
    assert np.abs(out.u).max() < 1e-5 * vmax and np.abs(out.w).max() < 1e-5 * vmax


def test_hydrostatic_rest_is_fixed_point(grid):
    rho = background_density(grid, EXP)
    s = rest_state(grid, rho)
    s.p = hydrostatic_pressure(grid, rho)
    out = s
    for _ in range(40):
        out = step(out, grid, SolverConfig(), EXP)
    # round-off floor: divergence below 0.01 div_tol is left unprojected
    assert np.max(np.abs(out.u)) < 1e-10 and np.max(np.abs(out.w)) < 1e-10
    assert np.allclose(out.rho, rho, rtol=1e-10, atol=0)
    assert out.t == pytest.approx(2.0)


@pytest.mark.parametrize("stages", [1, 2, 3])
def test_step_mass_and_positivity(grid, stages):
    cfg = SolverConfig(stages=stages)
    s = project(random_state(grid, 11, amp=0.02), 1.0, grid, cfg)
    m0 = mass(s, grid)
    for _ in range(5):
        dt = cfl_dt(s, grid, cfg, EXP)
        t0 = s.t
        s = step(s, grid, cfg, EXP)
        assert s.t == pytest.approx(t0 + dt)
        assert abs(mass(s, grid) - m0) <= 1e-12 * m0
        assert np.all(s.rho > 0)


def test_step_reports_blowup_index(grid):
    s = random_state(grid, 2)
    s.rho[2, 2] = np.nan
    with pytest.raises(BlowupError) as info:
        step(s, grid, SolverConfig(), EXP, dt=0.01, step_index=17)
    assert info.value.step_index == 17


def test_homogeneous_vortex_vorticity_100_steps():
    g = make_grid(1.0, 0.25, 0.005)
    cfg = SolverConfig()
    s = gaussian_vortex_init(g, CONST, VortexParams(), cfg)
    xi0 = np.abs(vorticity(s, g)).max()
    peak = xi0
    for _ in range(100):
        s = step(s, g, cfg, CONST)
        peak = max(peak, np.abs(vorticity(s, g)).max())
    assert peak <= 1.01 * xi0


def test_homogeneous_x_momentum_symmetric():
    g = make_grid(1.0, 0.25, 0.01)
    cfg = SolverConfig()
    s = gaussian_vortex_init(g, CONST, VortexParams(), cfg)
    for _ in range(20):
        s = step(s, g, cfg, CONST)
    px = np.sum(s.u) * 1000.0 * g.cell_area
    assert abs(px) <= 1e-10 * 1000.0 * 0.0095 * 1.0


def test_run_t_end_zero():
    cfg = dataclasses.replace(preset("coarse"), t_end=0.0, snapshot_times=())
    snaps, report = run(cfg)
    assert len(snaps) == 1 and snaps[0].t == 0.0
    init = gaussian_vortex_init(cfg.make_grid(), cfg.profile, cfg.vortex, cfg.solver)
    assert np.array_equal(snaps[0].u, init.u) and np.array_equal(snaps[0].rho, init.rho)
    assert report.steps == 0 and len(report.samples) == 1


def test_run_hits_snapshot_times():
    cfg = dataclasses.replace(preset("coarse"), grid=dataclasses.replace(preset("coarse").grid, h=0.0125),
                              t_end=0.5, snapshot_times=(0.1, 0.5), diag_interval=5)
    snaps, report = run(cfg)
    assert [s.t for s in snaps] == [0.1, 0.5]
    assert report.samples[-1].t == 0.5
    assert report.steps > 0
