"""Closed-form stationary vortex and its small-time stratified correction.

The vortex is centred at the origin with R = sqrt(x^2 + z^2) and
psi(R) = -sqrt(g/L) (R + L) exp(-R/L). Background stratification is linear,
rho0(z) = rho00 - a z.

Two details of the printed correction formulas are kept as published and
exposed next to the corrected versions:

* the printed xi0 equals the true Laplacian of psi times -L
  (``laplacian_psi_oracle`` gives the true value);
* the printed xi1 uses the rotation phase exp(-R/L) t / (2 pi), while the
  advected density uses sqrt(g/L) exp(-R/L) t / (2 pi L). ``phase="density"``
  (default) uses the latter everywhere, ``phase="printed"`` the former.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError
from .stratification import G, StratificationProfile, drho0_dz, rho0

PHASES = ("density", "printed")


@dataclass(frozen=True)
class AnalyticVortex:
    L: float = 0.05
    a: float = 0.0
    g: float = G

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigurationError("L must be positive")
        if self.a < 0:
            raise ConfigurationError("a must be non-negative")

    @property
    def omega(self) -> float:
        """sqrt(g / L), the velocity scale over L."""
        return math.sqrt(self.g / self.L)

    def profile(self, rho00: float = 1000.0) -> StratificationProfile:
        return StratificationProfile("linear", rho00, a=self.a)


def psi_stationary(R, vortex: AnalyticVortex):
    R = np.asarray(R, dtype=float)
    return -vortex.omega * (R + vortex.L) * np.exp(-R / vortex.L)


def v_of_R(R, vortex: AnalyticVortex):
    """Azimuthal speed dpsi/dR."""
    R = np.asarray(R, dtype=float)
    return vortex.omega * (R / vortex.L) * np.exp(-R / vortex.L)


def dv_dR(R, vortex: AnalyticVortex):
    R = np.asarray(R, dtype=float)
    return vortex.omega / vortex.L * (1.0 - R / vortex.L) * np.exp(-R / vortex.L)


def v_argmax(vortex: AnalyticVortex, xtol: float = 1e-15) -> float:
    """Radius of peak speed, located by bracketing the sign change of dv/dR."""
    return brentq(lambda r: float(dv_dR(r, vortex)), 0.5 * vortex.L, 2.0 * vortex.L, xtol=xtol, rtol=8.9e-16)


def laplacian_psi_oracle(R, vortex: AnalyticVortex):
    """psi'' + psi'/R, the vorticity of the stationary vortex (finite at R = 0)."""
    R = np.asarray(R, dtype=float)
    L = vortex.L
    return vortex.omega / L * (2.0 - R / L) * np.exp(-R / L)


def xi0(R, vortex: AnalyticVortex):
    """Leading vorticity exactly as printed (equals -L times the true Laplacian)."""
    R = np.asarray(R, dtype=float)
    L = vortex.L
    return -vortex.omega * (2.0 - R / L) * np.exp(-R / L)


def _phase(R, t, vortex: AnalyticVortex, phase: str):
    if phase == "density":
        return vortex.omega * np.exp(-R / vortex.L) * t / (2.0 * math.pi * vortex.L)
    if phase == "printed":
        return np.exp(-R / vortex.L) * t / (2.0 * math.pi)
    raise ConfigurationError(f"phase must be one of {PHASES}")


def advected_density(x, z, t, vortex: AnalyticVortex, profile: StratificationProfile | None = None):
    """Background density displaced vertically by R sin(phase)."""
    profile = profile or vortex.profile()
    x, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
    R = np.hypot(x, z)
    theta = _phase(R, t, vortex, "density")
    return rho0(profile, z - R * np.sin(theta))


def rho_source(x, z, t, vortex: AnalyticVortex, profile: StratificationProfile | None = None,
               form: str = "printed"):
    """g * d(rho)/dx for the advected density.

    ``form="printed"`` reproduces the published bracket, whose second term
    lacks a 1/L factor; ``form="exact"`` is the true x-derivative.
    """
    profile = profile or vortex.profile()
    x, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
    R = np.hypot(x, z)
    theta = _phase(R, t, vortex, "density")
    slope = drho0_dz(profile, z - R * np.sin(theta))
    with np.errstate(invalid="ignore", divide="ignore"):
        x_over_R = np.where(R > 0, x / np.where(R > 0, R, 1.0), 0.0)
    second = np.cos(theta) * theta * x
    if form == "exact":
        second = second / vortex.L
    elif form != "printed":
        raise ConfigurationError("form must be 'printed' or 'exact'")
    return vortex.g * slope * (-x_over_R * np.sin(theta) + second)


def source_Q(x, z, t, vortex: AnalyticVortex, profile: StratificationProfile | None = None,
             form: str = "printed"):
    """Vorticity source Q = g (d rho / dx) / rho."""
    return rho_source(x, z, t, vortex, profile, form) / advected_density(x, z, t, vortex, profile)


def xi1(x, z, t, vortex: AnalyticVortex, phase: str = "density"):
    """Stratification-generated vorticity correction, braced expression as printed."""
    x, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
    L, a, g = vortex.L, vortex.a, vortex.g
    R = np.hypot(x, z)
    theta = _phase(R, t, vortex, phase)
    Rs = np.where(R > 0, R, 1.0)
    brace = 2.0 * math.pi * (R + L) * (np.cos(theta) - 1.0) * np.exp(R / L) + R * t * np.sin(theta)
    return np.where(R > 0, -a * g * x / (Rs * L) * brace, 0.0)


def growing_term(x, z, t, vortex: AnalyticVortex, phase: str = "density"):
    """The part of xi1 that grows linearly in t: -(a g x t / L) sin(phase)."""
    x, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(z, float))
    R = np.hypot(x, z)
    return -vortex.a * vortex.g * x * t / vortex.L * np.sin(_phase(R, t, vortex, phase))


def radial_fd_laplacian(R, delta, vortex: AnalyticVortex):
    """Centred second-order finite-difference psi'' + psi'/R."""
    R = np.asarray(R, dtype=float)
    pp, p0, pm = (psi_stationary(R + delta, vortex), psi_stationary(R, vortex),
                  psi_stationary(R - delta, vortex))
    return (pp - 2 * p0 + pm) / delta**2 + (pp - pm) / (2 * delta * R)


def oracle_checks(vortex: AnalyticVortex | None = None, seed: int = 0) -> list[tuple[str, bool, str]]:
    """Self-consistency checks of the closed forms; returns (name, passed, detail) rows."""
    vortex = vortex or AnalyticVortex(L=0.05, a=40.0)
    L = vortex.L
    rng = np.random.default_rng(seed)
    rows = []

    r_star = v_argmax(vortex)
    rows.append(("v_of_R peaks at R = L", bool(abs(r_star - L) <= 4 * np.spacing(L) + 1e-15),
                 f"|R* - L| = {abs(r_star - L):.2e}"))

    R = np.linspace(0.2 * L, 5 * L, 25)
    deltas = [L / 10, L / 20, L / 40]
    errs = [np.max(np.abs(radial_fd_laplacian(R, d, vortex) - laplacian_psi_oracle(R, vortex)))
            for d in deltas]
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    rows.append(("Laplacian oracle second-order FD convergence",
                 all(abs(r - 4) <= 0.3 for r in ratios), "error ratios " + ", ".join(f"{r:.3f}" for r in ratios)))

    pts = rng.uniform(-4 * L, 4 * L, size=(20, 2))
    z0 = np.max(np.abs(xi1(pts[:, 0], pts[:, 1], 0.0, vortex)))
    rows.append(("xi1 vanishes at t = 0", bool(z0 == 0.0), f"max |xi1| = {z0:.1e}"))

    t = 3.7
    odd = np.max(np.abs(xi1(-pts[:, 0], pts[:, 1], t, vortex) + xi1(pts[:, 0], pts[:, 1], t, vortex)))
    scale = np.max(np.abs(xi1(pts[:, 0], pts[:, 1], t, vortex)))
    rows.append(("xi1 odd in x", bool(odd <= 1e-12 * scale), f"max |xi1(-x)+xi1(x)| = {odd:.1e}"))

    Rr = np.linspace(0.05 * L, 6 * L, 50)
    Rr = Rr[np.abs(Rr - 2 * L) > 1e-3 * L]
    ratio = laplacian_psi_oracle(Rr, vortex) / xi0(Rr, vortex)
    rows.append(("Laplacian / printed xi0 = -1/L", bool(np.allclose(ratio, -1.0 / L, rtol=1e-12)),
                 f"ratio*L in [{np.min(ratio) * L:.15f}, {np.max(ratio) * L:.15f}]"))
    return rows
