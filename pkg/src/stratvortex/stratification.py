"""Background density profiles and linear internal-wave reference values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import Grid, Placement

G = 9.81
KINDS = ("exponential", "linear", "constant")


@dataclass(frozen=True)
class StratificationProfile:
    """Statically stable background density rho0(z).

    ``exponential``: rho00 * exp(-z / H); ``linear``: rho00 - a * z;
    ``constant``: rho00.
    """

    kind: str = "exponential"
    rho00: float = 1000.0
    H: float = 6.23
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        if not self.rho00 > 0:
            raise ConfigurationError("rho00 must be positive")
        if self.kind == "exponential" and not self.H > 0:
            raise ConfigurationError("exponential profile needs H > 0")
        if self.kind == "linear" and self.a < 0:
            raise ConfigurationError("linear profile needs a >= 0 (density non-increasing in z)")

    def check_domain(self, height: float) -> None:
        if self.kind == "linear" and self.rho00 - self.a * height <= 0:
            raise ConfigurationError("linear profile becomes non-positive inside the domain")

    @property
    def scale_height(self) -> float:
        """Stratification scale H (infinite for a constant profile)."""
        if self.kind == "exponential":
            return self.H
        if self.kind == "linear":
            return self.rho00 / self.a if self.a > 0 else math.inf
        return math.inf


def rho0(profile: StratificationProfile, z, height: float | None = None):
    """Background density at height z (scalar or array).

    With ``height`` given, z outside ``[0, height]`` raises DomainError.
    """
    z_arr = np.asarray(z, dtype=float)
    if height is not None and (np.any(z_arr < 0) or np.any(z_arr > height)):
        raise DomainError(f"z outside the domain [0, {height}]")
    if profile.kind == "exponential":
        out = profile.rho00 * np.exp(-z_arr / profile.H)
    elif profile.kind == "linear":
        out = profile.rho00 - profile.a * z_arr
    else:
        out = np.full_like(z_arr, profile.rho00)
    return float(out) if out.ndim == 0 else out


def drho0_dz(profile: StratificationProfile, z):
    z_arr = np.asarray(z, dtype=float)
    if profile.kind == "exponential":
        out = -profile.rho00 / profile.H * np.exp(-z_arr / profile.H)
    elif profile.kind == "linear":
        out = np.full_like(z_arr, -profile.a)
    else:
        out = np.zeros_like(z_arr)
    return float(out) if out.ndim == 0 else out


def buoyancy_frequency(profile: StratificationProfile, g: float = G) -> float:
    # linear kind evaluated at z = 0
    if profile.kind == "exponential":
        return math.sqrt(g / profile.H)
    if profile.kind == "linear":
        return math.sqrt(g * profile.a / profile.rho00)
    return 0.0


def max_linear_phase_speed(profile: StratificationProfile, depth: float, g: float = G) -> float:
    """Fastest (mode-1 long-wave) phase speed N * D / pi in a channel of depth D."""
    if depth < 0:
        raise DomainError("depth must be non-negative")
    return buoyancy_frequency(profile, g) * depth / math.pi


def background_density(grid: Grid, profile: StratificationProfile) -> np.ndarray:
    """rho0 sampled at cell centres, shape (nx, nz)."""
    _, z = grid.coords(Placement.CELL)
    profile.check_domain(grid.height)
    col = rho0(profile, z)
    return np.broadcast_to(col, (grid.nx, grid.nz)).copy()


def hydrostatic_pressure(grid: Grid, rho: np.ndarray, g: float = G) -> np.ndarray:
    """Pressure in discrete balance with rho on the staggered stencil.

    Satisfies (p[:, k] - p[:, k-1]) / h = -g * (rho[:, k] + rho[:, k-1]) / 2,
    with the top row at zero gauge pressure.
    """
    rho_face = 0.5 * (rho[:, 1:] + rho[:, :-1])
    dp = g * grid.h * rho_face
    p = np.zeros_like(rho)
    # integrate downward from the top row
    p[:, :-1] = np.cumsum(dp[:, ::-1], axis=1)[:, ::-1]
    return p
