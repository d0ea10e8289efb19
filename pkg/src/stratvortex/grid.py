"""Staggered rectangular grid and the field container.

Layout (index ``[i, k]``, ``i`` along x, ``k`` along z, z pointing up):

* density and pressure live at cell centres, shape ``(nx, nz)``;
* ``u`` lives on x-faces, shape ``(nx + 1, nz)``; ``u[0]`` and ``u[nx]`` are walls;
* ``w`` lives on z-faces, shape ``(nx, nz + 1)``; ``w[:, 0]`` and ``w[:, nz]`` are walls;
* streamfunction and vorticity live on nodes, shape ``(nx + 1, nz + 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ResolutionError

_RATIO_RTOL = 1e-9


class Placement(enum.Enum):
    CELL = "cell-center"
    XFACE = "x-face"
    ZFACE = "z-face"
    NODE = "node"


@dataclass(frozen=True)
class Grid:
    width: float
    height: float
    h: float

    @property
    def nx(self) -> int:
        return int(round(self.width / self.h))

    @property
    def nz(self) -> int:
        return int(round(self.height / self.h))

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def shape(self, placement: Placement) -> tuple[int, int]:
        nx, nz = self.nx, self.nz
        return {
            Placement.CELL: (nx, nz),
            Placement.XFACE: (nx + 1, nz),
            Placement.ZFACE: (nx, nz + 1),
            Placement.NODE: (nx + 1, nz + 1),
        }[placement]

    def coords(self, placement: Placement) -> tuple[np.ndarray, np.ndarray]:
        """1-D coordinate vectors (x, z) of the given placement."""
        h = self.h
        xc = (np.arange(self.nx) + 0.5) * h
        zc = (np.arange(self.nz) + 0.5) * h
        xf = np.arange(self.nx + 1) * h
        zf = np.arange(self.nz + 1) * h
        return {
            Placement.CELL: (xc, zc),
            Placement.XFACE: (xf, zc),
            Placement.ZFACE: (xc, zf),
            Placement.NODE: (xf, zf),
        }[placement]

    def mesh(self, placement: Placement) -> tuple[np.ndarray, np.ndarray]:
        x, z = self.coords(placement)
        return np.meshgrid(x, z, indexing="ij")

    def zeros(self, placement: Placement) -> np.ndarray:
        return np.zeros(self.shape(placement))

    def check(self, values: np.ndarray, placement: Placement, name: str = "field") -> None:
        if values.shape != self.shape(placement):
            raise ConfigurationError(
                f"{name} has shape {values.shape}, expected {self.shape(placement)} "
                f"for {placement.value} placement"
            )


def make_grid(width: float, height: float, h: float) -> Grid:
    if not (width > 0 and height > 0 and h > 0):
        raise ConfigurationError("width, height and h must be positive")
    if h >= min(width, height) / 4:
        raise ResolutionError(
            f"spacing h={h} leaves fewer than 4 cells across a {width} x {height} domain"
        )
    for name, length in (("width", width), ("height", height)):
        ratio = length / h
        if abs(ratio - round(ratio)) > _RATIO_RTOL * ratio:
            raise ConfigurationError(f"{name}={length} is not an integer multiple of h={h}")
    return Grid(float(width), float(height), float(h))


@dataclass
class State:
    """Prognostic fields at one time level."""

    t: float
    rho: np.ndarray
    u: np.ndarray
    w: np.ndarray
    p: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.p is None:
            self.p = np.zeros_like(self.rho)

    def copy(self) -> "State":
        return replace(self, rho=self.rho.copy(), u=self.u.copy(), w=self.w.copy(), p=self.p.copy())

    def validate(self, grid: Grid) -> None:
        grid.check(self.rho, Placement.CELL, "rho")
        grid.check(self.u, Placement.XFACE, "u")
        grid.check(self.w, Placement.ZFACE, "w")
        grid.check(self.p, Placement.CELL, "p")


def rest_state(grid: Grid, rho: np.ndarray, t: float = 0.0) -> State:
    return State(t, np.array(rho, dtype=float), grid.zeros(Placement.XFACE), grid.zeros(Placement.ZFACE))


def apply_wall_bc(state: State) -> State:
    """Zero the wall-normal face velocities (no flux, free slip)."""
    out = state.copy()
    out.u[0, :] = 0.0
    out.u[-1, :] = 0.0
    out.w[:, 0] = 0.0
    out.w[:, -1] = 0.0
    return out


def discrete_divergence(state: State, grid: Grid) -> np.ndarray:
    return (np.diff(state.u, axis=0) + np.diff(state.w, axis=1)) / grid.h


def cell_velocity(state: State) -> tuple[np.ndarray, np.ndarray]:
    """Face velocities averaged to cell centres."""
    uc = 0.5 * (state.u[:-1, :] + state.u[1:, :])
    wc = 0.5 * (state.w[:, :-1] + state.w[:, 1:])
    return uc, wc


def vorticity(state: State, grid: Grid) -> np.ndarray:
    """du/dz - dw/dx on nodes; wall nodes are zero under free slip."""
    xi = grid.zeros(Placement.NODE)
    xi[1:-1, 1:-1] = (
        np.diff(state.u[1:-1, :], axis=1) - np.diff(state.w[:, 1:-1], axis=0)
    ) / grid.h
    return xi
