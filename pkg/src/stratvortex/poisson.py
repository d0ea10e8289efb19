"""Elliptic solvers on the staggered grid.

``solve_variable_poisson`` handles div(beta grad phi) = rhs on cell centres
with homogeneous Neumann walls, by conjugate gradients preconditioned with
the constant-coefficient Neumann Laplacian (diagonalised by a DCT-II).
The background density only varies by a few percent, so the preconditioned
system is nearly the identity and a handful of iterations suffice.

``solve_dirichlet_nodes`` solves the 5-point Laplacian on nodes with zero
boundary values by a DST-I, used for the diagnosed streamfunction.
"""

from __future__ import annotations

import numpy as np
from scipy import fft

from .errors import CompatibilityError, ConvergenceError
from .grid import Grid

COMPAT_RTOL = 1e-8


def face_coefficients(beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic face averages of a cell-centred coefficient.

    Wall faces get zero, which encodes the Neumann condition.
    """
    bx = np.zeros((beta.shape[0] + 1, beta.shape[1]))
    bz = np.zeros((beta.shape[0], beta.shape[1] + 1))
    bx[1:-1, :] = 0.5 * (beta[1:, :] + beta[:-1, :])
    bz[:, 1:-1] = 0.5 * (beta[:, 1:] + beta[:, :-1])
    return bx, bz


def apply_operator(phi: np.ndarray, bx: np.ndarray, bz: np.ndarray, h: float) -> np.ndarray:
    """div(beta grad phi) with face coefficients (walls carry zero)."""
    gx = np.zeros_like(bx)
    gz = np.zeros_like(bz)
    gx[1:-1, :] = bx[1:-1, :] * np.diff(phi, axis=0)
    gz[:, 1:-1] = bz[:, 1:-1] * np.diff(phi, axis=1)
    return (np.diff(gx, axis=0) + np.diff(gz, axis=1)) / (h * h)


class _NeumannPreconditioner:
    def __init__(self, shape, h, beta_bar):
        nx, nz = shape
        sx = (2.0 / h * np.sin(np.pi * np.arange(nx) / (2 * nx))) ** 2
        sz = (2.0 / h * np.sin(np.pi * np.arange(nz) / (2 * nz))) ** 2
        lam = beta_bar * (sx[:, None] + sz[None, :])
        lam[0, 0] = np.inf  # drop the constant mode
        self.inv = 1.0 / lam

    def __call__(self, r):
        return fft.idctn(fft.dctn(r, type=2, norm="ortho") * self.inv, type=2, norm="ortho")


def solve_variable_poisson(beta, rhs, grid: Grid, cfg=None, *, tol=None, max_iter=None,
                           x0=None, faces=None):
    """Solve div(beta grad phi) = rhs with zero normal gradient on the walls.

    Returns the zero-mean solution. ``beta`` is cell-centred (averaged to
    faces) unless explicit face coefficients are passed via ``faces``.
    Tolerance and iteration cap come from ``cfg`` (a SolverConfig) unless
    given directly.
    """
    tol = tol if tol is not None else (cfg.poisson_tol if cfg is not None else 1e-10)
    max_iter = max_iter if max_iter is not None else (cfg.poisson_max_iter if cfg is not None else 500)
    h = grid.h
    rhs = np.asarray(rhs, dtype=float)
    if faces is None:
        beta = np.asarray(beta, dtype=float)
        if np.any(~(beta > 0)):
            raise ValueError("beta must be positive everywhere")
        bx, bz = face_coefficients(beta)
    else:
        bx, bz = faces

    total = rhs.sum()
    scale = np.abs(rhs).sum()
    if abs(total) > COMPAT_RTOL * scale:
        raise CompatibilityError(
            f"Neumann right-hand side has nonzero mean (sum={total:.3e}, sum|rhs|={scale:.3e})"
        )
    b = -(rhs - total / rhs.size)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(rhs)

    beta_bar = 0.5 * (bx[1:-1, :].mean() + bz[:, 1:-1].mean())
    precond = _NeumannPreconditioner(rhs.shape, h, beta_bar)

    def matvec(v):
        return -apply_operator(v, bx, bz, h)

    x = np.zeros_like(b) if x0 is None else np.asarray(x0, float) - np.mean(x0)
    r = b - matvec(x) if x0 is not None else b.copy()
    z = precond(r)
    d = z.copy()
    rz = np.vdot(r, z)
    for it in range(max_iter + 1):
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x - x.mean()
        if it == max_iter:
            break
        Ad = matvec(d)
        alpha = rz / np.vdot(d, Ad)
        x += alpha * d
        r -= alpha * Ad
        z = precond(r)
        rz_new = np.vdot(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise ConvergenceError(
        f"Poisson solve did not reach relative residual {tol:g} in {max_iter} iterations "
        f"(reached {res:.3e})"
    )


def solve_dirichlet_nodes(rhs_interior: np.ndarray, h: float) -> np.ndarray:
    """5-point Laplacian = rhs on interior nodes, zero on the boundary.

    ``rhs_interior`` has shape (nx - 1, nz - 1); the returned array includes
    the boundary, shape (nx + 1, nz + 1).
    """
    mx, mz = rhs_interior.shape
    nx, nz = mx + 1, mz + 1
    sx = (2.0 / h * np.sin(np.pi * np.arange(1, nx) / (2 * nx))) ** 2
    sz = (2.0 / h * np.sin(np.pi * np.arange(1, nz) / (2 * nz))) ** 2
    lam = -(sx[:, None] + sz[None, :])
    coef = fft.dstn(rhs_interior, type=1, norm="ortho") / lam
    out = np.zeros((nx + 1, nz + 1))
    out[1:-1, 1:-1] = fft.idstn(coef, type=1, norm="ortho")
    return out


def nodal_laplacian(psi: np.ndarray, h: float) -> np.ndarray:
    """5-point Laplacian of a nodal field at interior nodes."""
    return (
        psi[2:, 1:-1] + psi[:-2, 1:-1] + psi[1:-1, 2:] + psi[1:-1, :-2] - 4.0 * psi[1:-1, 1:-1]
    ) / (h * h)
