"""Surface evolution: kinematic solve, Bernoulli rate, RK4 stepper.

The elevation rate comes from a dense collocation solve of the nonlocal
kinematic constraint (one complex row per lattice wavevector), or
alternatively from the Dirichlet-to-Neumann route in `extension`; the two
must agree on resolved states and that agreement is itself a correctness
check. The potential rate is the local Bernoulli relation with optional
surface tension. Products are dealiased; evolved rates are kept inside
the 2/3 band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .extension import EXPONENT_CAP, CollocationSolver, _flat_modes, \
    _mode_partition, surface_gradient_of_potential
from .grid import PeriodicGrid, SurfaceState, dealiased_product, \
    spectral_gradient


class SteepnessError(RuntimeError):
    """Raised when the surface leaves the resolvable graph regime."""


@dataclass
class RatePair:
    """Time derivatives of the surface fields at one instant."""

    eta_t: np.ndarray
    q_t: np.ndarray
    kinematic_cond: float = 0.0


def check_steepness(grid: PeriodicGrid, state: SurfaceState) -> None:
    """Abort when the wave is too steep or too close to the bed."""
    ex, ey = spectral_gradient(grid, state.eta)
    slope = float(np.max(np.hypot(ex, ey)))
    if slope > 0.5:
        raise SteepnessError(f"max surface slope {slope:.3f} exceeds 0.5")
    if state.eta.min() <= -0.9 * grid.h:
        raise SteepnessError(
            f"surface dips to {state.eta.min():.4g}, below -0.9 h")


def low_pass(grid: PeriodicGrid, f: np.ndarray) -> np.ndarray:
    """Truncate a field to the 2/3-rule band."""
    return np.real(np.fft.ifft2(np.fft.fft2(f) * grid.dealias_mask))


def _kinematic_nonlocal(grid: PeriodicGrid, state: SurfaceState):
    """Dense solve of the nonlocal kinematic constraint.

    Unknowns are the nodal values of eta_t. Each nonzero wavevector of a
    conjugate pair gives two real rows (real and imaginary part of its
    integral constraint); self-conjugate nonzero modes give one; the zero
    mode is the zero-mean row. Returns (eta_t, condition estimate).
    """
    eta, q = state.eta, state.q
    kx, ky, km = _flat_modes(grid)
    n = grid.Nx * grid.Ny
    eta_max = float(eta.max())
    arg_max = km.max() * (grid.h + eta_max)
    if arg_max > EXPONENT_CAP:
        raise ValueError(
            f"cosh argument {arg_max:.1f} exceeds cap {EXPONENT_CAP}")

    rep, _, selfc = _mode_partition(grid.Nx, grid.Ny)
    selfc_nz = selfc[selfc != 0]
    X, Y = grid.node_mesh()
    x, y, et = X.ravel(), Y.ravel(), eta.ravel()
    qx, qy = spectral_gradient(grid, q)
    qxf, qyf = qx.ravel(), qy.ravel()

    A = np.empty((n, n))
    b = np.empty(n)

    def rows(idx):
        theta = np.outer(kx[idx], x) + np.outer(ky[idx], y)
        zarg = np.outer(km[idx], et + grid.h)
        scale = np.cosh(km[idx] * (grid.h + eta_max))[:, None]
        C = np.cosh(zarg) / scale
        S = np.sinh(zarg) / scale
        D = (np.outer(kx[idx], qxf) + np.outer(ky[idx], qyf)) / km[idx][:, None]
        return np.cos(theta), np.sin(theta), C, S * D

    ct, st, C, SD = rows(rep)
    p = rep.size
    A[0:2 * p:2] = st * C
    b[0:2 * p:2] = np.sum(ct * SD, axis=1)
    A[1:2 * p:2] = ct * C
    b[1:2 * p:2] = -np.sum(st * SD, axis=1)
    ct, st, C, SD = rows(selfc_nz)
    A[2 * p:-1] = ct * C
    b[2 * p:-1] = -np.sum(st * SD, axis=1)
    A[-1] = 1.0   # zero-mean row for k = 0
    b[-1] = 0.0

    anorm = np.linalg.norm(A, 1)
    lu = lu_factor(A, check_finite=False)
    rcond, info = lapack.dgecon(lu[0], anorm, norm="1")
    if info != 0 or rcond == 0.0 or not np.isfinite(rcond):
        raise np.linalg.LinAlgError(
            f"kinematic constraint matrix is singular (rcond={rcond})")
    u = lu_solve(lu, b, check_finite=False)
    u = u + lu_solve(lu, b - A @ u, check_finite=False)
    if not np.all(np.isfinite(u)):
        raise np.linalg.LinAlgError(
            f"kinematic solve produced non-finite rates "
            f"(cond estimate {1.0 / rcond:.3e})")
    return u.reshape(grid.Nx, grid.Ny), float(1.0 / rcond)


def _kinematic_dno(grid: PeriodicGrid, state: SurfaceState):
    """Elevation rate via harmonic extension of q (cross-check route)."""
    solver = CollocationSolver(grid, state.eta)
    pot = solver.fit(state.q)
    phi_x, phi_y, phi_z = surface_gradient_of_potential(grid, state.eta, pot)
    ex, ey = spectral_gradient(grid, state.eta)
    return phi_z - phi_x * ex - phi_y * ey, solver.cond_estimate


_KINEMATIC_ROUTES = {"nonlocal": _kinematic_nonlocal, "dno": _kinematic_dno}


def solve_kinematic_nonlocal(grid: PeriodicGrid,
                             state: SurfaceState) -> np.ndarray:
    """Elevation rate from the nonlocal integral constraints."""
    state.validate(grid)
    return _kinematic_nonlocal(grid, state)[0]


def capillary_acceleration(grid: PeriodicGrid, eta: np.ndarray) -> np.ndarray:
    """Mean-curvature divergence scaled by sigma/rho.

    The slope quotient is band-limited before differencing so the same
    field enters the evolution and any budget built on top of it.
    """
    ex, ey = spectral_gradient(grid, eta)
    w = np.sqrt(1.0 + ex**2 + ey**2)
    uxh = np.fft.fft2(low_pass(grid, ex / w))
    uyh = np.fft.fft2(low_pass(grid, ey / w))
    div = np.real(np.fft.ifft2(1j * grid.kx_odd * uxh
                               + 1j * grid.ky_odd * uyh))
    return (grid.sigma / grid.rho) * div


def bernoulli_q_t(grid: PeriodicGrid, state: SurfaceState,
                  eta_t: np.ndarray) -> np.ndarray:
    """Rate of the surface potential from the local Bernoulli relation.

    q_t = -|grad q|^2/2 - g eta + Z^2/(2(1+|grad eta|^2)) + capillarity,
    Z = eta_t + grad q . grad eta. Products dealiased, quotients formed
    pointwise and band-limited afterwards.
    """
    eta, q = state.eta, state.q
    qx, qy = spectral_gradient(grid, q)
    ex, ey = spectral_gradient(grid, eta)
    grad_q_sq = dealiased_product(grid, qx, qx) + dealiased_product(grid, qy, qy)
    z = eta_t + dealiased_product(grid, qx, ex) + dealiased_product(grid, qy, ey)
    denom = 1.0 + ex**2 + ey**2
    ratio = dealiased_product(grid, z, z) / denom
    q_t = -0.5 * grad_q_sq - grid.g * eta + 0.5 * ratio
    if grid.sigma > 0.0:
        q_t = q_t + capillary_acceleration(grid, eta)
    return low_pass(grid, q_t)


def rates(grid: PeriodicGrid, state: SurfaceState,
          solver: str = "nonlocal") -> RatePair:
    """Full right-hand side of the evolution at one state."""
    state.validate(grid)
    check_steepness(grid, state)
    try:
        route = _KINEMATIC_ROUTES[solver]
    except KeyError:
        raise ValueError(f"unknown kinematic solver {solver!r}") from None
    eta_t, cond = route(grid, state)
    eta_t = low_pass(grid, eta_t)
    q_t = bernoulli_q_t(grid, state, eta_t)
    return RatePair(eta_t, q_t, cond)


def step_rk4(grid: PeriodicGrid, state: SurfaceState, dt: float,
             solver: str = "nonlocal") -> SurfaceState:
    """Classical four-stage Runge-Kutta update of (eta, q)."""
    if dt <= 0:
        raise ValueError("dt must be positive")

    def shifted(c, k):
        return SurfaceState(state.t + c * dt, state.eta + c * dt * k.eta_t,
                            state.q + c * dt * k.q_t)

    k1 = rates(grid, state, solver)
    k2 = rates(grid, shifted(0.5, k1), solver)
    k3 = rates(grid, shifted(0.5, k2), solver)
    k4 = rates(grid, shifted(1.0, k3), solver)
    eta = state.eta + dt / 6.0 * (k1.eta_t + 2 * k2.eta_t + 2 * k3.eta_t
                                  + k4.eta_t)
    q = state.q + dt / 6.0 * (k1.q_t + 2 * k2.q_t + 2 * k3.q_t + k4.q_t)
    return SurfaceState(state.t + dt, eta, q)
