"""Initial surface states: rest, linear wave modes, Gaussian packets.

Every constructor returns a state at t = 0 that already passes the
steepness guard, so a configuration built from one of these cannot abort
on its first step for geometric reasons.
"""

from __future__ import annotations

import numpy as np

from .dynamics import check_steepness
from .grid import PeriodicGrid, SurfaceState

SCENARIOS = ("rest", "linear_wave", "gaussian_packet")
PHASES = ("standing", "traveling")


def scenario_rest(grid: PeriodicGrid) -> SurfaceState:
    """Quiescent surface: the exact fixed point of the evolution."""
    z = np.zeros((grid.Nx, grid.Ny))
    return SurfaceState(0.0, z, z.copy())


def mode_frequency(grid: PeriodicGrid, m: int, n: int) -> float:
    """Linear angular frequency of lattice mode (m, n)."""
    k = np.hypot(m * 2.0 * np.pi / grid.Lx, n * 2.0 * np.pi / grid.Ly)
    if k == 0.0:
        raise ValueError("mode (0, 0) carries no wave")
    om2 = (grid.g + grid.sigma * k**2 / grid.rho) * k * np.tanh(k * grid.h)
    return float(np.sqrt(om2))


def scenario_linear_wave(grid: PeriodicGrid, eps: float, m: int, n: int,
                         phase: str = "standing") -> SurfaceState:
    """Single-mode cosine surface, at rest or propagating.

    The traveling branch pairs the elevation with the surface potential
    of the linearized right-moving wave, so the crest advances at the
    linear phase speed to first order in eps.
    """
    if phase not in PHASES:
        raise ValueError(f"phase must be one of {PHASES}")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if m != int(m) or n != int(n):
        raise ValueError("mode indices must be integers")
    m, n = int(m), int(n)
    if abs(m) > grid.Nx // 2 or abs(n) > grid.Ny // 2:
        raise ValueError(
            f"mode ({m}, {n}) is off the {grid.Nx}x{grid.Ny} lattice")
    if (m, n) == (0, 0) and eps > 0:
        raise ValueError("mode (0, 0) carries no wave")
    X, Y = grid.node_mesh()
    kx = m * 2.0 * np.pi / grid.Lx
    ky = n * 2.0 * np.pi / grid.Ly
    eta = eps * np.cos(kx * X + ky * Y)
    q = np.zeros_like(eta)
    if phase == "traveling" and eps > 0:
        k = float(np.hypot(kx, ky))
        om = mode_frequency(grid, m, n)
        q = (eps * om / (k * np.tanh(k * grid.h))) * np.sin(kx * X + ky * Y)
    state = SurfaceState(0.0, eta, q)
    if eps > 0:
        check_steepness(grid, state)
    return state


def scenario_gaussian_packet(grid: PeriodicGrid, amplitude: float,
                             width: float,
                             center: tuple[float, float] | None = None
                             ) -> SurfaceState:
    """Concentrated zero-mean bump with machine-negligible edge values.

    Requires the box to span at least 16 widths per direction, which
    puts the raw tail at or below exp(-32) of the peak before the mean
    is removed.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    if grid.Lx < 16 * width or grid.Ly < 16 * width:
        raise ValueError(
            f"packet width {width:g} too wide for the box "
            f"{grid.Lx:g} x {grid.Ly:g}; need >= 16 widths per direction")
    if center is None:
        center = (0.5 * grid.Lx, 0.5 * grid.Ly)
    X, Y = grid.node_mesh()
    r2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
    eta = amplitude * np.exp(-r2 / (2.0 * width**2))
    eta = eta - eta.mean()
    state = SurfaceState(0.0, eta, np.zeros_like(eta))
    if amplitude != 0:
        check_steepness(grid, state)
    return state
