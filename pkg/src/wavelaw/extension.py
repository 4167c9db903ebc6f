"""Harmonic extension of surface data into the fluid bulk.

A real potential is represented as a lattice sum of cosh-profile modes,

    phi(x, y, z) = sum_k c_k * cosh(|k|(z + h)) / scale_k * exp(i k.x),

which satisfies the Laplace equation and the flat-bed Neumann condition
term by term. The coefficients come from a dense collocation fit of the
Dirichlet trace on the (possibly curved) free surface. The same machinery
extends the time derivative of the potential, whose surface trace follows
from the chain rule on the surface potential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .grid import PeriodicGrid, SurfaceState, spectral_gradient

# cosh arguments above this overflow float64; exceeding the cap is an
# error, never a silent clamp
EXPONENT_CAP = 700.0


@dataclass(frozen=True)
class ModalPotential:
    """Bulk harmonic potential in normalized cosh-mode form.

    coeffs[m, n] multiplies cosh(|k|(z+h))/scale[m, n] * exp(i k.x) with k
    on the fft lattice; Hermitian symmetry keeps the potential real.
    cond_estimate and fit_residual record the collocation solve that
    produced the coefficients.
    """

    coeffs: np.ndarray
    scale: np.ndarray
    cond_estimate: float
    fit_residual: float

    def validate(self) -> None:
        Nx, Ny = self.coeffs.shape
        flipped = np.conj(np.roll(self.coeffs[::-1, ::-1], (1, 1), axis=(0, 1)))
        if not np.allclose(self.coeffs, flipped, atol=1e-12 * max(
                1.0, np.abs(self.coeffs).max())):
            raise ValueError("coefficients lack Hermitian symmetry")


def _flat_modes(grid: PeriodicGrid):
    """Flattened (kx, ky, |k|) arrays in row-major lattice order."""
    return grid.kx.ravel(), grid.ky.ravel(), grid.kmag.ravel()


def _mode_partition(Nx: int, Ny: int):
    """Split the lattice into conjugate pairs and self-conjugate modes.

    Returns (rep, conj, selfc) flat indices: one representative per
    +/-k pair, its partner, and the modes equal to their own conjugate
    (the zero mode and the Nyquist corners).
    """
    mi = np.repeat(np.arange(Nx), Ny)
    ni = np.tile(np.arange(Ny), Nx)
    idx = mi * Ny + ni
    cidx = ((-mi) % Nx) * Ny + ((-ni) % Ny)
    rep = idx[idx < cidx]
    conj = cidx[idx < cidx]
    selfc = idx[idx == cidx]
    return rep, conj, selfc


class CollocationSolver:
    """Dense collocation fit factorized once per surface shape.

    Assembles the real cosine/sine collocation matrix for the given
    elevation, LU-factorizes it, and estimates its 1-norm condition
    number. fit() may then be called repeatedly (surface potential, its
    time derivative) reusing the factorization.
    """

    def __init__(self, grid: PeriodicGrid, eta: np.ndarray):
        if eta.min() <= -grid.h:
            raise ValueError("surface touches the bed: min(eta) <= -h")
        self.grid = grid
        kx, ky, km = _flat_modes(grid)
        eta_max = float(eta.max())
        arg_max = km.max() * (grid.h + eta_max)
        if arg_max > EXPONENT_CAP:
            raise ValueError(
                f"cosh argument {arg_max:.1f} exceeds cap {EXPONENT_CAP}")
        scale = np.cosh(km * (grid.h + eta_max))

        rep, conj, selfc = _mode_partition(grid.Nx, grid.Ny)
        self._rep, self._conj, self._selfc = rep, conj, selfc

        X, Y = grid.node_mesh()
        x, y, et = X.ravel(), Y.ravel(), eta.ravel()
        n = x.size
        A = np.empty((n, n))
        zfac = np.cosh(np.outer(et + grid.h, km[rep])) / scale[rep]
        phase = np.outer(x, kx[rep]) + np.outer(y, ky[rep])
        npair = rep.size
        A[:, 0:2 * npair:2] = np.cos(phase) * zfac
        A[:, 1:2 * npair:2] = np.sin(phase) * zfac
        zfac = np.cosh(np.outer(et + grid.h, km[selfc])) / scale[selfc]
        phase = np.outer(x, kx[selfc]) + np.outer(y, ky[selfc])
        A[:, 2 * npair:] = np.cos(phase) * zfac

        anorm = np.linalg.norm(A, 1)
        self._A = A
        self._lu = lu_factor(A, check_finite=False)
        rcond, info = lapack.dgecon(self._lu[0], anorm, norm="1")
        if info != 0 or rcond == 0.0 or not np.isfinite(rcond):
            raise np.linalg.LinAlgError(
                f"collocation matrix is singular (rcond={rcond})")
        self.cond_estimate = float(1.0 / rcond)
        self._scale = scale.reshape(grid.Nx, grid.Ny)

    def fit(self, dirichlet: np.ndarray) -> ModalPotential:
        """Solve for modal coefficients reproducing dirichlet at the nodes."""
        b = dirichlet.ravel()
        u = lu_solve(self._lu, b, check_finite=False)
        # one pass of iterative refinement
        r = b - self._A @ u
        u = u + lu_solve(self._lu, r, check_finite=False)
        resid = float(np.max(np.abs(b - self._A @ u)))
        if not np.all(np.isfinite(u)):
            raise np.linalg.LinAlgError(
                f"collocation solve produced non-finite coefficients "
                f"(cond estimate {self.cond_estimate:.3e})")

        npair = self._rep.size
        a, s = u[0:2 * npair:2], u[1:2 * npair:2]
        c = np.zeros(b.size, dtype=complex)
        c[self._rep] = 0.5 * (a - 1j * s)
        c[self._conj] = 0.5 * (a + 1j * s)
        c[self._selfc] = u[2 * npair:]
        grid = self.grid
        return ModalPotential(c.reshape(grid.Nx, grid.Ny), self._scale,
                              self.cond_estimate, resid)


def fit_modal_potential(grid: PeriodicGrid, eta: np.ndarray,
                        dirichlet: np.ndarray) -> ModalPotential:
    """Fit a bulk potential whose surface trace matches dirichlet on eta."""
    return CollocationSolver(grid, eta).fit(dirichlet)


def potential_fields(grid: PeriodicGrid, pot: ModalPotential, x, y, z,
                     want=("f",), chunk: int = 256) -> dict:
    """Evaluate the potential and/or first derivatives at arbitrary points.

    x, y, z are broadcast-compatible arrays; returns a dict keyed by the
    requested kinds: "f" (value), "x", "y" (horizontal derivatives), "z".
    """
    x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float),
                                  np.asarray(z, float))
    shape = x.shape
    xf, yf, zf = x.ravel(), y.ravel(), z.ravel()
    kx, ky, km = _flat_modes(grid)
    c = pot.coeffs.ravel()
    scale = pot.scale.ravel()
    arg_max = km.max() * (grid.h + zf.max())
    if arg_max > EXPONENT_CAP:
        raise ValueError(
            f"cosh argument {arg_max:.1f} exceeds cap {EXPONENT_CAP}")

    out = {k: np.zeros(xf.size) for k in want}
    for start in range(0, c.size, chunk):
        sl = slice(start, start + chunk)
        phase = np.outer(xf, kx[sl]) + np.outer(yf, ky[sl])
        E = np.exp(1j * phase)
        zh = np.outer(zf + grid.h, km[sl])
        if any(k in want for k in ("f", "x", "y")):
            Tc = E * (np.cosh(zh) / scale[sl])
            if "f" in want:
                out["f"] += (Tc @ c[sl]).real
            if "x" in want:
                out["x"] += (Tc @ (1j * kx[sl] * c[sl])).real
            if "y" in want:
                out["y"] += (Tc @ (1j * ky[sl] * c[sl])).real
        if "z" in want:
            Ts = E * (np.sinh(zh) / scale[sl])
            out["z"] += (Ts @ (km[sl] * c[sl])).real
    return {k: v.reshape(shape) for k, v in out.items()}


def surface_gradient_of_potential(grid: PeriodicGrid, eta: np.ndarray,
                                  pot: ModalPotential):
    """Bulk gradient of the potential evaluated on the free surface.

    Returns (phi_x, phi_y, phi_z) as node fields.
    """
    X, Y = grid.node_mesh()
    vals = potential_fields(grid, pot, X, Y, eta, want=("x", "y", "z"))
    return vals["x"], vals["y"], vals["z"]


def bottom_trace(grid: PeriodicGrid, pot: ModalPotential):
    """Potential and horizontal gradient on the bed z = -h.

    The vertical derivative vanishes there identically (basis property),
    so only (phi_b, phi_b_x, phi_b_y) are returned.
    """
    n = grid.Nx * grid.Ny
    C = pot.coeffs / pot.scale
    phi_b = np.real(np.fft.ifft2(C) * n)
    phi_b_x = np.real(np.fft.ifft2(1j * grid.kx_odd * C) * n)
    phi_b_y = np.real(np.fft.ifft2(1j * grid.ky_odd * C) * n)
    return phi_b, phi_b_x, phi_b_y


def dno_eta_t(grid: PeriodicGrid, state: SurfaceState) -> np.ndarray:
    """Kinematic surface velocity via the Dirichlet-to-Neumann route.

    Fits the potential to q on eta and returns
    eta_t = phi_z - phi_x eta_x - phi_y eta_y at the nodes.
    """
    state.validate(grid)
    pot = fit_modal_potential(grid, state.eta, state.q)
    phi_x, phi_y, phi_z = surface_gradient_of_potential(grid, state.eta, pot)
    eta_x, eta_y = spectral_gradient(grid, state.eta)
    return phi_z - phi_x * eta_x - phi_y * eta_y


def seam_plane_fields(grid: PeriodicGrid, pot: ModalPotential, axis: int,
                      z: np.ndarray, want=("f", "x", "y", "z")) -> dict:
    """Potential fields on the vertical seam plane (lab x = 0 or y = 0).

    z has shape (n_line, nz): per transverse node, the vertical stations
    where the fields are needed. Returns arrays of the same shape.
    """
    if axis == 0:
        line = grid.y
        X = np.zeros_like(z)
        Y = line[:, None] * np.ones_like(z)
    else:
        line = grid.x
        X = line[:, None] * np.ones_like(z)
        Y = np.zeros_like(z)
    return potential_fields(grid, pot, X, Y, z, want=want)
