"""Evolution right-hand sides and stepping tests.

Oracles: linearized dispersion for small standing waves, symbolic series
for the capillary curvature term, and cross-agreement of the two
independent kinematic solvers.
"""

import numpy as np
import pytest

from wavelaw.dynamics import (
    SteepnessError,
    bernoulli_q_t,
    check_steepness,
    rates,
    solve_kinematic_nonlocal,
    step_rk4,
)
from wavelaw.extension import dno_eta_t
from wavelaw.grid import SurfaceState, integrate_surface, make_grid

TWO_PI = 2.0 * np.pi
G = 9.81


def unit_grid(N=16, h=1.0, sigma=0.0, rho=1.0):
    return make_grid(TWO_PI, TWO_PI, N, N, h, G, rho, sigma)


def standing_wave(grid, eps, m=1, n=0):
    X, Y = grid.node_mesh()
    kx = m * TWO_PI / grid.Lx
    ky = n * TWO_PI / grid.Ly
    return SurfaceState(0.0, eps * np.cos(kx * X + ky * Y),
                        np.zeros((grid.Nx, grid.Ny)))


def mode_period(grid, m=1, n=0):
    k = np.hypot(m * TWO_PI / grid.Lx, n * TWO_PI / grid.Ly)
    om2 = (grid.g + grid.sigma * k**2 / grid.rho) * k * np.tanh(k * grid.h)
    return TWO_PI / np.sqrt(om2)


def mode_amplitude(grid, eta, m=1, n=0):
    X, Y = grid.node_mesh()
    kx = m * TWO_PI / grid.Lx
    ky = n * TWO_PI / grid.Ly
    c = np.cos(kx * X + ky * Y)
    return integrate_surface(grid, eta * c) / integrate_surface(grid, c * c)


class TestKinematicNonlocal:
    def test_zero_dirichlet_gives_zero_rate(self):
        grid = unit_grid(16)
        rng = np.random.default_rng(3)
        X, Y = grid.node_mesh()
        eta = 0.05 * np.cos(X) * np.cos(2 * Y) + 0.02 * np.sin(Y)
        state = SurfaceState(0.0, eta, np.zeros((16, 16)))
        assert np.max(np.abs(solve_kinematic_nonlocal(grid, state))) == 0.0

    def test_flat_symbol(self):
        grid = unit_grid(32)
        X, _ = grid.node_mesh()
        state = SurfaceState(0.0, np.zeros((32, 32)), np.cos(X))
        et = solve_kinematic_nonlocal(grid, state)
        assert np.max(np.abs(et - np.tanh(1.0) * np.cos(X))) < 1e-10

    def test_flat_oblique_symbol(self):
        grid = unit_grid(32, h=0.6)
        X, Y = grid.node_mesh()
        q = np.sin(X + 2 * Y)
        state = SurfaceState(0.0, np.zeros((32, 32)), q)
        k = np.sqrt(5.0)
        et = solve_kinematic_nonlocal(grid, state)
        assert np.max(np.abs(et - k * np.tanh(k * 0.6) * q)) < 1e-10

    def test_cross_route_on_evolved_packet(self):
        # packet width chosen so the data band folds below the tolerance;
        # at s = Lx/20 the two routes alias differently at ~3e-5 relative
        grid = unit_grid(32)
        Xc, Yc = grid.node_mesh(centered=True)
        s = grid.Lx / 10.0
        bump = 1e-3 * np.exp(-(Xc**2 + Yc**2) / (2 * s**2))
        state = SurfaceState(0.0, bump - bump.mean(),
                             np.zeros((32, 32)))
        for _ in range(5):
            state = step_rk4(grid, state, 0.01)
        a = solve_kinematic_nonlocal(grid, state)
        b = dno_eta_t(grid, state)
        scale = np.max(np.abs(a))
        assert scale > 0
        assert np.max(np.abs(a - b)) / scale < 1e-8


class TestBernoulli:
    def test_rest_fixed_point(self):
        grid = unit_grid(8)
        z = np.zeros((8, 8))
        state = SurfaceState(0.0, z, z)
        assert np.max(np.abs(bernoulli_q_t(grid, state, z))) == 0.0

    def test_pure_elevation_is_hydrostatic(self):
        grid = unit_grid(16)
        X, _ = grid.node_mesh()
        eps = 1e-3
        state = SurfaceState(0.0, eps * np.cos(X), np.zeros((16, 16)))
        qt = bernoulli_q_t(grid, state, np.zeros((16, 16)))
        assert np.max(np.abs(qt + G * eps * np.cos(X))) < 1e-15

    def test_capillary_series(self):
        # q = 0, eta = eps cos x:
        # q_t = -g eps cos x + (sigma/rho)(-eps cos x
        #        + (3/2) eps^3 sin^2 x cos x) + O(eps^5)
        grid = unit_grid(32, sigma=2.0, rho=1.0)
        X, _ = grid.node_mesh()
        eps = 1e-2
        state = SurfaceState(0.0, eps * np.cos(X), np.zeros((32, 32)))
        qt = bernoulli_q_t(grid, state, np.zeros((32, 32)))
        kappa = -eps * np.cos(X) + 1.5 * eps**3 * np.sin(X) ** 2 * np.cos(X)
        oracle = -G * eps * np.cos(X) + 2.0 * kappa
        assert np.max(np.abs(qt - oracle)) < 1e-9


class TestRates:
    def test_rest_zero(self):
        grid = unit_grid(8)
        z = np.zeros((8, 8))
        r = rates(grid, SurfaceState(0.0, z, z))
        assert np.max(np.abs(r.eta_t)) == 0.0
        assert np.max(np.abs(r.q_t)) == 0.0
        assert np.isfinite(r.kinematic_cond)

    def test_single_mode_linear_rates(self):
        grid = unit_grid(16, sigma=0.5, rho=1.0)
        X, _ = grid.node_mesh()
        eps = 1e-3
        state = SurfaceState(0.0, eps * np.cos(X), np.zeros((16, 16)))
        r = rates(grid, state)
        assert np.max(np.abs(r.eta_t)) < 1e-14
        oracle = -(G + 0.5) * eps * np.cos(X)
        assert np.max(np.abs(r.q_t - oracle)) < 1e-8

    def test_unknown_solver_rejected(self):
        grid = unit_grid(8)
        z = np.zeros((8, 8))
        with pytest.raises(ValueError, match="solver"):
            rates(grid, SurfaceState(0.0, z, z), solver="magic")

    def test_dno_route_matches_nonlocal(self):
        grid = unit_grid(16)
        state = standing_wave(grid, 1e-3)
        state = step_rk4(grid, state, 0.02)
        ra = rates(grid, state, solver="nonlocal")
        rb = rates(grid, state, solver="dno")
        scale = np.max(np.abs(ra.eta_t))
        assert np.max(np.abs(ra.eta_t - rb.eta_t)) < 1e-8 * scale


class TestGuard:
    def test_steep_slope_aborts(self):
        grid = unit_grid(16)
        X, _ = grid.node_mesh()
        state = SurfaceState(0.0, 0.6 * np.cos(X), np.zeros((16, 16)))
        with pytest.raises(SteepnessError, match="slope"):
            check_steepness(grid, state)

    def test_deep_trough_aborts(self):
        grid = unit_grid(16)
        state = SurfaceState(0.0, np.full((16, 16), -0.95), np.zeros((16, 16)))
        with pytest.raises(SteepnessError, match="-0.9"):
            check_steepness(grid, state)

    def test_moderate_state_passes(self):
        grid = unit_grid(16)
        X, _ = grid.node_mesh()
        check_steepness(grid, SurfaceState(0.0, 0.3 * np.cos(X),
                                           np.zeros((16, 16))))


class TestStepper:
    def test_rest_is_fixed_point(self):
        grid = unit_grid(8)
        z = np.zeros((8, 8))
        out = step_rk4(grid, SurfaceState(0.0, z, z), 0.1)
        assert out.t == pytest.approx(0.1)
        assert np.max(np.abs(out.eta)) == 0.0
        assert np.max(np.abs(out.q)) == 0.0

    def test_rejects_nonpositive_dt(self):
        grid = unit_grid(8)
        z = np.zeros((8, 8))
        with pytest.raises(ValueError):
            step_rk4(grid, SurfaceState(0.0, z, z), 0.0)

    def test_linear_period_return(self):
        grid = unit_grid(16)
        eps = 1e-3
        state = standing_wave(grid, eps)
        T = mode_period(grid)
        n = 64
        for _ in range(n):
            state = step_rk4(grid, state, T / n)
        err = np.max(np.abs(state.eta - eps * np.cos(grid.node_mesh()[0])))
        assert err / eps < 5e-3

    def test_mass_invariance(self):
        grid = unit_grid(16)
        Xc, Yc = grid.node_mesh(centered=True)
        s = grid.Lx / 8.0
        bump = 0.02 * np.exp(-(Xc**2 + Yc**2) / (2 * s**2))
        state = SurfaceState(0.0, bump - bump.mean(), np.zeros((16, 16)))
        m0 = integrate_surface(grid, state.eta)
        for _ in range(10):
            state = step_rk4(grid, state, 0.02)
        m1 = integrate_surface(grid, state.eta)
        assert abs(m1 - m0) < 1e-9 * 0.02 * grid.area

    def test_convergence_order(self):
        grid = unit_grid(16)
        state0 = standing_wave(grid, 1e-3)
        T = mode_period(grid)
        horizon = T / 8.0

        def advance(nsteps):
            s = state0.copy()
            for _ in range(nsteps):
                s = step_rk4(grid, s, horizon / nsteps)
            return s

        s1, s2, s4 = advance(4), advance(8), advance(16)
        e12 = np.max(np.abs(s1.eta - s2.eta)) + np.max(np.abs(s1.q - s2.q))
        e24 = np.max(np.abs(s2.eta - s4.eta)) + np.max(np.abs(s2.q - s4.q))
        order = np.log2(e12 / e24)
        assert 3.9 < order < 4.6, f"measured order {order:.2f}"

    def test_capillary_dispersion(self):
        # quarter-period zero crossing of the (2,0) mode amplitude
        grid = unit_grid(16, sigma=2.0, rho=1.0)
        eps = 1e-3
        state = standing_wave(grid, eps, m=2)
        T = mode_period(grid, m=2)
        dt = T / 128.0
        times = [0.0]
        amps = [mode_amplitude(grid, state.eta, m=2)]
        for i in range(40):
            state = step_rk4(grid, state, dt)
            times.append((i + 1) * dt)
            amps.append(mode_amplitude(grid, state.eta, m=2))
            if len(amps) > 2 and amps[-2] < 0:
                break   # one sample beyond the crossing for the fit
        amps = np.array(amps)
        times = np.array(times)
        i = np.argmax(amps < 0)
        assert i >= 3
        # cubic through the four samples around the crossing, abscissa in
        # step units for conditioning
        sl = slice(i - 2, i + 2)
        t0 = times[i - 1]
        poly = np.polyfit((times[sl] - t0) / dt, amps[sl], 3)
        roots = np.roots(poly)
        real = roots[np.abs(roots.imag) < 1e-12].real
        u = real[(real >= 0) & (real <= 1.0)][0]
        omega = 0.5 * np.pi / (t0 + u * dt)
        exact = TWO_PI / T
        assert abs(omega - exact) / exact < 1e-3
