"""Snapshot format round-trips, corruption handling, report CSV layout."""

import csv
import io

import numpy as np
import pytest

from wavelaw.audit import audit_trajectory, prepare_sample
from wavelaw.dynamics import step_rk4
from wavelaw.grid import SurfaceState, make_grid
from wavelaw.storage import (FORMAT_VERSION, MAGIC, load_trajectory,
                             read_snapshot, save_trajectory, snapshot_bytes,
                             write_density_report, write_probe_report,
                             write_snapshot)

G = 9.81
TWO_PI = 2.0 * np.pi


def small_grid():
    return make_grid(TWO_PI, 0.5 * TWO_PI, 8, 6, 0.8, G, 1.0, 0.02)


def random_state(grid, seed, t=0.0):
    rng = np.random.default_rng(seed)
    return SurfaceState(t, 1e-3 * rng.standard_normal((grid.Nx, grid.Ny)),
                        1e-3 * rng.standard_normal((grid.Nx, grid.Ny)))


class TestSnapshotRoundTrip:
    def test_single_record_bit_exact(self):
        grid = small_grid()
        state = random_state(grid, 3, t=1.375)
        buf = io.BytesIO(snapshot_bytes(grid, state))
        grid2, state2 = read_snapshot(buf)
        assert grid2 == grid
        assert state2.t == 1.375
        assert np.array_equal(state2.eta, state.eta)
        assert np.array_equal(state2.q, state.q)
        assert read_snapshot(buf) is None

    def test_trajectory_round_trip(self, tmp_path):
        grid = small_grid()
        states = [random_state(grid, s, t=0.25 * s) for s in range(4)]
        path = str(tmp_path / "t.wvlw")
        save_trajectory(path, grid, states)
        grid2, back = load_trajectory(path)
        assert grid2 == grid
        assert len(back) == 4
        for a, b in zip(states, back):
            assert b.t == a.t
            assert np.array_equal(b.eta, a.eta)
            assert np.array_equal(b.q, a.q)


class TestCorruption:
    def test_bad_magic(self):
        grid = small_grid()
        raw = bytearray(snapshot_bytes(grid, random_state(grid, 0)))
        raw[:4] = b"NOPE"
        with pytest.raises(ValueError, match="magic"):
            read_snapshot(io.BytesIO(bytes(raw)))

    def test_bad_version(self):
        grid = small_grid()
        raw = bytearray(snapshot_bytes(grid, random_state(grid, 0)))
        raw[4:8] = (FORMAT_VERSION + 9).to_bytes(4, "little")
        with pytest.raises(ValueError, match="version"):
            read_snapshot(io.BytesIO(bytes(raw)))

    def test_truncated_header(self):
        grid = small_grid()
        raw = snapshot_bytes(grid, random_state(grid, 0))
        with pytest.raises(ValueError, match="header"):
            read_snapshot(io.BytesIO(raw[:10]))

    def test_truncated_body(self):
        grid = small_grid()
        raw = snapshot_bytes(grid, random_state(grid, 0))
        with pytest.raises(ValueError, match="body"):
            read_snapshot(io.BytesIO(raw[:-16]))

    def test_mixed_grids_rejected(self, tmp_path):
        grid_a = small_grid()
        grid_b = make_grid(TWO_PI, 0.5 * TWO_PI, 8, 6, 0.9, G, 1.0, 0.02)
        path = str(tmp_path / "mix.wvlw")
        with open(path, "wb") as fh:
            write_snapshot(fh, grid_a, random_state(grid_a, 1))
            write_snapshot(fh, grid_b, random_state(grid_b, 2))
        with pytest.raises(ValueError, match="grids"):
            load_trajectory(path)

    def test_empty_file_rejected(self, tmp_path):
        path = str(tmp_path / "empty.wvlw")
        open(path, "wb").close()
        with pytest.raises(ValueError, match="no snapshots"):
            load_trajectory(path)


@pytest.fixture(scope="module")
def tiny_report():
    grid = make_grid(TWO_PI, TWO_PI, 8, 8, 1.0, G, 1.0)
    X, _ = grid.node_mesh()
    state = SurfaceState(0.0, 1e-3 * np.cos(X), np.zeros((8, 8)))
    dt = 0.02
    samples = [prepare_sample(grid, state)]
    for j in range(4):
        stepped = step_rk4(grid, state, dt)
        state = SurfaceState((j + 1) * dt, stepped.eta, stepped.q)
        samples.append(prepare_sample(grid, state))
    return audit_trajectory(grid, samples, dt)


class TestDensityReportFile:
    def test_header_layout(self, tmp_path, tiny_report):
        path = str(tmp_path / "r.csv")
        write_density_report(path, tiny_report)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        assert len(head) == 1 + 36 + 2
        assert head[0] == "time[s]"
        assert head[1] == "integral_T1[m^4/s]"
        assert head[4] == "integral_T4[m^3]"
        assert head[13] == "rhs_T1[m^4/s^2]"
        assert head[25] == "residual_T1[m^4/s^2]"
        assert head[-2:] == ["cond_fit[-]", "cond_kinematic[-]"]
        assert len(rows) == 1 + len(tiny_report.times)

    def test_values_round_trip_exactly(self, tmp_path, tiny_report):
        path = str(tmp_path / "r.csv")
        write_density_report(path, tiny_report)
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        assert np.array_equal(data[:, 0], tiny_report.times)
        # %.17g preserves doubles bit for bit
        assert np.array_equal(data[:, 4], tiny_report.density_integrals[3])
        assert np.array_equal(data[:, 25],
                              tiny_report.residuals[0])

    def test_probe_header_and_units(self, tmp_path, tiny_report):
        path = str(tmp_path / "p.csv")
        write_probe_report(path, tiny_report)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        labels = tiny_report.probe_labels
        assert len(head) == 1 + 6 * len(labels)
        assert head[1] == f"{labels[0]}_R1_re[m^3/s]"
        assert head[4] == f"{labels[0]}_R2_re[m^3/s^2]"
        # degree-3 probe integrals carry m^5
        d3 = next(i for i, lab in enumerate(labels) if lab.endswith("_3"))
        assert head[1 + 6 * d3] == f"{labels[d3]}_R1_re[m^5/s]"
        assert len(rows) == 1 + len(tiny_report.times)

    def test_probe_values_round_trip(self, tmp_path, tiny_report):
        path = str(tmp_path / "p.csv")
        write_probe_report(path, tiny_report)
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        assert np.array_equal(data[:, 1],
                              tiny_report.probe_residual_1[0].real)
        assert np.array_equal(data[:, 3],
                              tiny_report.probe_scale_1[0])
