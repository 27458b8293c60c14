import csv
import itertools

import numpy as np

from roughwalk.anomaly import estimate_constants
from roughwalk.graph import GraphPoint, embed
from roughwalk.sampler import (decompose_excursions, excursion_stream, reconstruct_embedded,
                               sample_trajectory, write_excursions_csv, write_trajectory_csv)


class TestSampleTrajectory:
    def test_zero_steps(self, rotating09, origin2):
        traj = sample_trajectory(rotating09, origin2, 0, seed=1)
        assert len(traj) == 0
        assert traj.cells.shape == (1,)
        assert traj.point(0) == origin2

    def test_projection_is_deterministic_cycle(self, rotating09, origin2):
        for seed in (0, 1, 99):
            traj = sample_trajectory(rotating09, origin2, 40, seed=seed)
            assert np.array_equal(traj.cells, np.arange(41) % 4)

    def test_same_seed_reproduces_bitwise(self, cubic09, origin3):
        a = sample_trajectory(cubic09, origin3, 500, seed=123)
        b = sample_trajectory(cubic09, origin3, 500, seed=123)
        assert np.array_equal(a.lattice, b.lattice)
        assert np.array_equal(a.cells, b.cells)

    def test_different_streams_differ(self, cubic09, origin3):
        a = sample_trajectory(cubic09, origin3, 200, seed=123, stream=0)
        b = sample_trajectory(cubic09, origin3, 200, seed=123, stream=1)
        assert not np.array_equal(a.lattice, b.lattice)

    def test_steps_follow_transition_law(self, cubic09, origin3):
        traj = sample_trajectory(cubic09, origin3, 300, seed=5)
        legal = {(t.from_cell, t.to_cell, t.delta_lattice) for t in cubic09.transitions if t.prob > 0}
        for n in range(300):
            delta = tuple(int(x) for x in (traj.lattice[n + 1] - traj.lattice[n]))
            assert (int(traj.cells[n]), int(traj.cells[n + 1]), delta) in legal

    def test_embedded_matches_embed(self, cubic09, origin3):
        traj = sample_trajectory(cubic09, origin3, 50, seed=2)
        for n in (0, 17, 50):
            assert np.array_equal(traj.embedded[n], embed(cubic09, traj.point(n)))


class TestDecompose:
    def test_rotating_twelve_steps(self, rotating09, origin2):
        traj = sample_trajectory(rotating09, origin2, 12, seed=3)
        times, excursions, tail = decompose_excursions(traj)
        assert np.array_equal(times, [0, 4, 8, 12])
        assert len(excursions) == 3
        assert all(exc.length == 4 for exc in excursions)
        assert tail.length == 0

    def test_short_trajectory_only_tail(self, rotating09, origin2):
        traj = sample_trajectory(rotating09, origin2, 2, seed=3)
        times, excursions, tail = decompose_excursions(traj)
        assert np.array_equal(times, [0])
        assert excursions == []
        assert tail.length == 2 and not tail.complete

    def test_rel_path_starts_at_cell_representative(self, cubic09, origin3):
        traj = sample_trajectory(cubic09, origin3, 400, seed=4)
        _, excursions, _ = decompose_excursions(traj)
        for exc in excursions:
            assert np.array_equal(exc.rel_path[0], cubic09.cells[origin3.cell])
            assert np.array_equal(exc.rel_path[-1] - exc.rel_path[0], exc.displacement)

    def test_reconstruction_identity_exact(self, cubic09, origin3):
        traj = sample_trajectory(cubic09, origin3, 600, seed=11)
        times, excursions, tail = decompose_excursions(traj)
        for n in range(601):
            rebuilt = reconstruct_embedded(traj, times, excursions, tail, n)
            assert np.array_equal(rebuilt, traj.embedded[n])

    def test_translation_invariance_exact(self, cubic09):
        a = sample_trajectory(cubic09, GraphPoint((0, 0, 0), 0), 300, seed=21)
        b = sample_trajectory(cubic09, GraphPoint((5, -7, 2), 0), 300, seed=21)
        _, exc_a, _ = decompose_excursions(a)
        _, exc_b, _ = decompose_excursions(b)
        assert len(exc_a) == len(exc_b)
        for ea, eb in zip(exc_a, exc_b):
            assert np.array_equal(ea.rel_path, eb.rel_path)
            assert np.array_equal(ea.area, eb.area)


class TestExcursionStream:
    def test_rotating_lengths_always_four(self, rotating09, origin2):
        stream = excursion_stream(rotating09, origin2, seed=8)
        for exc in itertools.islice(stream, 100):
            assert exc.length == 4

    def test_stream_matches_decomposition(self, cubic09, origin3):
        stream = excursion_stream(cubic09, origin3, seed=9)
        from_stream = list(itertools.islice(stream, 20))
        traj = sample_trajectory(cubic09, origin3, 2000, seed=9)
        _, from_traj, _ = decompose_excursions(traj)
        assert len(from_traj) >= 20
        for a, b in zip(from_stream, from_traj[:20]):
            assert a.length == b.length
            assert np.array_equal(a.rel_path, b.rel_path)
            assert np.array_equal(a.area, b.area)
            assert np.array_equal(a.displacement, b.displacement)

    def test_mean_length_agrees_with_return_count(self, cubic09, origin3):
        # two estimators of the mean return time: the average excursion length
        # over 1e5 streamed excursions, and step count divided by returns on
        # one long path
        n_exc = 100_000
        lengths = np.array([exc.length for exc in
                            itertools.islice(excursion_stream(cubic09, origin3, seed=10), n_exc)])
        beta_stream = lengths.mean()
        se = lengths.std(ddof=1) / np.sqrt(n_exc)

        traj = sample_trajectory(cubic09, origin3, 1_000_000, seed=77)
        times, excursions, _ = decompose_excursions(traj)
        beta_traj = times[-1] / len(excursions)
        assert abs(beta_stream - beta_traj) < 3 * se * np.sqrt(2)


class TestStatisticalProperties:
    def test_displacements_uncorrelated_between_consecutive_excursions(self, rotating09, origin2):
        n = 100_000
        _, samples = estimate_constants(rotating09, origin2, n, seed=14, return_samples=True)
        disp = samples["displacement"]
        for coord in range(2):
            x, y = disp[:-1, coord], disp[1:, coord]
            corr = np.corrcoef(x, y)[0, 1]
            assert abs(corr) < 3 / np.sqrt(n)

    def test_excursion_rate_matches_inverse_mean_length(self, cubic09, origin3):
        n = 1_000_000
        traj = sample_trajectory(cubic09, origin3, n, seed=15)
        times, excursions, _ = decompose_excursions(traj)
        kappa = len(excursions)
        beta_hat = np.mean([exc.length for exc in excursions])
        assert abs(kappa / n - 1.0 / beta_hat) < 0.01


class TestCsvDumps:
    def test_trajectory_csv(self, tmp_path, rotating09, origin2):
        traj = sample_trajectory(rotating09, origin2, 8, seed=5)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(traj, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["step", "lattice_0", "lattice_1", "cell", "x_0", "x_1"]
        assert len(rows) == 10
        assert [int(rows[1][0]), int(rows[1][3])] == [0, 0]

    def test_excursion_csv(self, tmp_path, rotating09, origin2):
        traj = sample_trajectory(rotating09, origin2, 12, seed=5)
        _, excursions, _ = decompose_excursions(traj)
        path = tmp_path / "exc.csv"
        write_excursions_csv(excursions, path, dim=2)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["k", "T_k", "L_k", "disp_0", "disp_1", "area_0_1"]
        assert len(rows) == 4
        assert [int(x) for x in rows[1][:3]] == [0, 0, 4]
