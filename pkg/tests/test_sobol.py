import numpy as np
import pytest

from cropforge.sobol import SobolSequence, sobol_next

REFERENCE_1D = [0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125, 0.1875]


class TestSequence:
    def test_first_points_1d(self):
        seq = SobolSequence(1)
        got = [float(sobol_next(seq)[0]) for _ in range(8)]
        assert got == REFERENCE_1D

    def test_all_coordinates_in_unit_interval(self):
        for dim in (1, 2, 7, 33, 64):
            seq = SobolSequence(dim)
            pts = seq.take(100)
            assert pts.shape == (100, dim)
            assert pts.min() >= 0.0 and pts.max() < 1.0

    def test_dimension_limit(self):
        with pytest.raises(ValueError, match="direction-number"):
            SobolSequence(65)
        with pytest.raises(ValueError):
            SobolSequence(0)

    def test_deterministic(self):
        a = SobolSequence(5).take(64)
        b = SobolSequence(5).take(64)
        assert np.array_equal(a, b)

    def test_matches_scipy_reference(self):
        qmc = pytest.importorskip("scipy.stats.qmc")
        for dim in (1, 2, 8, 33, 64):
            ref = qmc.Sobol(d=dim, scramble=False).random_base2(9)[1:]
            mine = SobolSequence(dim).take(len(ref))
            assert np.array_equal(mine, ref)

    def test_dyadic_stratification(self):
        # With the skipped origin restored, the first 2^m points fill every
        # dyadic interval of size 2^-m exactly once; and every later aligned
        # block of 2^m points does so on its own.
        for m in range(1, 9):
            size = 2**m
            seq = SobolSequence(1)
            emitted = [float(seq.next_point()[0]) for _ in range(2 * size - 1)]
            first_block = [0.0] + emitted[:size - 1]
            second_block = emitted[size - 1:]
            for block in (first_block, second_block):
                cells = [int(x * size) for x in block]
                assert sorted(cells) == list(range(size)), f"m={m}"


def star_discrepancy_2d(points: np.ndarray) -> float:
    """Exact star discrepancy via the corner grid (counting oracle)."""
    n = len(points)
    us = np.unique(np.concatenate([points[:, 0], [1.0]]))
    vs = np.unique(np.concatenate([points[:, 1], [1.0]]))
    worst = 0.0
    for u in us:
        for x_side, y_side in (("<", "left"), ("<=", "right")):
            if x_side == "<":
                ys = np.sort(points[points[:, 0] < u, 1])
            else:
                ys = np.sort(points[points[:, 0] <= u, 1])
            counts = np.searchsorted(ys, vs, side=y_side)
            worst = max(worst, float(np.max(np.abs(counts / n - u * vs))))
    return worst


class TestDiscrepancy:
    def test_sobol_beats_worst_random(self):
        sobol_pts = SobolSequence(2).take(256)
        d_sobol = star_discrepancy_2d(sobol_pts)
        d_random = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            d_random.append(star_discrepancy_2d(rng.uniform(size=(256, 2))))
        assert d_sobol < max(d_random)
