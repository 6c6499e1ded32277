import numpy as np

from rephoto.noise import noise3


class TestNoise3:
    def test_zero_at_lattice_points(self):
        rng = np.random.default_rng(0)
        lattice = rng.integers(-50, 50, size=(200, 3)).astype(np.float64)
        for seed in (0, 1, 42):
            assert np.max(np.abs(noise3(seed, lattice))) == 0.0

    def test_bounded(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-100, 100, size=(200_000, 3))
        vals = noise3(7, pts)
        assert np.max(np.abs(vals)) <= 1.0
        # the field actually uses a good part of its range
        assert vals.max() > 0.5 and vals.min() < -0.5

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-10, 10, size=(500, 3))
        assert np.array_equal(noise3(3, pts), noise3(3, pts))

    def test_seed_sensitivity(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-10, 10, size=(500, 3))
        a = noise3(0, pts)
        b = noise3(1, pts)
        assert np.max(np.abs(a - b)) > 0.1

    def test_continuity(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(-10, 10, size=(1000, 3))
        step = np.array([1e-5, 0.0, 0.0])
        delta = np.abs(noise3(5, pts + step) - noise3(5, pts))
        assert delta.max() < 1e-3

    def test_scalar_matches_batch(self):
        pts = np.array([[0.3, 1.7, -2.2], [5.5, 0.1, 9.9]])
        batch = noise3(9, pts)
        assert noise3(9, pts[0]) == batch[0]
        assert isinstance(noise3(9, pts[1]), float)
