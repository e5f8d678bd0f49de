import numpy as np
import pytest

from qudim.baselines import mle_dimension, twonn
from qudim.datasets import gen_sphere
from qudim.errors import InvalidInput


def uniform_disk(rng, t):
    r = np.sqrt(rng.uniform(0, 1, t))
    theta = rng.uniform(0, 2 * np.pi, t)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


class TestTwoNN:
    def test_uniform_disk(self):
        rng = np.random.default_rng(0)
        result = twonn(uniform_disk(rng, 5000))
        assert 1.8 <= result.estimate <= 2.2

    def test_uniform_segment(self):
        rng = np.random.default_rng(1)
        result = twonn(rng.uniform(0, 1, (5000, 1)))
        assert 0.9 <= result.estimate <= 1.1

    def test_duplicates_dropped_and_counted(self):
        rng = np.random.default_rng(2)
        pts = rng.standard_normal((50, 2))
        doubled = np.vstack([pts, pts[:3]])
        with pytest.warns(UserWarning):
            result = twonn(doubled)
        assert result.params["duplicates_dropped"] == 3

    def test_all_points_identical_rejected(self):
        pts = np.tile([[1.0, 2.0]], (10, 1))
        with pytest.warns(UserWarning):
            with pytest.raises(InvalidInput):
                twonn(pts)

    def test_bad_discard_fraction(self):
        with pytest.raises(InvalidInput):
            twonn(np.eye(5), discard_fraction=1.0)


class TestMle:
    def test_uniform_cube(self):
        rng = np.random.default_rng(3)
        result = mle_dimension(rng.uniform(0, 1, (5000, 3)), k=10)
        # the stated estimator carries the (k-1)/(k-2) upward bias of the
        # inverse-mean form, so the band sits slightly above the true value
        assert 2.7 <= result.estimate <= 3.4

    def test_uniform_disk(self):
        rng = np.random.default_rng(4)
        result = mle_dimension(uniform_disk(rng, 5000), k=10)
        assert 1.8 <= result.estimate <= 2.35

    def test_k_too_small(self):
        with pytest.raises(InvalidInput):
            mle_dimension(np.eye(5), k=1)

    def test_too_few_points(self):
        rng = np.random.default_rng(5)
        with pytest.raises(InvalidInput):
            mle_dimension(rng.standard_normal((8, 2)), k=10)


class TestSharedProperties:
    def test_rigid_motion_invariance(self):
        rng = np.random.default_rng(6)
        pts = rng.standard_normal((400, 3))
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        moved = pts @ q.T + np.array([5.0, -2.0, 0.5])
        for estimator, kwargs in ((twonn, {}), (mle_dimension, {"k": 8})):
            base = estimator(pts, **kwargs).estimate
            transformed = estimator(moved, **kwargs).estimate
            assert abs(base - transformed) < 1e-9

    def test_shadow_dimension_trend_on_noisy_sphere(self):
        """Both estimators drift upward toward the ambient dimension as
        transversal noise grows."""
        levels = [0.0, 0.05, 0.1, 0.15, 0.2]
        tw, ml = [], []
        for noise in levels:
            ds = gen_sphere(500, noise=noise, seed=11)
            tw.append(twonn(ds).estimate)
            ml.append(mle_dimension(ds).estimate)
        slope_tw = np.polyfit(levels, tw, 1)[0]
        slope_ml = np.polyfit(levels, ml, 1)[0]
        assert slope_tw > 0
        assert slope_ml > 0
        assert tw[-1] - tw[0] >= 0.5
        assert ml[-1] - ml[0] >= 0.5
