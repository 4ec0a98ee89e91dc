import numpy as np
import pytest

from dip_holdout import make_pixel_split


class TestPixelSplit:
    def test_partition(self):
        split = make_pixel_split((40, 30), 0.1, seed=0)
        assert np.all(split.train_mask ^ split.holdout_mask)
        assert split.holdout_mask.sum() + split.train_mask.sum() == 1200

    def test_fraction_within_one_percent(self):
        split = make_pixel_split((128, 128), 0.1, seed=1)
        assert abs(split.holdout_fraction - 0.1) <= 0.01

    def test_deterministic(self):
        a = make_pixel_split((16, 16), 0.25, seed=5)
        b = make_pixel_split((16, 16), 0.25, seed=5)
        assert np.array_equal(a.holdout_mask, b.holdout_mask)

    def test_zero_fraction(self):
        split = make_pixel_split((8, 8), 0.0, seed=0)
        assert split.holdout_mask.sum() == 0

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            make_pixel_split((8, 8), 1.0, seed=0)
        with pytest.raises(ValueError):
            make_pixel_split((8, 8), -0.1, seed=0)

    def test_mask_read_only(self):
        split = make_pixel_split((8, 8), 0.1, seed=0)
        with pytest.raises(ValueError):
            split.holdout_mask[0, 0] = True
