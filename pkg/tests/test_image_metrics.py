import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from models.binary_image import BinaryImage
from models.errors import DataError, DimensionMismatchError
from services.image_metrics import get_metric, hamming_distance, hausdorff_distance, image_hausdorff, image_points

masks = hnp.arrays(dtype=bool, shape=(6, 7))
point_sets = hnp.arrays(
    dtype=np.float64,
    shape=st.tuples(st.integers(min_value=1, max_value=12), st.just(2)),
    elements=st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False),
)


def _brute_hausdorff(a, b):
    pairwise = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    return max(pairwise.min(axis=1).max(), pairwise.min(axis=0).max())


class TestHamming:
    def test_identical(self, random_image):
        image = random_image()
        assert hamming_distance(image, image) == 0.0

    def test_complement(self, random_image):
        image = random_image()
        assert hamming_distance(image, image.complement()) == 1.0

    def test_one_pixel_of_400(self):
        a = BinaryImage.blank(20, 20)
        pixels = np.zeros((20, 20), dtype=bool)
        pixels[7, 11] = True
        assert hamming_distance(a, BinaryImage(pixels)) == pytest.approx(0.0025)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            hamming_distance(BinaryImage.blank(4, 4), BinaryImage.blank(4, 5))

    @settings(max_examples=100, deadline=None)
    @given(masks, masks, masks)
    def test_metric_axioms(self, a, b, c):
        a, b, c = BinaryImage(a), BinaryImage(b), BinaryImage(c)
        ab = hamming_distance(a, b)
        assert 0.0 <= ab <= 1.0
        assert ab == hamming_distance(b, a)
        assert (ab == 0.0) == (a == b)
        assert hamming_distance(a, c) <= ab + hamming_distance(b, c) + 1e-12


class TestHausdorff:
    def test_equal_sets(self):
        points = np.array([[0.0, 1.0], [2.0, 3.0]])
        assert hausdorff_distance(points, points) == 0.0

    def test_single_pair(self):
        assert hausdorff_distance([[0.0, 0.0]], [[3.0, 4.0]]) == 5.0

    def test_empty_set(self):
        with pytest.raises(DataError):
            hausdorff_distance(np.empty((0, 2)), [[1.0, 1.0]])

    def test_random_images_match_brute_force(self, rng):
        for _ in range(25):
            a = BinaryImage(rng.random((8, 8)) < 0.3)
            b = BinaryImage(rng.random((8, 8)) < 0.3)
            if a.set_count == 0 or b.set_count == 0:
                continue
            expected = _brute_hausdorff(image_points(a), image_points(b))
            assert image_hausdorff(a, b, normalize=False) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(point_sets, point_sets, point_sets)
    def test_metric_axioms(self, a, b, c):
        ab = hausdorff_distance(a, b)
        assert ab == pytest.approx(hausdorff_distance(b, a), abs=1e-9)
        assert ab == pytest.approx(_brute_hausdorff(a, b), abs=1e-9)
        assert hausdorff_distance(a, a) == 0.0
        assert hausdorff_distance(a, c) <= ab + hausdorff_distance(b, c) + 1e-9

    def test_image_hausdorff_normalized(self):
        a = BinaryImage.blank(5, 5)
        pixels = np.zeros((5, 5), dtype=bool)
        pixels[0, 0] = True
        b = BinaryImage(pixels)
        pixels = pixels.copy()
        pixels[4, 4] = True
        c = BinaryImage(pixels)
        assert image_hausdorff(a, a) == 0.0
        assert image_hausdorff(a, b) == 1.0
        assert image_hausdorff(b, c) == pytest.approx(1.0)
        assert image_hausdorff(b, c, normalize=False) == pytest.approx(np.hypot(4, 4))

    def test_unknown_metric(self):
        assert get_metric("hausdorff") is image_hausdorff
        with pytest.raises(DataError):
            get_metric("jaccard")
