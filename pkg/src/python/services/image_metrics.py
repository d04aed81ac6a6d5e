import numpy as np
from scipy.spatial.distance import directed_hausdorff

from models.binary_image import BinaryImage
from models.errors import DataError, DimensionMismatchError


def _require_same_shape(a: BinaryImage, b: BinaryImage) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Image shapes differ: {a.width}x{a.height} vs {b.width}x{b.height}")


def hamming_distance(a: BinaryImage, b: BinaryImage) -> float:
    """Fraction of pixels that differ, (1/NM) Σ |x_A(i) - x_B(i)|."""
    _require_same_shape(a, b)
    return float(np.count_nonzero(a.pixels != b.pixels)) / a.pixels.size


def hausdorff_distance(a, b) -> float:
    """max(sup_a inf_b |a-b|, sup_b inf_a |a-b|) for finite point sets given as (n, 2) arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DataError("Hausdorff distance needs two non-empty point sets")
    return float(max(directed_hausdorff(a, b, seed=0)[0], directed_hausdorff(b, a, seed=0)[0]))


def image_points(image: BinaryImage) -> np.ndarray:
    """(row, col) lattice coordinates of the set pixels."""
    return np.argwhere(image.pixels).astype(np.float64)


def image_hausdorff(a: BinaryImage, b: BinaryImage, normalize: bool = True) -> float:
    """
    Hausdorff distance between the set pixels of two equal-size images.

    An empty image is at the lattice diagonal from any non-empty one; with `normalize`
    the result is divided by that diagonal so it lies in [0, 1] like the Hamming distance.
    """
    _require_same_shape(a, b)
    diagonal = max(float(np.hypot(a.height - 1, a.width - 1)), 1.0)
    points_a, points_b = image_points(a), image_points(b)
    if points_a.shape[0] == 0 and points_b.shape[0] == 0:
        distance = 0.0
    elif points_a.shape[0] == 0 or points_b.shape[0] == 0:
        distance = diagonal
    else:
        distance = hausdorff_distance(points_a, points_b)
    return distance / diagonal if normalize else distance


METRICS = {
    "hamming": hamming_distance,
    "hausdorff": image_hausdorff,
}


def get_metric(name: str):
    try:
        return METRICS[name]
    except KeyError:
        raise DataError(f"Unknown image metric '{name}'. Available: {sorted(METRICS)}") from None
