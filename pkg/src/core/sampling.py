"""Latin hypercube initialization of the normalized control space."""

from typing import Union

import numpy as np

from src.core.space import ParameterSpace
from src.utils.errors import InvalidKError


def lhs_sample(space: Union[ParameterSpace, int], k: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw a plain Latin hypercube design.

    Each dimension is cut into K equal strata; a random permutation assigns
    strata to points and the coordinate is uniform inside its stratum.

    Args:
        space: ParameterSpace, or the dimension count N
        k: Number of strata (= number of points)
        rng: Source of randomness

    Returns:
        (K, N) array of control vectors in [0, 1]^N
    """
    if k < 1:
        raise InvalidKError(k)

    n = space if isinstance(space, int) else space.n

    strata = np.empty((k, n), dtype=float)
    for d in range(n):
        strata[:, d] = rng.permutation(k)

    points = (strata + rng.random((k, n))) / k
    # Upper stratum closed at 1.0
    return np.minimum(points, 1.0)


def is_latin(points: np.ndarray) -> bool:
    """True when every column hits each of the K strata exactly once."""
    points = np.asarray(points, dtype=float)
    k = points.shape[0]
    cells = np.minimum(np.floor(points * k).astype(int), k - 1)
    expected = np.arange(k)
    return all(np.array_equal(np.sort(cells[:, d]), expected) for d in range(points.shape[1]))
