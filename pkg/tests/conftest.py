import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gbtest import CategoryGraph, DistanceMatrix, from_records  # noqa: E402


@pytest.fixture
def chain():
    """Three categories in a line, two subjects each."""
    table = from_records([("c1", 2, 0), ("c2", 1, 1), ("c3", 0, 2)])
    d = DistanceMatrix(np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]]), table.category_ids)
    return table, d


@pytest.fixture
def chain_c0():
    return CategoryGraph(3, ((0, 1), (1, 2)))


def hypercube(length):
    from gbtest import pairwise_distance

    ids = [format(i, f"0{length}b") for i in range(2**length)]
    return pairwise_distance("hamming", ids, ids)
