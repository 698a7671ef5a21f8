"""Distance matrices on categories.

Built-in metrics cover rankings (Kendall, Spearman), binary strings
(Hamming) and ranked bins (rank difference).  All of them are integer
valued, which matters downstream: MST multiplicity is driven by exact ties.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

ASYMMETRY_TOL = 1e-9

METRICS = ("kendall", "spearman_sq", "spearman_footrule", "hamming", "rank_diff")


class DistanceError(ValueError):
    """Invalid distance input."""


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric K x K matrix with zero diagonal and positive off-diagonal."""

    values: np.ndarray
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        d = np.array(self.values, dtype=float if not _is_integral(self.values) else np.int64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DistanceError("non-square matrix")
        if not np.isfinite(d).all():
            raise DistanceError("non-finite entry")
        if (d < 0).any():
            raise DistanceError("negative entry")
        if np.any(np.abs(np.diag(d)) > 0):
            raise DistanceError("nonzero diagonal")
        if np.abs(d - d.T).max(initial=0) > ASYMMETRY_TOL:
            raise DistanceError("asymmetric")
        off = ~np.eye(d.shape[0], dtype=bool)
        if (d[off] <= 0).any():
            raise DistanceError("zero distance between distinct categories")
        if d.dtype.kind == "f":
            d = (d + d.T) / 2
        d.setflags(write=False)
        object.__setattr__(self, "values", d)
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != d.shape[0]:
                raise DistanceError("ids do not match matrix size")
            object.__setattr__(self, "ids", ids)

    @property
    def K(self) -> int:
        return self.values.shape[0]

    @property
    def is_integer(self) -> bool:
        return self.values.dtype.kind in "iu"

    def __getitem__(self, ij):
        return self.values[ij]

    def subset(self, idx: Sequence[int]) -> "DistanceMatrix":
        idx = list(idx)
        ids = None if self.ids is None else tuple(self.ids[i] for i in idx)
        return DistanceMatrix(self.values[np.ix_(idx, idx)], ids)


def _is_integral(values) -> bool:
    arr = np.asarray(values)
    if arr.dtype.kind in "iub":
        return True
    if arr.dtype.kind == "f" and arr.size and np.isfinite(arr).all():
        return bool(np.all(arr == np.round(arr)))
    return False


def check_ranking(r: Sequence[int]) -> tuple[int, ...]:
    r = tuple(int(x) for x in r)
    if sorted(r) != list(range(1, len(r) + 1)):
        raise DistanceError(f"invalid permutation {r}")
    return r


def parse_ranking(s) -> tuple[int, ...]:
    """Accept ``"3241"``, ``"3,2,4,1"`` or a sequence of ints."""
    if isinstance(s, str):
        parts = s.split(",") if "," in s else list(s)
        return check_ranking(int(p) for p in parts)
    return check_ranking(s)


def kendall(r1, r2) -> int:
    """Number of discordant object pairs."""
    if len(r1) != len(r2):
        raise DistanceError("length mismatch")
    return sum(
        1 for i, j in combinations(range(len(r1)), 2)
        if (r1[i] - r1[j]) * (r2[i] - r2[j]) < 0
    )


def spearman_sq(r1, r2) -> int:
    if len(r1) != len(r2):
        raise DistanceError("length mismatch")
    return int(sum((x - y) ** 2 for x, y in zip(r1, r2)))


def spearman_footrule(r1, r2) -> int:
    if len(r1) != len(r2):
        raise DistanceError("length mismatch")
    return int(sum(abs(x - y) for x, y in zip(r1, r2)))


def hamming(s1: str, s2: str) -> int:
    if len(s1) != len(s2):
        raise DistanceError("length mismatch")
    return sum(c1 != c2 for c1, c2 in zip(s1, s2))


def rank_diff(r1: int, r2: int) -> int:
    return abs(int(r1) - int(r2))


_PAIRWISE = {
    "kendall": kendall,
    "spearman_sq": spearman_sq,
    "spearman_footrule": spearman_footrule,
    "hamming": hamming,
    "rank_diff": rank_diff,
}


def pairwise_distance(metric: str, items: Sequence, ids: Sequence[str] | None = None) -> DistanceMatrix:
    """Distance matrix of ``items`` under a built-in metric.

    Rankings may be given as strings (``"1234"``) or integer sequences;
    Hamming items are equal-length strings; ``rank_diff`` items are integer
    ranks.
    """
    try:
        fn = _PAIRWISE[metric]
    except KeyError:
        raise DistanceError(f"unknown metric {metric!r}") from None
    if metric in ("kendall", "spearman_sq", "spearman_footrule"):
        items = [parse_ranking(x) for x in items]
        if len({len(x) for x in items}) > 1:
            raise DistanceError("length mismatch")
    elif metric == "hamming":
        items = [str(x) for x in items]
        if len({len(x) for x in items}) > 1:
            raise DistanceError("length mismatch")
    K = len(items)
    d = np.zeros((K, K), dtype=np.int64)
    for i, j in combinations(range(K), 2):
        d[i, j] = d[j, i] = fn(items[i], items[j])
    return DistanceMatrix(d, None if ids is None else tuple(ids))


def load_matrix(raw, ids: Sequence[str]) -> DistanceMatrix:
    """Validate a user-supplied square table of distances labelled by ``ids``."""
    arr = np.asarray(raw, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DistanceError("non-square matrix")
    if arr.shape[0] != len(ids):
        raise DistanceError("ids do not match matrix size")
    return DistanceMatrix(arr, tuple(ids))
