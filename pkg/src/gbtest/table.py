"""Two-group contingency tables over a set of categories.

A table holds per-category counts for group ``a`` and group ``b``.  Categories
with no subjects in either group are dropped on construction, so every
retained category has a positive margin.  Categories are referred to by dense
index ``0..K-1`` everywhere else in the package; ``category_ids`` maps those
indices back to the user's labels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

GROUPS = ("a", "b")


class TableError(ValueError):
    """Invalid contingency-table input."""


@dataclass(frozen=True)
class SubjectList:
    """Individual subjects: a category index and a group mark per subject."""

    categories: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.categories) != len(self.labels):
            raise TableError("categories and labels differ in length")
        bad = set(self.labels) - set(GROUPS)
        if bad:
            raise TableError(f"unknown group label(s): {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.categories)


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """2 x K table of counts with derived margins.

    Construct through :func:`from_records` or :func:`from_subjects` unless the
    inputs are already validated.
    """

    category_ids: tuple[str, ...]
    counts_a: np.ndarray
    counts_b: np.ndarray
    margins: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.counts_a, dtype=np.int64)
        b = np.asarray(self.counts_b, dtype=np.int64)
        if a.shape != b.shape or a.ndim != 1 or len(self.category_ids) != a.size:
            raise TableError("counts and ids must be 1-D of equal length")
        if (a < 0).any() or (b < 0).any():
            raise TableError("negative count")
        if len(set(self.category_ids)) != len(self.category_ids):
            raise TableError("duplicate category id")
        m = a + b
        if a.size == 0 or (m == 0).any():
            raise TableError("all margins zero" if m.sum() == 0 else "zero margin")
        for arr in (a, b, m):
            arr.setflags(write=False)
        object.__setattr__(self, "category_ids", tuple(self.category_ids))
        object.__setattr__(self, "counts_a", a)
        object.__setattr__(self, "counts_b", b)
        object.__setattr__(self, "margins", m)

    @property
    def K(self) -> int:
        return int(self.margins.size)

    @property
    def n_a(self) -> int:
        return int(self.counts_a.sum())

    @property
    def n_b(self) -> int:
        return int(self.counts_b.sum())

    @property
    def N(self) -> int:
        return int(self.margins.sum())

    def index(self, category_id: str) -> int:
        return self.category_ids.index(category_id)

    def with_counts_a(self, counts_a) -> "ContingencyTable":
        """Relabelled copy keeping the category margins fixed."""
        counts_a = np.asarray(counts_a, dtype=np.int64)
        return ContingencyTable(self.category_ids, counts_a, self.margins - counts_a)

    def swapped(self) -> "ContingencyTable":
        return ContingencyTable(self.category_ids, self.counts_b, self.counts_a)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return (
            self.category_ids == other.category_ids
            and np.array_equal(self.counts_a, other.counts_a)
            and np.array_equal(self.counts_b, other.counts_b)
        )

    def __hash__(self):
        return hash((self.category_ids, self.counts_a.tobytes(), self.counts_b.tobytes()))

    def __repr__(self) -> str:
        return (
            f"ContingencyTable(K={self.K}, N={self.N}, n_a={self.n_a}, "
            f"n_b={self.n_b})"
        )


def _drop_empty(ids, a, b) -> ContingencyTable:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if (a < 0).any() or (b < 0).any():
        raise TableError("negative count")
    if len(set(ids)) != len(ids):
        raise TableError("duplicate category id")
    keep = (a + b) > 0
    if not keep.any():
        raise TableError("all margins zero")
    if not keep.all():
        dropped = [ids[i] for i in np.flatnonzero(~keep)]
        logger.info("dropping %d zero-margin categories: %s", len(dropped), dropped[:10])
    ids = tuple(i for i, k in zip(ids, keep) if k)
    return ContingencyTable(ids, a[keep], b[keep])


def from_records(rows: Iterable[Sequence]) -> ContingencyTable:
    """Build a table from ``(category_id, count_a, count_b)`` rows.

    Row order is kept.  Zero-margin rows are dropped.

    >>> t = from_records([("c1", 2, 0), ("c2", 1, 1), ("c3", 0, 2)])
    >>> t.K, t.N, t.n_a, t.margins.tolist()
    (3, 6, 3, [2, 2, 2])
    """
    ids, a, b = [], [], []
    for row in rows:
        cid, ca, cb = row
        for c in (ca, cb):
            if int(c) != c:
                raise TableError(f"non-integer count {c!r}")
        ids.append(str(cid))
        a.append(int(ca))
        b.append(int(cb))
    if not ids:
        raise TableError("all margins zero")
    return _drop_empty(ids, a, b)


def from_subjects(subjects: SubjectList, ids: Sequence[str]) -> ContingencyTable:
    """Tally subjects into a table over ``ids``."""
    K = len(ids)
    cats = np.asarray(subjects.categories, dtype=np.int64)
    if cats.size and (cats.min() < 0 or cats.max() >= K):
        raise TableError("category index out of range")
    is_a = np.array([g == "a" for g in subjects.labels], dtype=bool)
    a = np.bincount(cats[is_a], minlength=K) if K else np.zeros(0, np.int64)
    b = np.bincount(cats[~is_a], minlength=K) if K else np.zeros(0, np.int64)
    return _drop_empty([str(i) for i in ids], a, b)


def to_subjects(table: ContingencyTable) -> SubjectList:
    """Expand a table into subjects, category-major with group a first."""
    cats: list[int] = []
    labels: list[str] = []
    for k in range(table.K):
        na, nb = int(table.counts_a[k]), int(table.counts_b[k])
        cats.extend([k] * (na + nb))
        labels.extend(["a"] * na + ["b"] * nb)
    return SubjectList(tuple(cats), tuple(labels))


def subject_categories(table: ContingencyTable) -> np.ndarray:
    """Category index of each subject in :func:`to_subjects` order."""
    return np.repeat(np.arange(table.K), table.margins)
