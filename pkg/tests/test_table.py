import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbtest.table import (
    ContingencyTable,
    SubjectList,
    TableError,
    from_records,
    from_subjects,
    subject_categories,
    to_subjects,
)


def test_margins_and_totals():
    t = from_records([("c1", 2, 0), ("c2", 1, 1), ("c3", 0, 2)])
    assert (t.K, t.N, t.n_a, t.n_b) == (3, 6, 3, 3)
    assert t.margins.tolist() == [2, 2, 2]


def test_zero_margin_rows_dropped(caplog):
    caplog.set_level(logging.INFO)
    t = from_records([("x", 0, 0), ("y", 1, 0), ("z", 0, 0)])
    assert t.category_ids == ("y",)
    assert "dropping 2" in caplog.text


@pytest.mark.parametrize("rows, msg", [
    ([("x", -1, 2)], "negative"),
    ([("x", 0, 0)], "all margins zero"),
    ([], "all margins zero"),
    ([("x", 1, 0), ("x", 0, 1)], "duplicate"),
    ([("x", 1.5, 0)], "non-integer"),
])
def test_rejects_bad_rows(rows, msg):
    with pytest.raises(TableError, match=msg):
        from_records(rows)


def test_arrays_are_read_only():
    t = from_records([("c1", 1, 2)])
    with pytest.raises(ValueError):
        t.counts_a[0] = 5


def test_with_counts_a_keeps_margins():
    t = from_records([("c1", 2, 0), ("c2", 1, 1)])
    u = t.with_counts_a([0, 2])
    assert u.counts_b.tolist() == [2, 0]
    assert np.array_equal(u.margins, t.margins)


def test_equality_and_hash():
    t1 = from_records([("c1", 2, 0), ("c2", 1, 1)])
    t2 = from_records([("c1", 2, 0), ("c2", 1, 1)])
    assert t1 == t2 and hash(t1) == hash(t2)
    assert t1 != t1.swapped()


def test_subject_list_validates_labels():
    with pytest.raises(TableError):
        SubjectList((0, 1), ("a", "c"))
    with pytest.raises(TableError):
        SubjectList((0,), ("a", "b"))


def test_from_subjects_range_check():
    with pytest.raises(TableError, match="out of range"):
        from_subjects(SubjectList((0, 3), ("a", "b")), ["p", "q"])


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=8)
       .filter(lambda rows: any(a + b for a, b in rows)))
def test_subject_round_trip(rows):
    t = from_records([(f"k{i}", a, b) for i, (a, b) in enumerate(rows)])
    s = to_subjects(t)
    assert len(s) == t.N
    assert from_subjects(s, t.category_ids) == t
    assert subject_categories(t).tolist() == list(s.categories)


def test_direct_construction_rejects_zero_margin():
    with pytest.raises(TableError, match="zero margin"):
        ContingencyTable(("a", "b"), np.array([1, 0]), np.array([0, 0]))
