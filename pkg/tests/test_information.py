import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radner.information import (InformationError, Partition, Prior, StateSpace, is_measurable,
                                join, project_measurable)

S = StateSpace(("w1", "w2", "w3"))


def test_measurability_examples():
    for p in (Partition.trivial(2), Partition.discrete(2)):
        assert is_measurable(np.ones((2, 1)), p)
    x = np.array([[1.0], [2.0]])
    assert not is_measurable(x, Partition.trivial(2), tol=1e-9)
    assert is_measurable(x, Partition.discrete(2))


def test_join_examples():
    t = Partition.trivial(2)
    assert join([t, t]) == t
    p = Partition.from_labels(S, [["w1", "w2"], ["w3"]])
    q = Partition.from_labels(S, [["w1"], ["w2", "w3"]])
    assert join([p, q]) == Partition.discrete(3)
    assert join([p]) == p


def test_join_rejects_empty_and_mismatch():
    with pytest.raises(InformationError):
        join([])
    with pytest.raises(InformationError):
        join([Partition.trivial(2), Partition.trivial(3)])


def test_projection_examples():
    q = Prior.uniform(2)
    x = np.array([[3.0], [3.0]])
    assert np.array_equal(project_measurable(x, Partition.trivial(2), q), x)
    y = project_measurable(np.array([[0.0], [2.0]]), Partition.trivial(2), q)
    assert y.tolist() == [[1.0], [1.0]]


def test_partition_validation():
    with pytest.raises(InformationError):
        Partition(((0,), (0, 1)))
    with pytest.raises(InformationError):
        StateSpace(("a", "a"))
    with pytest.raises(InformationError):
        Prior((0.5, 0.6))
    with pytest.raises(InformationError):
        S.index("w9")


partitions3 = st.sampled_from([
    Partition.trivial(3), Partition.discrete(3), Partition(((0, 1), (2,))),
    Partition(((0,), (1, 2))), Partition(((0, 2), (1,))),
])


@given(partitions3, partitions3)
def test_join_refines_and_commutes(p, q):
    j = join([p, q])
    assert j.refines(p) and j.refines(q)
    assert j == join([q, p])


@given(partitions3, st.lists(st.floats(0, 10), min_size=3, max_size=3),
       st.lists(st.floats(0.1, 1), min_size=3, max_size=3))
def test_projection_idempotent_and_measurable(p, vals, w):
    q = Prior(tuple(np.array(w) / sum(w)))
    x = np.array(vals)[:, None]
    y = project_measurable(x, p, q)
    assert is_measurable(y, p, tol=1e-12)
    assert np.allclose(project_measurable(y, p, q), y, atol=1e-12)
    # expectation preserved
    assert float(q.array @ y[:, 0]) == pytest.approx(float(q.array @ x[:, 0]), abs=1e-9)
