import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cd, make_economy
from radner.economy import (EconomyError, UtilitySpec, audit_assumptions, expected_utility,
                            is_feasible, perturbed_economy, symmetric_information_economy)
from radner.information import Partition


def two_state():
    u = [cd(0.5, 0.5)] * 2
    return make_economy([[[1, 2], [1, 2]], [[2, 1], [3, 1]]], [u, u],
                        [Partition.trivial(2), Partition.discrete(2)])


def test_expected_utility_examples():
    e = make_economy([[[1.0]]], [[cd(0.5)]])
    assert expected_utility(e, 0, np.array([[4.0]])) == 2.0
    e = make_economy([[[1.0, 1.0]]], [[UtilitySpec("log_linear", (1.0, 2.0), shift=1.0)]])
    assert expected_utility(e, 0, np.zeros((1, 2))) == 0.0
    e = make_economy([[[1.0], [1.0]]], [[cd(0.5), cd(0.5)]])
    assert expected_utility(e, 0, np.array([[4.0], [9.0]])) == 2.5


def test_feasibility_examples():
    e = two_state()
    a = e.endowments
    assert is_feasible(e, a)
    x = np.zeros_like(a)
    x[0] = np.broadcast_to(e.aggregate_endowment.min(axis=0), a[0].shape)
    assert is_feasible(e, x)
    y = a.copy()
    y[1, 0, 0] += 1e-6
    assert not is_feasible(e, y, tol=1e-9)


def test_audit_examples():
    r = audit_assumptions(two_state())
    assert r.a4 and r.a5_strong and r.a6 and r.a7_sufficient
    u = [cd(0.5, 0.5)] * 2
    # agent 1 has nothing in state 2, agent 2 nothing of good 2 anywhere
    e = make_economy([[[1, 1], [0, 0]], [[1, 0], [1, 0]]], [u, u])
    r = audit_assumptions(e)
    assert not r.a5 and r.a7 == "undecided"
    assert not r.a6 and not r.a4 and r.a4_prime
    e = make_economy([[[1, 1], [1, 0]], [[1, 1], [1, 0]]], [u, u])
    assert not audit_assumptions(e).a6


def test_perturbation_examples():
    e = two_state()
    rng = np.random.default_rng(1)
    x = e.endowments * rng.uniform(0.5, 1.0, size=(2, 1, 1))
    assert np.array_equal(perturbed_economy(e, [1, 1], x).endowments, e.endowments)
    assert np.array_equal(perturbed_economy(e, [0, 0], x).endowments, x)
    assert np.array_equal(perturbed_economy(e, [0.5, 0.5], e.endowments).endowments, e.endowments)
    with pytest.raises(EconomyError):
        perturbed_economy(e, [1.5, 0], x)


def test_symmetric_information_examples():
    e = two_state()
    s = symmetric_information_economy(e)
    assert all(p == Partition.discrete(2) for p in s.partitions)
    assert symmetric_information_economy(s).partitions == s.partitions
    t = e.with_partitions([Partition.discrete(2)] * 2)
    assert symmetric_information_economy(t).partitions == t.partitions


@pytest.mark.parametrize("kw", [
    dict(form="cobb_douglas", weights=(0.7, 0.5)),
    dict(form="ces", weights=(1.0,), rho=1.0),
    dict(form="ces", weights=(1.0,)),
    dict(form="linear", weights=(0.0, 1.0)),
    dict(form="log_linear", weights=(1.0,), shift=0.0),
    dict(form="cubic", weights=(1.0,)),
])
def test_utility_validation(kw):
    with pytest.raises(EconomyError):
        UtilitySpec(**kw)


def test_endowment_must_be_measurable():
    with pytest.raises(EconomyError):
        make_economy([[[1.0], [2.0]]], [[cd(0.5)] * 2], [Partition.trivial(2)])


specs = st.sampled_from([
    UtilitySpec("cobb_douglas", (0.3, 0.6)), UtilitySpec("ces", (1.0, 2.0), rho=0.5),
    UtilitySpec("ces", (1.0, 0.5), rho=-1.0), UtilitySpec("linear", (1.0, 3.0)),
    UtilitySpec("log_linear", (2.0, 1.0)),
])
bundle = st.tuples(st.floats(0.01, 10), st.floats(0.01, 10))


@given(specs, bundle, bundle, st.floats(0, 1))
def test_utilities_concave_and_monotone(u, x, y, t):
    x, y = np.array(x), np.array(y)
    mid = t * x + (1 - t) * y
    assert u(mid) >= t * u(x) + (1 - t) * u(y) - 1e-9
    assert u(x + 0.5) > u(x)


@given(specs, bundle)
def test_gradient_matches_finite_difference(u, x):
    x = np.array(x)
    h = 1e-6
    fd = np.array([(u(x + h * np.eye(2)[k]) - u(x - h * np.eye(2)[k])) / (2 * h) for k in range(2)])
    assert np.allclose(u.gradient(x), fd, rtol=1e-4, atol=1e-6)
