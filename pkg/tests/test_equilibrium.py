import numpy as np
import pytest

from conftest import cd, make_economy
from oracles import cobb_douglas_demand, edgeworth, edgeworth_solution
from radner.economy import UtilitySpec
from radner.equilibrium import (EquilibriumRejected, budget_value, demand,
                                quasi_to_full_upgrade_check, solve_equilibrium, supporting_prices,
                                verify_equilibrium)
from radner.information import Partition
from radner.io import generate


def test_budget_value_examples():
    x = np.array([[1.0, 1.0], [3.0, 4.0]])
    assert budget_value(np.zeros((2, 2)), x) == 0.0
    assert budget_value([[1, 2], [0, 1]], x) == 7.0


def test_demand_cobb_douglas():
    e = make_economy([[[1.0, 1.0]]], [[cd(0.5, 0.5)]])
    d = demand(e, 0, [[1.0, 1.0]])
    assert np.allclose(d[0], cobb_douglas_demand([0.5, 0.5], [0.5, 0.5], 1.0), atol=1e-7)
    assert np.allclose(d, [[1.0, 1.0]], atol=1e-7)
    assert np.allclose(demand(e, 0, [[3.0, 3.0]]), d, atol=1e-9)


def test_demand_is_measurable_under_trivial_partition():
    u = [cd(0.4, 0.6)] * 2
    e = make_economy([[[1, 1], [1, 1]]], [u], [Partition.trivial(2)])
    d = demand(e, 0, [[0.1, 0.2], [0.5, 0.2]])
    assert np.allclose(d[0], d[1], atol=1e-12)


def test_edgeworth_matches_analytic_solution():
    e = edgeworth()
    cert = solve_equilibrium(e)
    x, p = edgeworth_solution()
    assert np.max(np.abs(cert.allocation - x)) <= 1e-6
    assert np.max(np.abs(cert.prices - p)) <= 1e-6
    assert not cert.quasi_only


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_asymmetric_edgeworth(alpha):
    cert = solve_equilibrium(edgeworth(alpha))
    x, p = edgeworth_solution(alpha)
    assert np.allclose(cert.allocation, x, atol=1e-6)
    assert np.allclose(cert.prices, p, atol=1e-6)


def test_autarky_optimal_economy_keeps_endowments():
    u = [cd(0.5, 0.5)]
    e = make_economy([[[1.0, 1.0]], [[2.0, 2.0]]], [u, u])
    cert = solve_equilibrium(e)
    assert np.allclose(cert.allocation, e.endowments, atol=1e-6)


def test_trivial_partition_gets_constant_plan():
    u = [cd(0.5, 0.5), cd(0.3, 0.7)]
    e = make_economy([[[1, 2], [2, 1]], [[1, 1], [1, 1]]], [u, u],
                     [Partition.discrete(2), Partition.trivial(2)], prior=(0.4, 0.6))
    cert = solve_equilibrium(e)
    assert np.allclose(cert.allocation[1, 0], cert.allocation[1, 1], atol=1e-12)


def test_verify_round_trip_and_homogeneity():
    e = edgeworth()
    cert = solve_equilibrium(e)
    verify_equilibrium(e, cert.allocation, cert.prices, tol=1e-6)
    verify_equilibrium(e, cert.allocation, 2 * cert.prices, tol=1e-6)


def test_verify_rejects_moved_good():
    e = edgeworth()
    x, p = edgeworth_solution()
    y = x.copy()
    y[0, 0, 0] -= 0.05
    y[1, 0, 0] += 0.05
    with pytest.raises(EquilibriumRejected) as info:
        verify_equilibrium(e, y, p)
    clauses = {(v["clause"], v.get("where")) for v in info.value.violations}
    assert ("maximality", 0) in clauses


def test_upgrade_check_paths():
    e = edgeworth()
    cert = solve_equilibrium(e)
    assert quasi_to_full_upgrade_check(e, cert).status == "trivially upgraded"
    z = make_economy([[[1, 1]], [[1, 2]], [[0, 0]]], [[cd(0.5, 0.5)]] * 3)
    zc = solve_equilibrium(z)
    assert zc.quasi_only
    assert quasi_to_full_upgrade_check(z, zc).status == "A7 undecided, upgrade not asserted"
    one = make_economy([[[1, 1]]], [[cd(0.5, 0.5)]])
    oc = solve_equilibrium(one)
    assert np.allclose(oc.allocation, one.endowments)
    assert quasi_to_full_upgrade_check(one, oc).ok


def test_supporting_prices_recover_equilibrium():
    e = edgeworth()
    x, p = edgeworth_solution()
    assert np.allclose(supporting_prices(e, x), p, atol=1e-8)


@pytest.mark.parametrize("seed", range(6))
def test_generated_instances_verify(seed):
    e = generate(seed, n=2 + seed % 2, dim=1 + seed % 3, n_states=1 + seed % 3)
    cert = solve_equilibrium(e)
    verify_equilibrium(e, cert.allocation, cert.prices, tol=1e-6)
    assert np.all(cert.allocation.sum(axis=0) <= e.aggregate_endowment + 1e-9)


def test_ces_and_log_linear_mix():
    u1 = [UtilitySpec("ces", (1.0, 2.0), rho=-0.5)]
    u2 = [UtilitySpec("log_linear", (1.0, 1.0))]
    e = make_economy([[[2.0, 1.0]], [[1.0, 3.0]]], [u1, u2])
    cert = solve_equilibrium(e)
    verify_equilibrium(e, cert.allocation, cert.prices, tol=1e-6)


def test_supporting_prices_at_corner_plans():
    """Each agent consumes in one state only, so the budget identity is what
    links the two states' price levels."""
    e = generate(1010, 2, 3, 2)
    cert = solve_equilibrium(e)
    assert np.any(np.all(cert.allocation == 0, axis=2))
    pi = supporting_prices(e, cert.allocation)
    assert np.allclose(pi, cert.prices / cert.prices.sum(), atol=1e-6)
    verify_equilibrium(e, cert.allocation, pi, tol=1e-6)
