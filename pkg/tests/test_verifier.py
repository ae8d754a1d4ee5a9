import json

import numpy as np
import pytest

import radner.verifier as V
from conftest import cd, make_economy
from oracles import edgeworth, edgeworth_solution
from radner.blocking import validate_certificate
from radner.economy import perturbed_economy
from radner.equilibrium import solve_equilibrium
from radner.information import Partition
from radner.io import certificate_from_dict, generate
from radner.programs import SolverIndeterminate
from radner.verifier import (CONFIRMED, INDETERMINATE, RGrid, check_corollary5, check_proposition2,
                             check_theorem5, check_theorem6, check_theorem7, check_theorem8,
                             default_r_grid, lift_block_to_domination)

SMALL = RGrid(2, 10)


def reload_cert(rep):
    # certificates must be self-contained: go through JSON text
    return certificate_from_dict(json.loads(json.dumps(rep.evidence["certificate"])))


def test_r_grid_shape_and_order():
    pts = default_r_grid(2)
    assert len(pts) == 25 + 100
    assert np.array_equal(pts[0], [1.0, 1.0])
    mins = [p.min() for p in pts]
    assert mins == sorted(mins, reverse=True)
    assert [p.tolist() for p in default_r_grid(2)] == [p.tolist() for p in pts]
    assert len(default_r_grid(7, RGrid(4, 0))) == 4096  # capped


def test_r_grid_parse():
    assert RGrid.parse("3:5") == RGrid(3, 5)
    assert RGrid.parse("") == RGrid()
    for bad in ("3", "a:b", "0:1", "2:-1"):
        with pytest.raises(ValueError):
            RGrid.parse(bad)


def test_theorem5_examples():
    e = edgeworth()
    x, p = edgeworth_solution()
    rep = check_theorem5(e, x)
    assert (rep.direction, rep.verdict) == ("forward", CONFIRMED)
    assert "none-found" in rep.evidence["aubin"] and "coalitions=grand" in rep.policy
    rep = check_theorem5(e, 0.9 * x)
    assert (rep.direction, rep.verdict) == ("converse", CONFIRMED)
    assert validate_certificate(e, 0.9 * x, reload_cert(rep))
    rep = check_theorem5(e, e.endowments)
    assert rep.verdict == CONFIRMED and rep.evidence["min-weight"] == 1.0


def test_theorem6_examples():
    e = edgeworth()
    x, _ = edgeworth_solution()
    rep = check_theorem6(e, x)
    assert (rep.direction, rep.verdict) == ("forward", CONFIRMED)
    assert rep.evidence["certificates"] == 0 and rep.evidence["grid-points"] == 125
    y = 0.9 * x
    rep = check_theorem6(e, y, SMALL)
    assert rep.verdict == CONFIRMED and rep.evidence["r"] == [1.0, 1.0]
    er = perturbed_economy(e, np.array(rep.evidence["r"]), y)
    assert validate_certificate(er, y, reload_cert(rep))


def test_theorem6_endowment_collapses_grid():
    u = [cd(0.5, 0.5)]
    e = make_economy([[[1.0, 1.0]], [[2.0, 2.0]]], [u, u])  # autarky is Walrasian
    rep = check_theorem6(e, e.endowments)
    assert rep.verdict == CONFIRMED and rep.evidence["grid-points"] == 1


def test_theorem6_converse_reaches_near_complete_r():
    """A coalition that blocks while the grand coalition does not: the
    converse goes through the continuum lift."""
    u = [cd(0.5, 0.5)]
    e = make_economy([[[2, 1]], [[1, 2]], [[1, 1]]], [u, u, u])
    x = solve_equilibrium(e).allocation.copy()
    # agents 1, 2 lose, agent 3 gains enough that the grand coalition cannot improve all
    x[0] *= 0.95
    x[1] *= 0.95
    x[2] = e.aggregate_endowment[0] - x[0, 0] - x[1, 0]
    rep = check_theorem6(e, x, SMALL)
    assert rep.verdict == CONFIRMED and rep.direction == "converse"
    r = np.array(rep.evidence["r"])
    er = perturbed_economy(e, r, x)
    assert validate_certificate(er, x, reload_cert(rep))


def per_state_edgeworth():
    c = cd(0.5, 0.5)
    return make_economy([[[1, 0], [1, 0]], [[0, 1], [0, 1]]], [[c, c]] * 2,
                        [Partition.discrete(2), Partition.trivial(2)])


def test_theorem7_statewise_equilibrium():
    e = per_state_edgeworth()
    x = np.full((2, 2, 2), 0.5)
    rep = check_theorem7(e, x, SMALL)
    assert rep.verdict == CONFIRMED and rep.evidence["ex-post-core"]
    assert rep.evidence["fine-dominations"] == 0


def test_theorem7_one_bad_state_construction():
    e = generate(3, 2, 2, 2, "complementary")
    x = e.endowments.copy()
    x[0, 1] *= 0.9  # agent 1 (full information) wastes in state 2
    rep = check_theorem7(e, x, SMALL)
    assert rep.verdict == CONFIRMED and "found-by" not in rep.evidence
    er = perturbed_economy(e, np.array(rep.evidence["r"]), x)
    cert = reload_cert(rep)
    assert cert.information == "pooled" and validate_certificate(er, x, cert)


def test_theorem7_single_state_collapse():
    e = edgeworth()
    for x in (e.endowments, edgeworth_solution()[0]):
        rep = check_theorem7(e, x, SMALL)
        from radner.blocking import private_core_membership
        assert rep.evidence.get("ex-post-core", False) == private_core_membership(e, x).in_core


def test_theorem8_examples():
    e = edgeworth()
    x, _ = edgeworth_solution()
    rep = check_theorem8(e, x, SMALL)
    assert (rep.direction, rep.verdict) == ("forward", CONFIRMED)
    rep = check_theorem8(e, 0.9 * x, SMALL)
    assert rep.direction == "converse" and rep.verdict == CONFIRMED
    assert rep.evidence["near-complete"] and rep.evidence["solver-confirms"]
    er = perturbed_economy(e, np.array(rep.evidence["r"]), 0.9 * x)
    assert validate_certificate(er, 0.9 * x, reload_cert(rep))


def test_lift_gives_near_complete_r():
    e = edgeworth()
    x = e.endowments
    from radner.blocking import private_block
    cert = private_block(e, (0, 1), x)
    r, lifted, er = lift_block_to_domination(e, x, cert)
    assert r.min() >= 0.75 and validate_certificate(er, x, lifted)


def test_corollary5_reduces_to_theorem8_with_equal_partitions():
    e = edgeworth()
    for x in (edgeworth_solution()[0], 0.9 * edgeworth_solution()[0]):
        c5, t8 = check_corollary5(e, x, SMALL), check_theorem8(e, x, SMALL)
        assert (c5.direction, c5.verdict) == (t8.direction, t8.verdict)


def test_corollary5_complementary_and_single_agent():
    e = generate(11, 2, 2, 2, "complementary")
    rep = check_corollary5(e, e.endowments, SMALL)
    assert rep.verdict == CONFIRMED
    one = make_economy([[[1.0, 2.0]]], [[cd(0.5, 0.5)]])
    rep = check_corollary5(one, one.endowments, SMALL)
    assert (rep.direction, rep.verdict) == ("forward", CONFIRMED)


def test_proposition2_examples():
    rep = check_proposition2(edgeworth())
    assert rep.verdict == CONFIRMED and rep.evidence["round-trip-exact"]
    z = make_economy([[[1, 1]], [[1, 2]], [[0, 0]]], [[cd(0.5, 0.5)]] * 3)
    rep = check_proposition2(z)
    assert rep.verdict == CONFIRMED
    assert rep.evidence["quasi-only"] and rep.evidence["quasi-only-preserved"]
    dup = make_economy([[[1, 2]], [[1, 2]], [[2, 1]]], [[cd(0.5, 0.5)]] * 3)
    assert check_proposition2(dup).verdict == CONFIRMED


def test_hypotheses_unmet():
    u = [cd(0.5, 0.5)]
    e = make_economy([[[1, 0]], [[1, 0]]], [u, u])  # no agent owns good 2: A4 fails, A5 holds
    rep = check_theorem5(e, e.endowments)
    assert rep.verdict == "hypotheses unmet" and rep.evidence["missing"] == ["A4"]
    assert check_theorem8(e, e.endowments, SMALL).verdict != "hypotheses unmet"
    z = make_economy([[[1, 1]], [[0, 0]]], [u, u])  # agent 2 owns nothing: A5 fails
    rep = check_theorem8(z, z.endowments, SMALL)
    assert rep.verdict == "hypotheses unmet" and rep.evidence["missing"] == ["A5"]


def test_indeterminacy_propagates(monkeypatch):
    e = edgeworth()
    x, _ = edgeworth_solution()

    def broken(*args, **kwargs):
        raise SolverIndeterminate("forced")

    monkeypatch.setattr(V, "privately_dominated", broken)
    monkeypatch.setattr(V, "aubin_block", broken)
    assert check_theorem6(e, x, SMALL).verdict == INDETERMINATE
    assert check_theorem5(e, x).verdict == INDETERMINATE
    assert check_theorem8(e, x, SMALL).verdict == INDETERMINATE


def test_reports_are_thread_independent():
    e = generate(4, 2, 2, 2)
    x = solve_equilibrium(e).allocation
    a = check_theorem6(e, x, SMALL, threads=1).as_dict()
    b = check_theorem6(e, x, SMALL, threads=4).as_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
