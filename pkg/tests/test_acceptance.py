"""Acceptance criteria 1-9, one test each, at the stated tolerances.

Every test records ``(passed, detail)`` in ``conftest.ACCEPTANCE`` before
asserting, and the terminal summary prints one line per criterion. Run as a
script for the same output: ``python tests/test_acceptance.py``.
"""
import contextlib
import functools
import io
import json
import logging
import os
import sys
import tempfile
import time

import numpy as np
import pytest
from scipy.optimize import linprog

sys.path.insert(0, os.path.dirname(__file__))

import conftest  # noqa: E402
from conftest import cd, fixture_path, make_economy  # noqa: E402
from oracles import edgeworth, edgeworth_solution, grid_private_margin, random_tiny  # noqa: E402
from radner.blocking import (aubin_block, blocking_margin, ex_post_block,  # noqa: E402
                             private_core_membership, validate_certificate)
from radner.cli import main  # noqa: E402
from radner.continuum import (continuum_residuals, continuum_valid, lemma_shrink,  # noqa: E402
                              resize_to_measure)
from radner.economy import perturbed_economy  # noqa: E402
from radner.equilibrium import solve_equilibrium, verify_equilibrium  # noqa: E402
from radner.io import certificate_from_dict, dump_economy, generate  # noqa: E402
from radner.lattice import (SpaceDescriptor, classify_space, riesz_decompose,  # noqa: E402
                            rk_sup)
from radner.verifier import (CONFIRMED, check_corollary5, check_theorem6,  # noqa: E402
                             check_theorem7, check_theorem8)

pytestmark = pytest.mark.slow
log = logging.getLogger("acceptance")
TOL = 1e-6
N_INSTANCES = 50


def record(k, ok, detail):
    conftest.ACCEPTANCE[k] = (bool(ok), detail)
    assert ok, detail


def instance(k):
    return generate(1000 + k, 2 + k % 2, 1 + (k // 2) % 3, 1 + (k // 6) % 3)


@functools.lru_cache(maxsize=None)
def family():
    """The 50 seeded instances with their verified equilibria."""
    out, started = [], time.perf_counter()
    for k in range(N_INSTANCES):
        e = instance(k)
        cert = solve_equilibrium(e)
        verify_equilibrium(e, cert.allocation, cert.prices, tol=TOL)
        out.append((e, cert.allocation))
    return out, time.perf_counter() - started


def reload(rep):
    return certificate_from_dict(json.loads(json.dumps(rep.evidence["certificate"])))


def revalidates(e, x, rep):
    er = perturbed_economy(e, np.array(rep.evidence["r"]), x)
    return validate_certificate(er, x, reload(rep))


def test_criterion_1_edgeworth_oracle():
    t = time.perf_counter()
    cert = solve_equilibrium(edgeworth())
    elapsed = time.perf_counter() - t
    x, p = edgeworth_solution()
    err = max(np.max(np.abs(cert.allocation - x)), np.max(np.abs(cert.prices - p)))
    record(1, err <= 1e-6 and elapsed < 5.0, f"max error {err:.2e}, {elapsed:.2f} s")


def test_criterion_2_equilibria_in_core():
    inst, solve_time = family()
    t = time.perf_counter()
    blocked = [k for k, (e, x) in enumerate(inst) if not private_core_membership(e, x, TOL).in_core]
    total = solve_time + time.perf_counter() - t
    record(2, not blocked and total < 600,
           f"{N_INSTANCES - len(blocked)}/{N_INSTANCES} in core, blocked {blocked}, {total:.1f} s")


def test_criterion_3_aubin():
    inst, _ = family()
    found = [k for k, (e, x) in enumerate(inst) if aubin_block(e, x) is not None]
    bad = []
    for k, (e, x) in enumerate(inst):
        cert = aubin_block(e, 0.9 * x)
        if cert is None or not validate_certificate(e, 0.9 * x, cert):
            bad.append(k)
    record(3, not found and not bad,
           f"equilibria blocked {found}; dominated without valid certificate {bad}")


def test_criterion_4_vind_construction():
    inst, _ = family()
    measures = np.round(np.arange(1, 100) / 100, 2)
    worst_mass, worst_res, failures = 0.0, 0.0, []
    for k, (e, x) in enumerate(inst[:10]):
        y = 0.9 * x
        v = private_core_membership(e, y, TOL)
        try:
            sh = lemma_shrink(e, v.certificate, y)
        except Exception as exc:  # recorded, not hidden
            failures.append((k, "shrink", str(exc)))
            continue
        for m in measures:
            try:
                c = resize_to_measure(e, sh, y, float(m))
            except Exception as exc:
                failures.append((k, float(m), str(exc)))
                continue
            r = continuum_residuals(e, c, y)
            worst_mass = max(worst_mass, abs(c.mass - m))
            worst_res = max(worst_res, -r["min_surplus"], r["mass_excess"])
            if not (continuum_valid(e, c, y) and r["min_margin"] > 0):
                failures.append((k, float(m), "invalid"))
    ok = not failures and worst_mass <= 1e-12 and worst_res <= 1e-9
    record(4, ok, f"10 fixtures x 99 measures, mass error {worst_mass:.1e}, "
                  f"residual {worst_res:.1e}, failures {failures[:3]}")


def partial_coalition_fixture():
    """Agents 1 and 2 lose to agent 3; only the pair blocks."""
    u = [cd(0.5, 0.5)]
    e = make_economy([[[2, 1]], [[1, 2]], [[1, 1]]], [u, u, u])
    x = solve_equilibrium(e).allocation.copy()
    x[0] *= 0.95
    x[1] *= 0.95
    x[2] = e.aggregate_endowment[0] - x[0, 0] - x[1, 0]
    return e, x


def test_criterion_5_theorem6():
    inst, _ = family()
    dirty = []
    for k, (e, x) in enumerate(inst):
        rep = check_theorem6(e, x, tol=TOL)
        if (rep.direction, rep.verdict) != ("forward", CONFIRMED) or rep.evidence["certificates"]:
            dirty.append(k)
    dominated = [(e, 0.9 * x) for e, x in inst] + [partial_coalition_fixture()]
    missed, near, lifts = [], 0, {}
    for k, (e, y) in enumerate(dominated):
        rep = check_theorem6(e, y, tol=TOL)
        if rep.verdict != CONFIRMED or rep.direction != "converse" or not revalidates(e, y, rep):
            missed.append(k)
            continue
        near += min(rep.evidence["r"]) >= 0.75
        kind = rep.evidence.get("lift", "?").split(" [")[0]
        lifts[kind] = lifts.get(kind, 0) + 1
    record(5, not dirty and not missed and near >= 1,
           f"forward dirty {dirty}; converse {len(dominated) - len(missed)}/{len(dominated)} "
           f"found r, {near} near-complete, lifts {lifts}")


def test_criterion_6_theorems_7_8_c5():
    problems, checked = [], 0
    for k in range(20):
        e = generate(2000 + k, 2 + k % 2, 1 + k % 2, 2, "complementary")
        a = e.endowments
        bad = a.copy()
        for i in range(e.n):
            if len(e.partitions[i]) == 2:
                bad[i, 0] *= 0.9
        for name, rep, x in (("t7", check_theorem7(e, bad), bad), ("t8", check_theorem8(e, a), a),
                             ("c5", check_corollary5(e, a), a)):
            if rep.verdict != CONFIRMED:
                problems.append((k, name, rep.verdict))
            elif "certificate" in rep.evidence:
                checked += 1
                if rep.evidence.get("found-by") == "grid search" or not revalidates(e, x, rep):
                    problems.append((k, name, "construction"))
    collapse = []
    inst, _ = family()
    for k, (e, x) in enumerate(inst):
        if e.n_states != 1:
            continue
        for y in (x, 0.9 * x, e.endowments):
            w, v = ex_post_block(e, y, TOL), private_core_membership(e, y, TOL)
            same = (w is None) == v.in_core
            if w is not None and same:
                same = w.coalition == v.certificate.coalition
            if not same:
                collapse.append(k)
    record(6, not problems and not collapse,
           f"{checked} constructions re-validated, problems {problems[:4]}, collapse mismatches {collapse}")


CHART = {
    "Rn": "interior: yes, quasi-interior: yes, theorems 1,4,5,6",
    "ell_infinity": "interior: yes, quasi-interior: yes, theorems 1,4,5,6",
    "L_infinity": "interior: yes, quasi-interior: yes, theorems 1,4,5,6",
    "C_K": "interior: yes, quasi-interior: yes, theorems 1,4,5,6",
    "ell_p": "interior: no, quasi-interior: yes, theorems 2,4, remarks 4,6",
    "L_p": "interior: no, quasi-interior: yes, theorems 2,4, remarks 4,6",
    "M_K_uncountable": "interior: no, quasi-interior: no, theorems 3,4, remarks 4,6",
}


def lp_sup(f, g, x):
    """``max <f, y> + <g, x - y>`` over ``0 <= y <= x`` by linear programming."""
    res = linprog(-(f - g), bounds=list(zip(np.zeros_like(x), x)), method="highs")
    return float(-res.fun + g @ x)


def test_criterion_7_lattice_kernel():
    from radner.lattice import format_classification
    rng = np.random.default_rng(7)
    rk_err = 0.0
    for _ in range(1000):
        dim = int(rng.integers(1, 5))
        f, g = rng.normal(size=dim), rng.normal(size=dim)
        x = rng.uniform(0, 3, size=dim)
        rk_err = max(rk_err, abs(rk_sup(f, g, x) - lp_sup(f, g, x)))
    rz_err = 0.0
    for _ in range(1000):
        m, dim = int(rng.integers(1, 6)), int(rng.integers(1, 5))
        y = rng.uniform(0, 2, size=(m, dim))
        z = y * rng.uniform(0, 1, size=(m, dim))
        zh = np.array(riesz_decompose(list(z), list(y), np.zeros(dim)))
        rz_err = max(rz_err, np.max(np.abs(zh.sum(axis=0) - z.sum(axis=0))),
                     np.max(zh - y), np.max(-zh))
    rows = [fam for fam, line in CHART.items()
            if format_classification(classify_space(SpaceDescriptor(fam, 2.0 if "_p" in fam else None)))
            == line]
    record(7, rk_err <= 1e-9 and rz_err <= 1e-12 and len(rows) == 7,
           f"rk max error {rk_err:.1e}, riesz max violation {rz_err:.1e}, chart rows {len(rows)}/7")


def test_criterion_8_brute_force_blocking():
    disagree, dead_band, decided = [], 0, 0
    for seed in range(200):
        e, x = random_tiny(seed)
        if seed % 10 == 0:
            x = solve_equilibrium(e).allocation
        delta, _, _ = blocking_margin(e, (0, 1), x)
        g = grid_private_margin(e, x, 0.05)
        if (delta > TOL) == (g > 0):
            decided += abs(delta) > 0.1
            continue
        if abs(delta) > 0.1:
            disagree.append(seed)
        else:
            dead_band += 1
            log.info("dead-band disagreement seed %d: delta %.3g grid %.3g", seed, delta, g)
    record(8, not disagree,
           f"200 instances, {decided} outside the dead band agree, disagreements {disagree}, "
           f"{dead_band} dead-band disagreements logged")


def determinism_fixtures(tmp):
    gen = os.path.join(tmp, "generated.json")
    with open(gen, "w", encoding="utf-8") as fh:
        fh.write(dump_economy(generate(7, 3, 2, 2)))
    ew = fixture_path("edgeworth.json")
    return [(ew, ["--allocation", "equilibrium"]), (ew, ["--allocation", "scaled"]),
            (fixture_path("complementary.json"), []), (fixture_path("zero_wealth.json"), []),
            (gen, [])]


def test_criterion_9_determinism():
    varying = []
    with tempfile.TemporaryDirectory() as tmp:
        for k, (path, extra) in enumerate(determinism_fixtures(tmp)):
            outs = []
            for threads in (1, 4, 16):
                out = os.path.join(tmp, f"r{k}_{threads}.json")
                with contextlib.redirect_stderr(io.StringIO()):
                    main(["verify", path, "--theorem", "6", "--seed", "0", *extra,
                          "--threads", str(threads), "--out", out])
                with open(out, "rb") as fh:
                    outs.append(fh.read())
            if len(set(outs)) != 1:
                varying.append(os.path.basename(path))
    record(9, not varying, f"5 fixtures x threads 1/4/16, differing reports {varying}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
