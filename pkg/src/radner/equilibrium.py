"""Walrasian expectations (quasi-)equilibrium: demand, Negishi solver, verifier.

Prices are ``(|Omega|, l)`` arrays. Outputs are normalized so that all
state prices sum to one; every clause checked here is positively
homogeneous in prices, so the normalization never changes a verdict.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import nnls

from .economy import (Economy, EconomyError, as_allocation, audit_assumptions,
                      expected_utility)
from .programs import (SolverIndeterminate, demand_program, member_of, planner_program,
                       polish_planner)

__all__ = [
    "SolverConfig",
    "EquilibriumCertificate",
    "EquilibriumRejected",
    "NoCertificate",
    "TrivialBudget",
    "UpgradeVerdict",
    "normalize_prices",
    "budget_value",
    "demand",
    "solve_equilibrium",
    "verify_equilibrium",
    "quasi_to_full_upgrade_check",
    "supporting_prices",
]

log = logging.getLogger(__name__)

ZERO_WEALTH = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10          # Negishi stopping rule on max |budget residual|
    verify_tol: float = 1e-6
    max_iter: int = 400
    eta: float = 0.5
    seed: int = 0
    threads: int = 1


class TrivialBudget(ValueError):
    """Endowment has zero value; demand is not defined (quasi-equilibrium case)."""


class NoCertificate(RuntimeError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EquilibriumRejected(ValueError):
    def __init__(self, violations: list[dict]):
        self.violations = violations
        summary = "; ".join(f"{v['clause']}{'[' + str(v['where']) + ']' if 'where' in v else ''}"
                            f"={v['residual']:.3g}" for v in violations)
        super().__init__(f"rejected: {summary}")


@dataclass
class EquilibriumCertificate:
    allocation: NDArray[np.float64]
    prices: NDArray[np.float64]
    budget_residuals: NDArray[np.float64]
    clearing_residual_value: float
    per_state_value_residuals: NDArray[np.float64]
    nontrivial: bool
    quasi_only: bool
    utility_gaps: NDArray[np.float64] = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0


@dataclass(frozen=True)
class UpgradeVerdict:
    status: str  # "upgrade confirmed" | "trivially upgraded" | "A7 undecided, upgrade not asserted" | "counterexample"
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("upgrade confirmed", "trivially upgraded")


def normalize_prices(pi: ArrayLike) -> NDArray[np.float64]:
    pi = np.asarray(pi, dtype=float)
    if np.any(pi < 0):
        raise EconomyError("prices must be nonnegative")
    total = pi.sum()
    if not total > 0:
        raise EconomyError("price system is identically zero")
    return pi / total


def budget_value(pi: ArrayLike, x: ArrayLike) -> float:
    """``sum_w <pi(w), x(w)>``."""
    return float(np.sum(np.asarray(pi, dtype=float) * np.asarray(x, dtype=float)))


def demand(e: Economy, i: int, pi: ArrayLike, tol: float = 1e-10) -> NDArray[np.float64]:
    """Utility-maximizing measurable bundle in agent ``i``'s budget set."""
    p = normalize_prices(pi)
    wealth = budget_value(p, e.agents[i].endowment)
    if not wealth > ZERO_WEALTH:
        raise TrivialBudget(f"agent {i} has zero endowment value")
    prog = demand_program(member_of(e, i), e.n_states, e.dimension)
    y = prog.solve(p, wealth)
    cost = budget_value(p, y)
    if cost > wealth:
        y = y * (wealth / cost)
    return y


def _zero_price_blocks(e: Economy, i: int, p: NDArray) -> bool:
    part = e.agents[i].partition
    block_prices = part.indicator.T @ p
    return bool(np.any(block_prices <= 0))


def verify_equilibrium(e: Economy, x: ArrayLike, pi: ArrayLike, tol: float = 1e-6,
                       quasi: bool = False) -> EquilibriumCertificate:
    """Check the equilibrium clauses; raise :class:`EquilibriumRejected` listing
    every violated clause with its residual."""
    x = as_allocation(e, x)
    p = normalize_prices(pi)
    if p.shape != (e.n_states, e.dimension):
        raise EconomyError("price system shape does not match the economy")
    a = e.endowments
    violations: list[dict] = []

    excess = x.sum(axis=0) - e.aggregate_endowment
    if np.any(excess > tol):
        violations.append({"clause": "feasibility", "residual": float(excess.max())})

    wealth = np.array([budget_value(p, a[i]) for i in range(e.n)])
    budget_res = np.array([budget_value(p, x[i]) for i in range(e.n)]) - wealth
    for i in range(e.n):
        if budget_res[i] > tol:
            violations.append({"clause": "budget", "where": i, "residual": float(budget_res[i])})

    gaps = np.zeros(e.n)
    for i in range(e.n):
        if wealth[i] > ZERO_WEALTH:
            try:
                d = demand(e, i, p)
            except SolverIndeterminate as exc:
                violations.append({"clause": "maximality", "where": i, "residual": float("inf"),
                                   "note": str(exc)})
                continue
            gaps[i] = expected_utility(e, i, d) - expected_utility(e, i, x[i])
            if gaps[i] > tol:
                violations.append({"clause": "maximality", "where": i, "residual": float(gaps[i])})
        elif not quasi and _zero_price_blocks(e, i, p):
            # budget set contains an unbounded ray of free goods
            gaps[i] = float("inf")
            violations.append({"clause": "maximality", "where": i, "residual": float("inf")})

    clearing = budget_value(p, x.sum(axis=0)) - budget_value(p, e.aggregate_endowment)
    if abs(clearing) > tol:
        violations.append({"clause": "value-clearing", "residual": float(clearing)})
    per_state = np.sum(p * excess, axis=1)
    for s in range(e.n_states):
        if abs(per_state[s]) > tol:
            violations.append({"clause": "state-value", "where": e.states.labels[s],
                               "residual": float(per_state[s])})

    nontrivial = bool(np.any(wealth > ZERO_WEALTH))
    if not nontrivial:
        violations.append({"clause": "non-triviality", "residual": 0.0})
    if violations:
        raise EquilibriumRejected(violations)
    return EquilibriumCertificate(
        allocation=x, prices=p, budget_residuals=budget_res,
        clearing_residual_value=float(clearing), per_state_value_residuals=per_state,
        nontrivial=nontrivial, quasi_only=bool(np.any(wealth <= ZERO_WEALTH)),
        utility_gaps=gaps,
    )


def _planner(e: Economy, active: list[int], lam: NDArray, resources: NDArray):
    members = [member_of(e, i) for i in active]
    prog = planner_program(members, e.n_states, e.dimension)
    bundles, duals = prog.solve(lam, resources)
    polished = polish_planner(prog.members, lam, resources, bundles, duals)
    if polished is not None:
        bundles, duals = polished
    return bundles, duals, polished is not None


def solve_equilibrium(e: Economy, cfg: SolverConfig = SolverConfig()) -> EquilibriumCertificate:
    """Negishi iteration on welfare weights.

    Each step solves the planner for weights ``lam``, reads state prices off
    the resource constraints and moves ``lam_i`` by
    ``exp(eta * (value(a_i) - value(x_i)) / value(a_i))``. A step that does
    not improve on the best residual so far is retried from the best
    weights with half the step size; the best iterate is the one verified.
    """
    audit = audit_assumptions(e)
    if not audit.a4:
        raise EconomyError("aggregate endowment must be strictly positive in every state")
    a = e.endowments
    zero = [i for i in range(e.n) if not np.any(a[i] > 0)]
    active = [i for i in range(e.n) if i not in zero]
    resources = e.aggregate_endowment - a[zero].sum(axis=0) if zero else e.aggregate_endowment

    lam = np.array([a[i].sum() for i in active])
    lam = lam / lam.sum()
    eta = cfg.eta
    best = None  # (worst, lam, x, p, res, scale)
    history = []
    for it in range(1, cfg.max_iter + 1):
        try:
            bundles, duals, polished = _planner(e, active, lam, resources)
        except SolverIndeterminate as exc:
            raise NoCertificate("planner solve failed", {"iteration": it, "error": str(exc)}) from exc
        if not duals.sum() > 0:
            raise NoCertificate("planner returned zero prices", {"iteration": it})
        p = duals / duals.sum()
        x = a.copy()
        x[active] = bundles
        wealth = np.array([budget_value(p, a[i]) for i in active])
        res = np.array([budget_value(p, x[i]) for i in active]) - wealth
        worst = float(np.max(np.abs(res)))
        history.append(worst)
        log.debug("negishi it=%d worst=%.3e eta=%.3g polished=%s", it, worst, eta, polished)
        if best is None or worst < best[0]:
            scale = np.where(wealth > ZERO_WEALTH, wealth, max(wealth.sum(), 1.0) / len(active))
            best = (worst, lam, x, p, res, scale)
            eta = min(2.0 * eta, cfg.eta)
        else:
            # a noisy or overshooting step: retry from the best point, shorter
            eta *= 0.5
        if best[0] < cfg.tol or eta < 1e-8:
            break
        _, lam0, _, _, res0, scale0 = best
        lam = lam0 * np.exp(-eta * res0 / scale0)
        lam = lam / lam.sum()
    x, p = best[2], best[3]

    try:
        cert = verify_equilibrium(e, x, p, tol=cfg.verify_tol, quasi=True)
    except EquilibriumRejected as exc:
        raise NoCertificate("Negishi iteration did not reach a verified equilibrium",
                            {"iterations": len(history), "residuals": history[-5:],
                             "violations": exc.violations}) from exc
    cert.iterations = len(history)
    return cert


def quasi_to_full_upgrade_check(e: Economy, cert: EquilibriumCertificate,
                                tol: float = 1e-6) -> UpgradeVerdict:
    """Irreducibility upgrade: a non-trivial quasi-equilibrium is a full one."""
    if not cert.nontrivial:
        return UpgradeVerdict("counterexample", "certificate is trivial")
    if not cert.quasi_only:
        return UpgradeVerdict("trivially upgraded", "every agent has positive endowment value")
    if not audit_assumptions(e).a7_sufficient:
        return UpgradeVerdict("A7 undecided, upgrade not asserted")
    try:
        verify_equilibrium(e, cert.allocation, cert.prices, tol=tol, quasi=False)
    except EquilibriumRejected as exc:
        return UpgradeVerdict("counterexample", str(exc))
    return UpgradeVerdict("upgrade confirmed")


def supporting_prices(e: Economy, x: ArrayLike) -> Optional[NDArray[np.float64]]:
    """Candidate prices supporting ``x`` from first-order conditions.

    Stacks ``k_i * dV_i/dx_i(b, k) = sum_{w in b} pi(w, k)`` over strictly
    positive block coordinates, plus each budget identity
    ``<pi, x_i - a_i> = 0``, and solves for ``(k, pi) >= 0`` by nonnegative
    least squares. The result still has to pass
    :func:`verify_equilibrium`.
    """
    x = as_allocation(e, x)
    n_p = e.n_states * e.dimension
    rows, cols_k = [], []
    for i, ag in enumerate(e.agents):
        part = ag.partition
        q = ag.prior.array
        for b, block in enumerate(part.blocks):
            bundle = x[i, block[0]]
            if np.any(bundle <= 0):
                grad = None
            else:
                grad = sum(q[s] * ag.utilities[s].gradient(bundle) for s in block)
            for k in range(e.dimension):
                if grad is None or bundle[k] <= 0:
                    continue
                row = np.zeros(e.n + n_p)
                row[i] = grad[k]
                for s in block:
                    row[e.n + s * e.dimension + k] = -1.0
                rows.append(row)
        cols_k.append(i)
        # the budget identity ties together states that no interior block
        # prices jointly (corner plans)
        row = np.zeros(e.n + n_p)
        row[e.n:] = (x[i] - ag.endowment).ravel()
        rows.append(row)
    if not rows:
        return None
    norm = np.zeros(e.n + n_p)
    norm[e.n:] = 1.0
    a_mat = np.vstack(rows + [1e3 * norm])
    rhs = np.zeros(a_mat.shape[0])
    rhs[-1] = 1e3
    sol, _ = nnls(a_mat, rhs, maxiter=50 * a_mat.shape[1])
    pi = sol[e.n:].reshape(e.n_states, e.dimension)
    if not pi.sum() > 0:
        return None
    return pi / pi.sum()
