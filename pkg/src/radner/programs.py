"""Concave programs behind the blocking oracles, demand and the planner.

Every program is built once per structural key (member partitions, utility
specs, priors) as a parametrized cvxpy problem and cached per thread; only
resources, weights and utility floors change between solves. Utilities are
modelled exactly with 3-d power cones and exponential cones, so real-valued
exponents are not rounded to rationals.
"""

from __future__ import annotations

import logging
import threading
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import cvxpy as cp
import numpy as np
from cvxpy.constraints import PowCone3D
from numpy.typing import NDArray

from .economy import Economy, UtilitySpec
from .information import Partition

__all__ = [
    "SolverIndeterminate",
    "Member",
    "member_of",
    "BlockingProgram",
    "DemandProgram",
    "PlannerProgram",
    "blocking_program",
    "demand_program",
    "planner_program",
]

log = logging.getLogger(__name__)

SOLVER = "CLARABEL"
TIGHT = {"tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10, "tol_feas": 1e-10, "max_iter": 300}
LOOSE = {"tol_gap_abs": 1e-8, "tol_gap_rel": 1e-8, "tol_feas": 1e-8, "max_iter": 500,
         "static_regularization_constant": 1e-7}
# second opinion when the interior-point solver stalls on a degenerate face
FALLBACK = "SCS"
FALLBACK_OPTS = ({"eps": 1e-9, "max_iters": 100_000}, {"eps": 1e-7, "max_iters": 200_000})

# inaccurate statuses are handled explicitly in _solve
warnings.filterwarnings("ignore", message="Solution may be inaccurate", category=UserWarning)


class SolverIndeterminate(RuntimeError):
    """The conic solver did not certify optimality; no verdict can be drawn."""


@dataclass(frozen=True)
class Member:
    """Structural description of one agent inside a program."""

    partition: Partition
    utilities: tuple[UtilitySpec, ...]
    prior: tuple[float, ...]


def member_of(e: Economy, i: int, partition: Optional[Partition] = None) -> Member:
    ag = e.agents[i]
    return Member(partition or ag.partition, ag.utilities, ag.prior.weights)


def _geo_mean_hypo(xs: list, exps: list[float], t):
    """Constraints encoding ``t <= prod xs_j^exps_j`` with ``sum(exps) == 1``."""
    if len(xs) == 1:
        return [t <= xs[0]]
    head, rest = exps[0], sum(exps[1:])
    if len(xs) == 2:
        return [PowCone3D(xs[0], xs[1], t, head)]
    w = cp.Variable()
    return [PowCone3D(xs[0], w, t, head)] + _geo_mean_hypo(xs[1:], [e / rest for e in exps[1:]], w)


def utility_hypograph(spec: UtilitySpec, y) -> tuple[cp.Expression, list]:
    """Return ``(u, cons)`` such that ``u <= spec(y)`` is exactly representable."""
    w = np.array(spec.weights)
    dim = w.size
    if spec.form == "linear":
        return w @ y, []
    if spec.form == "log_linear":
        return w @ cp.log(y + spec.shift), []
    t = cp.Variable()
    if spec.form == "cobb_douglas":
        xs = [y[k] for k in range(dim)]
        exps = list(spec.weights)
        slack = 1.0 - sum(exps)
        if slack > 1e-15:
            xs.append(cp.Constant(1.0))
            exps.append(slack)
        if len(xs) == 1:
            return y[0], []
        return t, _geo_mean_hypo(xs, exps, t)
    rho = spec.rho
    r = cp.Variable(dim)
    if rho > 0:
        # r_k <= w_k y_k^rho t^(1-rho), sum r >= t  <=>  t <= (sum w y^rho)^(1/rho)
        cons = [PowCone3D(y[k], t, r[k] / w[k], rho) for k in range(dim)]
        cons.append(cp.sum(r) >= t)
    else:
        # r_k >= w_k t^(1-rho) y_k^rho, sum r <= t
        cons = [PowCone3D(r[k] / w[k], y[k], t, 1.0 / (1.0 - rho)) for k in range(dim)]
        cons.append(cp.sum(r) <= t)
    return t, cons


def expected_utility_expr(m: Member, y) -> tuple[cp.Expression, list]:
    """Hypograph of ``V(y)`` for a dense ``(states, l)`` expression ``y``."""
    terms, cons = [], []
    for s, spec in enumerate(m.utilities):
        u, c = utility_hypograph(spec, y[s])
        terms.append(m.prior[s] * u)
        cons += c
    return cp.sum(cp.hstack(terms)) if len(terms) > 1 else terms[0], cons


# cvxpy tracks DPP analysis in a module-level flag, so two threads compiling
# at once can see each other's parameters as variables.
_CVXPY_LOCK = threading.Lock()


def _run(problem: cp.Problem, solver: str, opts: dict) -> None:
    with _CVXPY_LOCK:
        problem.solve(solver=solver, **opts)


def _solve(problem: cp.Problem) -> None:
    try:
        _run(problem, SOLVER, TIGHT)
    except cp.SolverError:
        _run(problem, SOLVER, LOOSE)
    if problem.status == cp.OPTIMAL_INACCURATE:
        _run(problem, SOLVER, LOOSE)
    for opts in FALLBACK_OPTS:
        if problem.status == cp.OPTIMAL:
            break
        try:
            _run(problem, FALLBACK, opts)
        except cp.SolverError as exc:
            raise SolverIndeterminate(f"solver failure: {exc}") from None
    if problem.status != cp.OPTIMAL:
        raise SolverIndeterminate(f"solver status {problem.status!r}")


def _member_vars(m: Member, dim: int):
    blocks = cp.Variable((len(m.partition), dim), nonneg=True)
    dense = m.partition.indicator @ blocks
    return blocks, dense


def _dense_value(m: Member, blocks) -> NDArray[np.float64]:
    return m.partition.expand(np.maximum(blocks.value, 0.0))


class BlockingProgram:
    """``max delta`` s.t. ``V_i(y_i) >= floor_i + delta`` and
    ``sum_i w_i y_i(w) <= resources(w)`` with block-measurable ``y_i >= 0``."""

    def __init__(self, members: Sequence[Member], n_states: int, dim: int):
        self.members = tuple(members)
        k = len(self.members)
        self.weights = cp.Parameter(k, nonneg=True)
        self.resources = cp.Parameter((n_states, dim))
        self.floors = cp.Parameter(k)
        self.delta = cp.Variable()
        self.blocks = []
        cons = []
        total = 0
        for j, m in enumerate(self.members):
            blk, dense = _member_vars(m, dim)
            self.blocks.append(blk)
            v, c = expected_utility_expr(m, dense)
            cons += c
            cons.append(v >= self.floors[j] + self.delta)
            total = total + self.weights[j] * dense
        cons.append(total <= self.resources)
        self.problem = cp.Problem(cp.Maximize(self.delta), cons)

    def solve(self, weights, resources, floors) -> tuple[float, NDArray[np.float64]]:
        self.weights.value = np.asarray(weights, dtype=float)
        self.resources.value = np.asarray(resources, dtype=float)
        self.floors.value = np.asarray(floors, dtype=float)
        _solve(self.problem)
        bundles = np.stack([_dense_value(m, b) for m, b in zip(self.members, self.blocks)])
        return float(self.delta.value), bundles


class DemandProgram:
    """``max V(y)`` over block-measurable ``y >= 0`` with ``<pi, y> <= wealth``."""

    def __init__(self, member: Member, n_states: int, dim: int):
        self.member = member
        self.prices = cp.Parameter((n_states, dim), nonneg=True)
        self.wealth = cp.Parameter(nonneg=True)
        self.blocks, dense = _member_vars(member, dim)
        v, cons = expected_utility_expr(member, dense)
        cons.append(cp.sum(cp.multiply(self.prices, dense)) <= self.wealth)
        self.value = v
        self.problem = cp.Problem(cp.Maximize(v), cons)

    def solve(self, prices, wealth) -> NDArray[np.float64]:
        self.prices.value = np.asarray(prices, dtype=float)
        self.wealth.value = float(wealth)
        _solve(self.problem)
        return _dense_value(self.member, self.blocks)


class PlannerProgram:
    """Negishi planner ``max sum_i lam_i log(V_i(x_i) - V_i(0))`` subject to
    per-state resource constraints; their duals are the state prices.

    The log transform leaves the Pareto frontier unchanged and keeps the
    program strictly concave in utility space even for homogeneous
    utilities, where the plain weighted sum would bang to corners.
    """

    def __init__(self, members: Sequence[Member], n_states: int, dim: int):
        self.members = tuple(members)
        k = len(self.members)
        self.lam = cp.Parameter(k, nonneg=True)
        self.resources = cp.Parameter((n_states, dim))
        self.blocks = []
        cons, obj = [], 0
        total = 0
        zero = np.zeros((n_states, dim))
        for j, m in enumerate(self.members):
            blk, dense = _member_vars(m, dim)
            self.blocks.append(blk)
            v, c = expected_utility_expr(m, dense)
            cons += c
            v0 = sum(m.prior[s] * float(spec(zero[s])) for s, spec in enumerate(m.utilities))
            obj = obj + self.lam[j] * cp.log(v - v0)
            total = total + dense
        self.clearing = total <= self.resources
        cons.append(self.clearing)
        self.problem = cp.Problem(cp.Maximize(obj), cons)

    def solve(self, lam, resources) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        self.lam.value = np.asarray(lam, dtype=float)
        self.resources.value = np.asarray(resources, dtype=float)
        _solve(self.problem)
        bundles = np.stack([_dense_value(m, b) for m, b in zip(self.members, self.blocks)])
        duals = np.maximum(np.asarray(self.clearing.dual_value, dtype=float), 0.0)
        return bundles, duals


_local = threading.local()


def _cached(key, factory):
    cache = getattr(_local, "cache", None)
    if cache is None:
        cache = _local.cache = {}
    prog = cache.get(key)
    if prog is None:
        prog = cache[key] = factory()
    return prog


def blocking_program(members: Sequence[Member], n_states: int, dim: int) -> BlockingProgram:
    members = tuple(members)
    return _cached(("block", members, n_states, dim),
                   lambda: BlockingProgram(members, n_states, dim))


def demand_program(member: Member, n_states: int, dim: int) -> DemandProgram:
    return _cached(("demand", member, n_states, dim),
                   lambda: DemandProgram(member, n_states, dim))


def planner_program(members: Sequence[Member], n_states: int, dim: int) -> PlannerProgram:
    members = tuple(members)
    return _cached(("planner", members, n_states, dim),
                   lambda: PlannerProgram(members, n_states, dim))


def _polish_failed(reason: str) -> None:
    log.debug("planner polish skipped: %s", reason)
    return None


def _zero_gradient(spec) -> Optional[NDArray[np.float64]]:
    """Gradient at the zero bundle, or ``None`` where the utility has a kink
    there (Cobb-Douglas and CES are not differentiable at 0)."""
    w = np.array(spec.weights)
    if spec.form == "linear":
        return w
    if spec.form == "log_linear":
        return w / spec.shift
    return None


def polish_planner(members: Sequence[Member], lam, resources, bundles, duals,
                   max_iter: int = 40) -> Optional[tuple[NDArray[np.float64], NDArray[np.float64]]]:
    """Newton refinement of a planner solution on its active set.

    Interior-point output is accurate in objective value but only to about
    the square root of the gap in the allocation. Taking the support of
    ``bundles`` and the binding resource rows as given, this solves the
    KKT equations of the planner directly. Returns ``None`` whenever the
    refined point fails to certify (singular system, sign violations),
    in which case callers keep the conic solution.
    """
    members = tuple(members)
    lam = np.asarray(lam, dtype=float)
    resources = np.asarray(resources, dtype=float)
    n_states, dim = resources.shape
    scale = max(1.0, float(np.max(resources)))

    # variable layout: member j, block b, coordinate k
    offsets, blocks0 = [], []
    pos = 0
    for j, m in enumerate(members):
        offsets.append(pos)
        blocks0.append(m.partition.restrict(bundles[j]))
        pos += len(m.partition) * dim
    z = np.concatenate([b.ravel() for b in blocks0])
    free = z > 1e-7 * scale
    if not np.any(free):
        return _polish_failed("empty support")

    rows = []
    for s in range(n_states):
        for k in range(dim):
            row = np.zeros(z.size)
            for j, m in enumerate(members):
                row[offsets[j] + m.partition.block_of[s] * dim + k] = 1.0
            rows.append(row)
    a_full = np.array(rows)
    flat_duals = duals.ravel()
    active = flat_duals > 1e-9 * max(1.0, float(np.max(duals)))
    # states that no member can tell apart give identical rows; merge them
    # so the KKT system stays nonsingular and split the dual back afterwards
    groups: dict = {}
    for r in np.flatnonzero(active):
        groups.setdefault((a_full[r].tobytes(), float(resources.ravel()[r])), []).append(r)
    groups = list(groups.values())
    reps = [g[0] for g in groups]
    a_act = a_full[reps][:, free]
    b_act = resources.ravel()[reps]
    if a_act.shape[0] > int(free.sum()):
        return _polish_failed("more active rows than free variables")

    zero = np.zeros(dim)
    v0 = [sum(m.prior[s] * float(spec(zero)) for s, spec in enumerate(m.utilities)) for m in members]

    kinks: set = set()

    def grad_hess(zv):
        g = np.zeros(zv.size)
        h = np.zeros((zv.size, zv.size))
        for j, m in enumerate(members):
            nb = len(m.partition)
            blk = zv[offsets[j]:offsets[j] + nb * dim].reshape(nb, dim)
            gv = np.zeros((nb, dim))
            hv = np.zeros((nb * dim, nb * dim))
            val = 0.0
            for s, spec in enumerate(m.utilities):
                b = m.partition.block_of[s]
                xs = blk[b]
                q = m.prior[s]
                val += q * float(spec(xs))
                if not np.any(xs):
                    # whole block held at zero: only the gradient is needed
                    g0 = _zero_gradient(spec)
                    if g0 is None:
                        kinks.update(offsets[j] + b * dim + k for k in range(dim))
                    else:
                        gv[b] += q * g0
                    continue
                gv[b] += q * spec.gradient(xs)
                hv[b * dim:(b + 1) * dim, b * dim:(b + 1) * dim] += q * spec.hessian(xs)
            gap = val - v0[j]
            if not gap > 0:
                raise FloatingPointError
            gflat = gv.ravel()
            sl = slice(offsets[j], offsets[j] + nb * dim)
            g[sl] = lam[j] / gap * gflat
            h[sl, sl] = lam[j] / gap * hv - lam[j] / gap ** 2 * np.outer(gflat, gflat)
        return g, h

    zf = z.copy()
    zf[~free] = 0.0
    nu = np.array([flat_duals[g].sum() for g in groups])
    nfree, nact = int(free.sum()), a_act.shape[0]
    converged = False
    with np.errstate(all="raise"):
        try:
            for _ in range(max_iter):
                g, h = grad_hess(zf)
                gf, hf = g[free], h[np.ix_(free, free)]
                r_dual = gf - a_act.T @ nu
                r_prim = a_act @ zf[free] - b_act
                if max(np.max(np.abs(r_dual), initial=0.0), np.max(np.abs(r_prim), initial=0.0)) < 1e-13:
                    converged = True
                    break
                kkt = np.block([[hf, -a_act.T], [a_act, np.zeros((nact, nact))]])
                step = np.linalg.solve(kkt, -np.concatenate([r_dual, r_prim]))
                dz, dnu = step[:nfree], step[nfree:]
                t = 1.0
                while np.any(zf[free] + t * dz <= 0):
                    t *= 0.5
                    if t < 1e-6:
                        return _polish_failed("step leaves the cone")
                zf[free] += t * dz
                nu += t * dnu
        except (np.linalg.LinAlgError, FloatingPointError):
            return _polish_failed("singular KKT system")
    if not converged or np.any(nu < 0):
        return _polish_failed("no convergence or negative dual")
    # dual feasibility on variables held at zero
    g, _ = grad_hess(zf)
    full_nu = np.zeros(a_full.shape[0])
    for rows_g, v in zip(groups, nu):
        full_nu[rows_g] = v * flat_duals[rows_g] / flat_duals[rows_g].sum()
    # kinks at zero cannot be certified from partials; the conic solution
    # put them there and equilibrium verification re-checks maximality
    check = ~free
    check[list(kinks)] = False
    if np.any(g[check] - (a_full.T @ full_nu)[check] > 1e-9):
        return _polish_failed("dual infeasible at zero coordinates")

    out = []
    for j, m in enumerate(members):
        nb = len(m.partition)
        blk = zf[offsets[j]:offsets[j] + nb * dim].reshape(nb, dim)
        out.append(m.partition.expand(blk))
    return np.stack(out), full_nu.reshape(n_states, dim)
