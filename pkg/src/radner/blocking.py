"""Veto oracles: private, Aubin, ex-post and fine blocking.

Strict improvement is decided through the max-min margin
``delta* = max min_i (V_i(y_i) - V_i(x_i))`` over admissible ``y``; a
coalition blocks when ``delta* > tol``. Solver failures surface as
:class:`~radner.programs.SolverIndeterminate`, never as "no block".
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .economy import Economy, EconomyError, UtilitySpec, as_allocation, expected_utility
from .information import Partition, is_measurable, join
from .parallel import pmap
from .programs import Member, SolverIndeterminate, blocking_program, member_of

__all__ = [
    "BlockingCertificate",
    "CoreVerdict",
    "ExPostWitness",
    "AubinSearchPolicy",
    "coalitions",
    "blocking_margin",
    "private_block",
    "private_core_membership",
    "privately_dominated",
    "aubin_block",
    "aubin_profiles",
    "ex_post_block",
    "fine_dominate",
    "validate_certificate",
    "certificate_problems",
]

PRIVATE = "private"
POOLED = "pooled"


def coalitions(n: int) -> list[tuple[int, ...]]:
    """Nonempty subsets of ``range(n)`` in bitmask order."""
    return [tuple(i for i in range(n) if mask >> i & 1) for mask in range(1, 2 ** n)]


@dataclass
class BlockingCertificate:
    """Coalition, participation weights and improving bundles.

    ``bundles[j]`` belongs to agent ``coalition[j]``. For ex-post
    certificates ``state`` is set and bundles have a single state row.
    ``slack`` is ``sum_j w_j (a_j - y_j)`` per state.
    """

    coalition: tuple[int, ...]
    weights: NDArray[np.float64]
    bundles: NDArray[np.float64]
    margins: NDArray[np.float64]
    slack: NDArray[np.float64]
    delta: float
    information: str = PRIVATE
    state: Optional[int] = None
    resources: Optional[NDArray[np.float64]] = None

    @property
    def min_margin(self) -> float:
        return float(self.margins.min())


@dataclass
class CoreVerdict:
    status: str  # "in-core" | "blocked" | "indeterminate"
    certificate: Optional[BlockingCertificate] = None
    results: list[tuple[tuple[int, ...], str, float]] = field(default_factory=list)

    @property
    def in_core(self) -> bool:
        return self.status == "in-core"


@dataclass
class ExPostWitness:
    coalition: tuple[int, ...]
    states: tuple[int, ...]
    certificates: dict[int, BlockingCertificate]


def _members(e: Economy, coalition: Sequence[int], information: str) -> list[Member]:
    if information == POOLED:
        j = join(e.partitions)
        return [member_of(e, i, j) for i in coalition]
    return [member_of(e, i) for i in coalition]


def _state_members(e: Economy, coalition: Sequence[int], s: int) -> list[Member]:
    one = Partition.trivial(1)
    return [Member(one, (e.agents[i].utilities[s],), (1.0,)) for i in coalition]


def _repair(bundles: NDArray, weights: NDArray, resources: NDArray) -> NDArray:
    """Shrink bundles uniformly until the weighted resource constraint holds
    exactly; uniform scaling keeps measurability."""
    bundles = np.maximum(bundles, 0.0)
    used = np.tensordot(weights, bundles, axes=1)
    over = used > resources
    if np.any(over):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(over, np.maximum(resources, 0.0) / used, 1.0)
        bundles = bundles * float(np.min(ratio))
        used = np.tensordot(weights, bundles, axes=1)
        # last-ulp excess after scaling
        while np.any(used > resources):
            bundles = bundles * (1.0 - 1e-15)
            used = np.tensordot(weights, bundles, axes=1)
    return bundles


def blocking_margin(e: Economy, coalition: Sequence[int], x: ArrayLike,
                    weights: Optional[ArrayLike] = None, information: str = PRIVATE,
                    ) -> tuple[float, NDArray[np.float64], NDArray[np.float64]]:
    """Optimal max-min margin ``delta*`` with maximizing bundles and the
    weighted resources they were allowed to use."""
    coalition = tuple(coalition)
    x = np.asarray(x, dtype=float)
    w = np.ones(len(coalition)) if weights is None else np.asarray(weights, dtype=float)
    members = _members(e, coalition, information)
    a = e.endowments[list(coalition)]
    resources = np.tensordot(w, a, axes=1)
    floors = np.array([expected_utility(e, i, x[i]) for i in coalition])
    prog = blocking_program(members, e.n_states, e.dimension)
    delta, bundles = prog.solve(w, resources, floors)
    return delta, bundles, resources


def _certify(e: Economy, coalition, weights, bundles, resources, x, delta, tol,
             information) -> BlockingCertificate:
    bundles = _repair(bundles, weights, resources)
    margins = np.array([expected_utility(e, i, bundles[j]) - expected_utility(e, i, x[i])
                        for j, i in enumerate(coalition)])
    if margins.min() <= tol / 2:
        raise SolverIndeterminate(
            f"solver margin {delta:.3g} did not survive re-evaluation ({margins.min():.3g})")
    slack = resources - np.tensordot(weights, bundles, axes=1)
    return BlockingCertificate(tuple(coalition), np.asarray(weights, dtype=float), bundles, margins,
                               slack, float(delta), information, resources=resources)


def private_block(e: Economy, coalition: Sequence[int], x: ArrayLike, tol: float = 1e-6,
                  weights: Optional[ArrayLike] = None,
                  information: str = PRIVATE) -> Optional[BlockingCertificate]:
    """Certificate that ``coalition`` privately blocks ``x``, or ``None``."""
    coalition = tuple(sorted(coalition))
    if not coalition or coalition[0] < 0 or coalition[-1] >= e.n:
        raise EconomyError(f"invalid coalition {coalition}")
    x = as_allocation(e, x)
    w = np.ones(len(coalition)) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w <= 0) or np.any(w > 1):
        raise EconomyError("weights must lie in (0, 1]")
    delta, bundles, resources = blocking_margin(e, coalition, x, w, information)
    if delta <= tol:
        return None
    return _certify(e, coalition, w, bundles, resources, x, delta, tol, information)


def privately_dominated(e: Economy, x: ArrayLike, tol: float = 1e-6) -> Optional[BlockingCertificate]:
    return private_block(e, tuple(range(e.n)), x, tol)


def private_core_membership(e: Economy, x: ArrayLike, tol: float = 1e-6,
                            threads: Optional[int] = None, exhaustive: bool = False) -> CoreVerdict:
    """Scan all ``2^n - 1`` coalitions.

    With ``exhaustive=False`` the scan stops at the first blocking
    coalition (bitmask order); a parallel scan still reports the same
    first certificate.
    """
    if e.n > 20:
        raise EconomyError("coalition enumeration is limited to n <= 20")
    x = as_allocation(e, x)

    def run(c):
        try:
            cert = private_block(e, c, x, tol)
        except SolverIndeterminate as exc:
            return c, "indeterminate", float("nan"), None, str(exc)
        if cert is None:
            return c, "none", float("nan"), None, ""
        return c, "blocks", cert.delta, cert, ""

    results = []
    first = None
    indeterminate = False
    coals = coalitions(e.n)
    if threads in (None, 1) and not exhaustive:
        stream = (run(c) for c in coals)
    else:
        stream = iter(pmap(run, coals, threads))
    for c, status, delta, cert, _ in stream:
        results.append((c, status, delta))
        if status == "indeterminate":
            indeterminate = True
        if cert is not None and first is None:
            first = cert
            if not exhaustive:
                break
    if first is not None:
        return CoreVerdict("blocked", first, results)
    if indeterminate:
        return CoreVerdict("indeterminate", None, results)
    return CoreVerdict("in-core", None, results)


@dataclass(frozen=True)
class AubinSearchPolicy:
    """Incomplete weight search: all-ones, near-complete profiles, a dyadic
    grid normalized to ``max = 1``, then coordinate refinement from the best
    profile seen. Refinement never pushes a weight below ``min_weight``."""

    depth: int = 4
    near_complete: tuple[float, ...] = (1 / 16, 1 / 4)
    refine: bool = True
    refine_steps: int = 6
    coalitions: str = "all"  # "all" | "grand"
    min_weight: float = 2.0 ** -10

    def describe(self) -> str:
        nc = ",".join(f"{d:g}" for d in self.near_complete)
        return (f"aubin(depth={self.depth}, near_complete=[{nc}], refine={self.refine}:"
                f"{self.refine_steps}, min_weight={self.min_weight:g}, "
                f"coalitions={self.coalitions})")


def aubin_profiles(size: int, policy: AubinSearchPolicy) -> list[tuple[float, ...]]:
    """Weight profiles in search order, deduplicated up to scaling."""
    if size == 1:
        return [(1.0,)]
    seen, out = set(), []

    def add(p):
        p = tuple(float(v) for v in p)
        m = max(p)
        key = tuple(round(v / m, 12) for v in p)
        if key not in seen:
            seen.add(key)
            out.append(tuple(v / m for v in p))

    add((1.0,) * size)
    for d in policy.near_complete:
        for p in itertools.product((1.0, 1.0 - d), repeat=size):
            add(p)
    levels = [2.0 ** -j for j in range(policy.depth + 1)]
    for p in itertools.product(levels, repeat=size):
        if max(p) == 1.0:
            add(p)
    return out


def _aubin_coalition(e: Economy, coalition, x, policy: AubinSearchPolicy, tol):
    best_delta, best_w = -math.inf, None
    for w in aubin_profiles(len(coalition), policy):
        w = np.array(w)
        delta, bundles, resources = blocking_margin(e, coalition, x, w)
        if delta > tol:
            return _certify(e, coalition, w, bundles, resources, x, delta, tol, PRIVATE)
        if delta > best_delta:
            best_delta, best_w = delta, w
    if not policy.refine or len(coalition) == 1:
        return None
    w = best_w.copy()
    step = 1.0
    for _ in range(policy.refine_steps):
        improved = True
        while improved:
            improved = False
            for j in range(len(coalition)):
                for f in (2.0 ** step, 2.0 ** -step):
                    trial = w.copy()
                    trial[j] *= f
                    trial = trial / trial.max()
                    if trial.min() < policy.min_weight:
                        continue
                    delta, bundles, resources = blocking_margin(e, coalition, x, trial)
                    if delta > tol:
                        return _certify(e, coalition, trial, bundles, resources, x, delta, tol,
                                        PRIVATE)
                    if delta > best_delta + 1e-12:
                        best_delta, w, improved = delta, trial, True
        step /= 2
    return None


def aubin_block(e: Economy, x: ArrayLike, policy: AubinSearchPolicy = AubinSearchPolicy(),
                tol: float = 1e-6) -> Optional[BlockingCertificate]:
    """Search for a coalition with weights ``alpha in (0, 1]`` that blocks
    ``x`` in the sense of Aubin. Sound, not complete: ``None`` means
    none-found under ``policy``."""
    x = as_allocation(e, x)
    grand = tuple(range(e.n))
    if policy.coalitions == "grand":
        order = [grand]
    else:
        # grand coalition first: it is the one the characterization concerns
        order = [grand] + [c for c in coalitions(e.n) if c != grand]
    for c in order:
        cert = _aubin_coalition(e, c, x, policy, tol)
        if cert is not None:
            return cert
    return None


def ex_post_block(e: Economy, x: ArrayLike, tol: float = 1e-6) -> Optional[ExPostWitness]:
    """First coalition (bitmask order) that blocks ``x`` state by state under
    complete information, with every state where it does."""
    x = as_allocation(e, x)
    a = e.endowments
    for c in coalitions(e.n):
        certs = {}
        for s in range(e.n_states):
            members = _state_members(e, c, s)
            resources = a[list(c), s].sum(axis=0)[None, :]
            floors = np.array([float(e.agents[i].utilities[s](x[i, s])) for i in c])
            prog = blocking_program(members, 1, e.dimension)
            w = np.ones(len(c))
            delta, bundles = prog.solve(w, resources, floors)
            if delta <= tol:
                continue
            bundles = _repair(bundles, w, resources)
            margins = np.array([float(e.agents[i].utilities[s](bundles[j, 0])) - floors[j]
                                for j, i in enumerate(c)])
            if margins.min() <= tol / 2:
                raise SolverIndeterminate("ex-post margin did not survive re-evaluation")
            slack = resources - bundles.sum(axis=0)
            certs[s] = BlockingCertificate(c, w, bundles, margins, slack, float(delta),
                                           "complete", state=s, resources=resources)
        if certs:
            return ExPostWitness(c, tuple(sorted(certs)), certs)
    return None


def fine_dominate(e: Economy, x: ArrayLike, weak: bool = False,
                  tol: float = 1e-6) -> Optional[BlockingCertificate]:
    """Grand-coalition domination with pooled-information alternatives."""
    pooled = join(e.partitions)
    parts = [pooled] * e.n if weak else None
    try:
        x = as_allocation(e, x, parts)
    except EconomyError as exc:
        raise EconomyError(f"fine domination precondition: {exc}") from None
    return private_block(e, tuple(range(e.n)), x, tol, information=POOLED)


def certificate_problems(e: Economy, x: ArrayLike, cert: BlockingCertificate,
                         tol: float = 1e-9) -> list[str]:
    """Independent re-validation; returns a list of violated conditions."""
    x = np.asarray(x, dtype=float)
    problems = []
    w = np.asarray(cert.weights, dtype=float)
    if np.any(w <= 0) or np.any(w > 1):
        problems.append("weights outside (0, 1]")
    a = e.endowments[list(cert.coalition)]
    if cert.state is None:
        parts = [join(e.partitions)] * e.n if cert.information == POOLED else e.partitions
        for j, i in enumerate(cert.coalition):
            if np.any(cert.bundles[j] < 0):
                problems.append(f"negative bundle for agent {i}")
            if not is_measurable(cert.bundles[j], parts[i]):
                problems.append(f"bundle of agent {i} not measurable")
            m = expected_utility(e, i, cert.bundles[j]) - expected_utility(e, i, x[i])
            if not m > 0:
                problems.append(f"agent {i} does not improve ({m:.3g})")
        resources = np.tensordot(w, a, axes=1)
    else:
        s = cert.state
        for j, i in enumerate(cert.coalition):
            u = e.agents[i].utilities[s]
            m = float(u(cert.bundles[j, 0])) - float(u(x[i, s]))
            if not m > 0:
                problems.append(f"agent {i} does not improve in state {s} ({m:.3g})")
        resources = np.tensordot(w, a[:, s:s + 1], axes=1)
    excess = np.tensordot(w, cert.bundles, axes=1) - resources
    if np.any(excess > tol):
        problems.append(f"weighted resources exceeded by {float(excess.max()):.3g}")
    return problems


def validate_certificate(e: Economy, x: ArrayLike, cert: BlockingCertificate,
                         tol: float = 1e-9) -> bool:
    return not certificate_problems(e, x, cert, tol)
