"""Discrete asymmetric-information exchange economies.

A random bundle is an ``(|Omega|, l)`` array; an allocation is an
``(n, |Omega|, l)`` array. Agent endowments and solver outputs are built
from per-block values, so measurability holds exactly rather than up to a
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .information import InformationError, Partition, Prior, StateSpace, is_measurable, join

__all__ = [
    "EconomyError",
    "UtilitySpec",
    "Agent",
    "Economy",
    "AuditReport",
    "UTILITY_FORMS",
    "as_allocation",
    "expected_utility",
    "expected_utilities",
    "is_feasible",
    "audit_assumptions",
    "perturbed_economy",
    "symmetric_information_economy",
]

UTILITY_FORMS = ("cobb_douglas", "ces", "linear", "log_linear")


class EconomyError(ValueError):
    pass


@dataclass(frozen=True)
class UtilitySpec:
    """State utility ``U(omega, .)`` from a concave, monotone family.

    cobb_douglas  prod_k x_k^a_k,               a_k > 0, sum a_k <= 1
    ces           (sum_k w_k x_k^rho)^(1/rho),  w_k > 0, rho < 1, rho != 0
    linear        sum_k w_k x_k,                w_k > 0
    log_linear    sum_k w_k log(x_k + shift),   w_k > 0, shift > 0
    """

    form: str
    weights: tuple[float, ...]
    rho: Optional[float] = None
    shift: Optional[float] = None

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if self.form not in UTILITY_FORMS:
            raise EconomyError(f"unknown utility form {self.form!r}")
        if len(w) == 0 or any(not v > 0 for v in w):
            raise EconomyError("utility parameters must be positive")
        if self.form == "cobb_douglas" and sum(w) > 1.0 + 1e-12:
            raise EconomyError("cobb_douglas exponents must sum to at most 1")
        if self.form == "ces":
            if self.rho is None or not self.rho < 1 or self.rho == 0:
                raise EconomyError("ces needs rho < 1, rho != 0")
            object.__setattr__(self, "rho", float(self.rho))
        elif self.rho is not None:
            raise EconomyError(f"{self.form} takes no rho")
        if self.form == "log_linear":
            shift = 1.0 if self.shift is None else float(self.shift)
            if not shift > 0:
                raise EconomyError("log_linear shift must be positive")
            object.__setattr__(self, "shift", shift)
        elif self.shift is not None:
            raise EconomyError(f"{self.form} takes no shift")

    @property
    def dimension(self) -> int:
        return len(self.weights)

    def __call__(self, x: ArrayLike) -> NDArray[np.float64]:
        """Evaluate on bundles along the last axis."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dimension:
            raise EconomyError("bundle dimension does not match utility")
        if np.any(x < 0):
            raise EconomyError("negative consumption")
        w = np.array(self.weights)
        if self.form == "linear":
            return x @ w
        if self.form == "log_linear":
            return np.log(x + self.shift) @ w
        if self.form == "cobb_douglas":
            with np.errstate(divide="ignore"):
                return np.exp(np.log(x) @ w)
        rho = self.rho
        with np.errstate(divide="ignore"):
            inner = (x ** rho) @ w
            if rho < 0:
                # any zero coordinate sends the aggregate to 0
                return np.where(np.isinf(inner), 0.0, inner ** (1.0 / rho))
            return inner ** (1.0 / rho)

    def gradient(self, x: ArrayLike) -> NDArray[np.float64]:
        """Gradient at a strictly positive bundle (last axis)."""
        x = np.asarray(x, dtype=float)
        w = np.array(self.weights)
        if self.form == "linear":
            return np.broadcast_to(w, x.shape).copy()
        if self.form == "log_linear":
            return w / (x + self.shift)
        u = self(x)[..., None]
        if self.form == "cobb_douglas":
            return w * u / x
        rho = self.rho
        inner = ((x ** rho) @ w)[..., None]
        return w * x ** (rho - 1) * u / inner

    def hessian(self, x: ArrayLike) -> NDArray[np.float64]:
        """Hessian at a single strictly positive bundle."""
        x = np.asarray(x, dtype=float)
        w = np.array(self.weights)
        if self.form == "linear":
            return np.zeros((x.size, x.size))
        if self.form == "log_linear":
            return np.diag(-w / (x + self.shift) ** 2)
        u = float(self(x))
        if self.form == "cobb_douglas":
            g = w / x
            return u * (np.outer(g, g) - np.diag(w / x ** 2))
        rho = self.rho
        inner = float((x ** rho) @ w)
        d = w * x ** (rho - 1)
        return (1 - rho) * (inner ** (1 / rho - 2) * np.outer(d, d)
                            - inner ** (1 / rho - 1) * np.diag(w * x ** (rho - 2)))

    def homogeneous(self) -> bool:
        return self.form in ("ces", "linear") or (
            self.form == "cobb_douglas" and abs(sum(self.weights) - 1.0) <= 1e-12)


@dataclass(frozen=True, eq=False)
class Agent:
    partition: Partition
    endowment: NDArray[np.float64]
    utilities: tuple[UtilitySpec, ...]
    prior: Prior
    name: str = ""

    def __post_init__(self):
        a = np.array(self.endowment, dtype=float)
        if a.ndim != 2:
            raise EconomyError("endowment must be a (states, l) array")
        if np.any(a < 0):
            raise EconomyError("endowment must lie in the positive cone")
        if a.shape[0] != self.partition.size or len(self.prior) != a.shape[0]:
            raise EconomyError("endowment, partition and prior disagree on |Omega|")
        if not is_measurable(a, self.partition):
            raise EconomyError("endowment is not measurable with respect to the partition")
        utils = tuple(self.utilities)
        if len(utils) != a.shape[0]:
            raise EconomyError("one utility spec per state is required")
        if any(u.dimension != a.shape[1] for u in utils):
            raise EconomyError("utility dimension does not match commodity space")
        a.setflags(write=False)
        object.__setattr__(self, "endowment", a)
        object.__setattr__(self, "utilities", utils)

    def utilities_measurable(self) -> bool:
        return all(len({self.utilities[s] for s in b}) == 1 for b in self.partition.blocks)


@dataclass(frozen=True, eq=False)
class Economy:
    states: StateSpace
    dimension: int
    agents: tuple[Agent, ...]

    def __post_init__(self):
        agents = tuple(self.agents)
        object.__setattr__(self, "agents", agents)
        if self.dimension < 1:
            raise EconomyError("commodity dimension must be >= 1")
        if len(agents) == 0:
            raise EconomyError("economy needs at least one agent")
        for ag in agents:
            if ag.endowment.shape != (len(self.states), self.dimension):
                raise EconomyError("agent endowment shape disagrees with the economy")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def endowments(self) -> NDArray[np.float64]:
        return np.stack([ag.endowment for ag in self.agents])

    @property
    def aggregate_endowment(self) -> NDArray[np.float64]:
        return self.endowments.sum(axis=0)

    @property
    def partitions(self) -> tuple[Partition, ...]:
        return tuple(ag.partition for ag in self.agents)

    def with_endowments(self, endowments: ArrayLike) -> "Economy":
        endowments = np.asarray(endowments, dtype=float)
        agents = tuple(replace(ag, endowment=endowments[i]) for i, ag in enumerate(self.agents))
        return Economy(self.states, self.dimension, agents)

    def with_partitions(self, partitions: Sequence[Partition]) -> "Economy":
        agents = tuple(replace(ag, partition=p) for ag, p in zip(self.agents, partitions))
        return Economy(self.states, self.dimension, agents)


def as_allocation(e: Economy, x: ArrayLike, partitions: Optional[Sequence[Partition]] = None,
                  tol: float = 0.0) -> NDArray[np.float64]:
    """Validate an allocation: shape, positive cone, measurability."""
    x = np.asarray(x, dtype=float)
    if x.shape != (e.n, e.n_states, e.dimension):
        raise EconomyError(f"allocation shape {x.shape} != {(e.n, e.n_states, e.dimension)}")
    if np.any(x < 0):
        raise EconomyError("allocation leaves the positive cone")
    parts = e.partitions if partitions is None else partitions
    for i, p in enumerate(parts):
        if not is_measurable(x[i], p, tol):
            raise EconomyError(f"bundle of agent {i} is not measurable")
    return x


def state_utilities(e: Economy, i: int, x: ArrayLike) -> NDArray[np.float64]:
    x = np.asarray(x, dtype=float)
    if x.shape != (e.n_states, e.dimension):
        raise EconomyError("random bundle shape does not match the economy")
    ag = e.agents[i]
    return np.array([ag.utilities[s](x[s]) for s in range(e.n_states)])


def expected_utility(e: Economy, i: int, x: ArrayLike) -> float:
    """Ex ante expected utility ``sum_w U_i(w, x(w)) q_i(w)``."""
    return float(state_utilities(e, i, x) @ e.agents[i].prior.array)


def expected_utilities(e: Economy, x: ArrayLike) -> NDArray[np.float64]:
    return np.array([expected_utility(e, i, x[i]) for i in range(e.n)])


def is_feasible(e: Economy, x: ArrayLike, tol: float = 0.0) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (e.n, e.n_states, e.dimension):
        raise EconomyError("allocation shape does not match the economy")
    return bool(np.all(x.sum(axis=0) <= e.aggregate_endowment + tol))


@dataclass(frozen=True)
class AuditReport:
    a1: bool
    a2: bool
    a3: bool
    a4: bool
    a4_prime: bool
    a5: bool
    a5_strong: bool
    a6: bool
    a7: str  # "sufficient condition holds" | "undecided"
    measurable_utilities: bool
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def a7_sufficient(self) -> bool:
        return self.a7 == A7_SUFFICIENT

    def as_dict(self) -> dict:
        return {
            "A1": self.a1, "A2": self.a2, "A3": self.a3,
            "A4": self.a4, "A4'": self.a4_prime,
            "A5": self.a5, "A5-strong": self.a5_strong,
            "A6": self.a6, "A7": self.a7,
            "measurable-utilities": self.measurable_utilities,
        }


A7_SUFFICIENT = "sufficient condition holds"
A7_UNDECIDED = "undecided"


def audit_assumptions(e: Economy) -> AuditReport:
    """Per-assumption verdicts.

    Continuity, monotonicity and concavity hold for every admissible
    ``UtilitySpec``. Irreducibility cannot be decided numerically; only a
    sufficient condition (monotone utilities and strictly positive
    endowments everywhere) is checked.
    """
    agg = e.aggregate_endowment
    endow = e.endowments
    inf_by_agent = endow.min(axis=1)  # (n, l): coordinatewise inf over states
    a4 = bool(np.all(agg > 0))
    a4p = bool(np.all(np.any(agg > 0, axis=1)))
    a5 = bool(np.all(np.any(inf_by_agent > 0, axis=1)))
    a5s = bool(np.all(inf_by_agent > 0))
    support = agg > 0
    a6 = bool(np.all(support == support[0]))
    a7 = A7_SUFFICIENT if bool(np.all(endow > 0)) else A7_UNDECIDED
    notes = []
    if any(u.form in ("cobb_douglas", "ces") for ag in e.agents for u in ag.utilities):
        notes.append("cobb_douglas/ces are strictly monotone on the interior of the cone only")
    return AuditReport(
        a1=True, a2=True, a3=True, a4=a4, a4_prime=a4p, a5=a5, a5_strong=a5s, a6=a6, a7=a7,
        measurable_utilities=all(ag.utilities_measurable() for ag in e.agents),
        notes=tuple(notes),
    )


def perturbed_economy(e: Economy, r: ArrayLike, x: ArrayLike) -> Economy:
    """``E(r, x)``: endowments ``r_i a_i + (1 - r_i) x_i``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (e.n,) or np.any(r < 0) or np.any(r > 1):
        raise EconomyError("r must lie in [0, 1]^n")
    x = as_allocation(e, x)
    r3 = r[:, None, None]
    new = r3 * e.endowments + (1.0 - r3) * x
    # exact endpoints: keep r = 1 and r = 0 bit-identical to a and x
    new = np.where(r3 == 1.0, e.endowments, np.where(r3 == 0.0, x, new))
    return e.with_endowments(new)


def symmetric_information_economy(e: Economy) -> Economy:
    """Every agent receives the pooled information ``join(F_1, ..., F_n)``."""
    j = join(e.partitions)
    return e.with_partitions([j] * e.n)
