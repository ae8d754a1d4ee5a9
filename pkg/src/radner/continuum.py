"""Equal-treatment continuum economy and the Vind resizing construction.

The unit interval of agents is split into ``n`` type intervals of mass
``1/n``. A coalition is described by how much mass it takes from each
type; since all agents of a type are identical, integrals reduce to
mass-weighted sums over *cohorts* (a type, a mass, one random bundle).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .blocking import BlockingCertificate, private_block
from .economy import Economy, EconomyError, as_allocation, expected_utility
from .information import is_measurable

__all__ = [
    "ContinuumError",
    "CoalitionProfile",
    "StepAllocation",
    "Cohort",
    "ContinuumBlockingCertificate",
    "to_continuum",
    "from_continuum",
    "continuum_block",
    "lemma_shrink",
    "vind_resize",
    "resize_to_measure",
    "continuum_residuals",
]

MASS_SLACK = 1e-15
MAX_HALVINGS = 60


class ContinuumError(ValueError):
    pass


@dataclass(frozen=True)
class CoalitionProfile:
    """``masses[i] = mu(S ∩ I_i)``."""

    masses: tuple[float, ...]

    def __post_init__(self):
        m = tuple(float(v) for v in self.masses)
        object.__setattr__(self, "masses", m)
        n = len(m)
        if n == 0 or any(v < 0 or v > 1.0 / n + MASS_SLACK for v in m):
            raise ContinuumError("type masses must lie in [0, 1/n]")
        if not sum(m) > 0:
            raise ContinuumError("coalition has zero measure")

    @property
    def total(self) -> float:
        return float(sum(self.masses))

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.masses) if v > 0)

    @classmethod
    def uniform(cls, n: int) -> "CoalitionProfile":
        return cls((1.0 / n,) * n)


@dataclass(frozen=True)
class StepAllocation:
    """``f(t, .) = bundles[i]`` for every ``t`` in type interval ``I_i``."""

    bundles: NDArray[np.float64]

    @property
    def n(self) -> int:
        return self.bundles.shape[0]


def to_continuum(x: ArrayLike) -> StepAllocation:
    b = np.array(x, dtype=float)
    b.setflags(write=False)
    return StepAllocation(b)


def from_continuum(f: StepAllocation) -> NDArray[np.float64]:
    # x_i = n * int_{I_i} f = f_i since mu(I_i) = 1/n
    return np.array(f.bundles, dtype=float)


def _bundles(x) -> NDArray[np.float64]:
    return from_continuum(x) if isinstance(x, StepAllocation) else np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Cohort:
    type: int
    mass: float
    bundle: NDArray[np.float64]


@dataclass
class ContinuumBlockingCertificate:
    """Cohorts of a blocking coalition with per-cohort margins and the
    per-state surplus ``sum mass * (a_type - bundle)``. ``z`` is set on
    certificates produced by :func:`lemma_shrink`."""

    n: int
    cohorts: tuple[Cohort, ...]
    margins: NDArray[np.float64]
    surplus: NDArray[np.float64]
    z: Optional[NDArray[np.float64]] = None
    note: str = ""

    @property
    def profile(self) -> CoalitionProfile:
        m = [0.0] * self.n
        for c in self.cohorts:
            m[c.type] += c.mass
        return CoalitionProfile(tuple(min(v, 1.0 / self.n) for v in m))

    @property
    def mass(self) -> float:
        return float(sum(c.mass for c in self.cohorts))


def _evaluate(e: Economy, cohorts: Sequence[Cohort], x: NDArray):
    margins = np.array([expected_utility(e, c.type, c.bundle) - expected_utility(e, c.type, x[c.type])
                        for c in cohorts])
    a = e.endowments
    surplus = sum(c.mass * (a[c.type] - c.bundle) for c in cohorts)
    return margins, np.asarray(surplus, dtype=float)


def _make(e, cohorts, x, z=None, note="") -> ContinuumBlockingCertificate:
    cohorts = tuple(c for c in cohorts if c.mass > 0)
    margins, surplus = _evaluate(e, cohorts, x)
    return ContinuumBlockingCertificate(e.n, cohorts, margins, surplus, z, note)


def continuum_residuals(e: Economy, cert: ContinuumBlockingCertificate,
                        x: ArrayLike) -> dict[str, float]:
    """Independent re-evaluation: smallest margin, smallest surplus
    coordinate, largest per-type mass excess, measurability."""
    x = _bundles(x)
    margins, surplus = _evaluate(e, cert.cohorts, x)
    per_type = np.zeros(e.n)
    for c in cert.cohorts:
        per_type[c.type] += c.mass
    measurable = all(is_measurable(c.bundle, e.agents[c.type].partition) for c in cert.cohorts)
    return {
        "min_margin": float(margins.min()),
        "min_surplus": float(surplus.min()),
        "mass_excess": float(np.max(per_type - 1.0 / e.n)),
        "mass": float(sum(c.mass for c in cert.cohorts)),
        "measurable": float(measurable),
        "negative": float(min(c.bundle.min() for c in cert.cohorts)),
    }


def continuum_valid(e: Economy, cert: ContinuumBlockingCertificate, x: ArrayLike,
                    tol: float = 1e-9) -> bool:
    r = continuum_residuals(e, cert, x)
    return (r["min_margin"] > 0 and r["min_surplus"] >= -tol and r["mass_excess"] <= MASS_SLACK
            and r["measurable"] == 1.0 and r["negative"] >= 0)


def continuum_block(e: Economy, p: CoalitionProfile, x: Union[StepAllocation, ArrayLike],
                    tol: float = 1e-6) -> Optional[ContinuumBlockingCertificate]:
    """Types with positive mass must all improve; resources are
    mass-weighted. Equivalent to Aubin blocking with weights ``s / max s``."""
    if len(p.masses) != e.n:
        raise ContinuumError("profile length differs from the number of types")
    x = as_allocation(e, _bundles(x))
    active = p.active
    s = np.array([p.masses[i] for i in active])
    cert = private_block(e, active, x, tol, weights=s / s.max())
    if cert is None:
        return None
    cohorts = [Cohort(i, float(s[j]), cert.bundles[j]) for j, i in enumerate(active)]
    return _make(e, cohorts, x, note="continuum block")


def _per_type(cert: Union[BlockingCertificate, ContinuumBlockingCertificate], n: int):
    """Type masses and mass-weighted average bundles (the lemma's ``h_i``)."""
    if isinstance(cert, BlockingCertificate):
        if cert.state is not None:
            raise ContinuumError("ex-post certificates cannot be transported")
        return {i: (float(cert.weights[j]) / n, cert.bundles[j]) for j, i in enumerate(cert.coalition)}
    out = {}
    for c in cert.cohorts:
        m, b = out.get(c.type, (0.0, 0.0))
        out[c.type] = (m + c.mass, b + c.mass * c.bundle)
    return {i: (m, b / m) for i, (m, b) in out.items()}


def lemma_shrink(e: Economy, cert: Union[BlockingCertificate, ContinuumBlockingCertificate],
                 x: ArrayLike) -> ContinuumBlockingCertificate:
    """Average per type, then shrink bundles by ``1 - 2^-m`` for the first
    ``m`` keeping every margin positive, leaving a surplus of at least
    ``z = 2^-m * min_w sum_i s_i a_i(w) >> 0``."""
    x = as_allocation(e, _bundles(x))
    types = _per_type(cert, e.n)
    if not types:
        raise ContinuumError("empty certificate")
    a = e.endowments
    base = sum(s * a[i] for i, (s, _) in types.items())
    if not np.all(base.min(axis=0) > 0):
        raise ContinuumError("shrink needs a strictly positive coalition endowment in every state")
    for m in range(1, MAX_HALVINGS + 1):
        c = 2.0 ** -m
        cohorts = [Cohort(i, s, (1.0 - c) * h) for i, (s, h) in sorted(types.items())]
        margins, surplus = _evaluate(e, cohorts, x)
        if margins.min() > 0:
            z = c * base.min(axis=0)
            if np.any(surplus < z[None, :] * (1 - 1e-12) - 1e-15):
                raise ContinuumError("input certificate violates the weighted resource constraint")
            return ContinuumBlockingCertificate(e.n, tuple(cohorts), margins, surplus, z,
                                                f"shrink m={m}")
    raise ContinuumError("shrink failed: margins too thin for floating point")


def _check_resizable(cert: ContinuumBlockingCertificate, epsilon: float) -> None:
    if not 0 < epsilon < 1:
        raise ContinuumError("epsilon must lie in (0, 1)")
    if cert.z is None or not np.all(cert.z > 0):
        raise ContinuumError("resizing needs a shrunk certificate with z >> 0")


def _scale(e, cert, x, measure):
    d = measure / cert.mass
    cohorts = [Cohort(c.type, c.mass * d, c.bundle) for c in cert.cohorts]
    return _make(e, cohorts, x, cert.z, f"scaled by {d!r}")


def _extend(e, cert, x, epsilon):
    mu_a = cert.mass
    per_type = np.zeros(e.n)
    for c in cert.cohorts:
        per_type[c.type] += c.mass
    cohorts = [Cohort(c.type, c.mass, epsilon * c.bundle + (1 - epsilon) * x[c.type])
               for c in cert.cohorts]
    comp = [(i, 1.0 / e.n - per_type[i]) for i in range(e.n) if 1.0 / e.n - per_type[i] > 0]
    mu_b = (1 - epsilon) * sum(m for _, m in comp)
    if not mu_b > 0:
        return _make(e, cohorts, x, cert.z, "coalition already has full measure")
    bump = (epsilon * mu_a / mu_b) * cert.z
    cohorts += [Cohort(i, float((1 - epsilon) * m), x[i] + bump) for i, m in comp]
    return _make(e, cohorts, x, cert.z, f"extended with epsilon={epsilon!r}")


def vind_resize(e: Economy, cert: ContinuumBlockingCertificate, x: ArrayLike,
                epsilon: float) -> ContinuumBlockingCertificate:
    """The two-case construction in the proof's own parametrization.

    ``epsilon <= mu(A)`` keeps bundles and scales masses to total
    ``epsilon``. Otherwise ``A`` switches to ``eps*g + (1-eps)*f`` and a
    fraction ``1 - eps`` of every complement type joins with
    ``f + (eps*mu(A)/mu(B)) z``; total mass ``mu(A) + (1-eps)(1-mu(A))``.
    """
    _check_resizable(cert, epsilon)
    x = as_allocation(e, _bundles(x))
    if epsilon <= cert.mass:
        return _scale(e, cert, x, epsilon)
    return _extend(e, cert, x, epsilon)


def resize_to_measure(e: Economy, cert: ContinuumBlockingCertificate, x: ArrayLike,
                      measure: float) -> ContinuumBlockingCertificate:
    """Blocking coalition of total mass ``measure``: solves for the proof's
    ``epsilon`` so that the second case lands on the requested measure."""
    if not 0 < measure < 1:
        raise ContinuumError("requested measure must lie in (0, 1)")
    mu_a = cert.mass
    if measure <= mu_a:
        return vind_resize(e, cert, x, measure)
    if mu_a >= 1:
        raise ContinuumError("requested measure unreachable")
    # second case of the construction for whichever epsilon lands on measure
    eps = 1.0 - (measure - mu_a) / (1.0 - mu_a)
    _check_resizable(cert, eps)
    x = as_allocation(e, _bundles(x))
    out = _extend(e, cert, x, eps)
    # the closed form is exact in real arithmetic; absorb rounding in the
    # largest complement cohort so the mass matches to the last ulp
    drift = measure - out.mass
    if drift != 0.0 and len(out.cohorts) > len(cert.cohorts):
        cohorts = list(out.cohorts)
        k = max(range(len(cert.cohorts), len(cohorts)), key=lambda j: cohorts[j].mass)
        c = cohorts[k]
        cohorts[k] = Cohort(c.type, c.mass + drift, c.bundle)
        out = _make(e, cohorts, x, cert.z, out.note)
    return out
