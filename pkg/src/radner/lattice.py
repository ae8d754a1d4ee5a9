"""Finite-dimensional Riesz space kernel.

Commodity space is R^l with the coordinatewise order. In finite dimension
order units, quasi-interior points and interior points of the positive cone
all coincide (strictly positive vectors); the Banach-lattice distinctions
survive only as metadata in :func:`classify_space`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "LatticeError",
    "LatticePair",
    "SpaceDescriptor",
    "SpaceClassification",
    "as_bundle",
    "lattice_ops",
    "abs_part",
    "pos_part",
    "neg_part",
    "am_norm",
    "ideal_membership",
    "quasi_interior_test",
    "rk_sup",
    "rk_inf",
    "rk_sup_bruteforce",
    "riesz_decompose",
    "classify_space",
    "chart_rows",
    "format_classification",
]


class LatticeError(ValueError):
    """Raised on malformed lattice input (dimension mismatch, bad unit, ...)."""


def as_bundle(x: ArrayLike, name: str = "x") -> NDArray[np.float64]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise LatticeError(f"{name} must be a nonempty 1-d vector, got shape {arr.shape}")
    return arr


def _pair(x: ArrayLike, y: ArrayLike) -> tuple[NDArray, NDArray]:
    x = as_bundle(x, "x")
    y = as_bundle(y, "y")
    if x.shape != y.shape:
        raise LatticeError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x, y


class LatticePair(NamedTuple):
    sup: NDArray[np.float64]
    inf: NDArray[np.float64]


def lattice_ops(x: ArrayLike, y: ArrayLike) -> LatticePair:
    """Coordinatewise supremum and infimum of two bundles."""
    x, y = _pair(x, y)
    return LatticePair(np.maximum(x, y), np.minimum(x, y))


def abs_part(x: ArrayLike) -> NDArray[np.float64]:
    x = as_bundle(x)
    return np.maximum(x, -x)


def pos_part(x: ArrayLike) -> NDArray[np.float64]:
    x = as_bundle(x)
    return np.maximum(x, 0.0)


def neg_part(x: ArrayLike) -> NDArray[np.float64]:
    x = as_bundle(x)
    return np.maximum(-x, 0.0)


def am_norm(y: ArrayLike, unit: ArrayLike) -> float:
    """Order-unit norm ``inf{lam > 0 : |y| <= lam * unit}``."""
    y, unit = _pair(y, unit)
    if np.any(unit <= 0):
        raise LatticeError("not an order unit: every coordinate must be > 0")
    return float(np.max(np.abs(y) / unit))


def ideal_membership(y: ArrayLike, x: ArrayLike) -> bool:
    """True iff ``y`` lies in the principal ideal generated by ``x``.

    In R^l the ideal generated by ``x`` is the set of vectors supported on
    ``supp |x|``, so the test is a support inclusion.
    """
    y, x = _pair(y, x)
    return bool(np.all((y == 0) | (x != 0)))


def quasi_interior_test(x: ArrayLike) -> bool:
    # strict positivity, no epsilon: callers threshold beforehand if needed
    x = as_bundle(x)
    return bool(np.all(x > 0))


def _rk_check(f: ArrayLike, g: ArrayLike, x: ArrayLike):
    f, g = _pair(f, g)
    f, x = _pair(f, x)
    if np.any(x < 0):
        raise LatticeError("x must lie in the positive cone")
    return f, g, x


def rk_sup(f: ArrayLike, g: ArrayLike, x: ArrayLike) -> float:
    """Value of ``f v g`` at a positive ``x``.

    ``sup{<f, y> + <g, z> : y, z >= 0, y + z = x}`` is attained by sending
    each coordinate wholly to the larger price.
    """
    f, g, x = _rk_check(f, g, x)
    return float(np.dot(np.maximum(f, g), x))


def rk_inf(f: ArrayLike, g: ArrayLike, x: ArrayLike) -> float:
    """Value of ``f ^ g`` at a positive ``x``."""
    f, g, x = _rk_check(f, g, x)
    return float(np.dot(np.minimum(f, g), x))


def rk_sup_bruteforce(f: ArrayLike, g: ArrayLike, x: ArrayLike, step: float = 1e-3,
                      max_points: int = 2_000_000) -> float:
    """Exhaustive split search for :func:`rk_sup` (test oracle).

    Enumerates splits ``y = t * x`` with ``t`` on the product grid
    ``{0, step, ..., 1}^l``. When that grid would exceed ``max_points`` the
    step is coarsened; the endpoints 0 and 1 are always on the grid.
    """
    f, g, x = _rk_check(f, g, x)
    dim = x.size
    per_axis = int(round(1.0 / step)) + 1
    while per_axis ** dim > max_points and per_axis > 2:
        per_axis = (per_axis - 1) // 2 + 1
    ticks = np.linspace(0.0, 1.0, per_axis)
    grid = np.array(list(itertools.product(ticks, repeat=dim)))
    y = grid * x
    values = y @ f + (x - y) @ g
    return float(values.max())


def riesz_decompose(z: Sequence[ArrayLike], y: Sequence[ArrayLike],
                    floor: Optional[ArrayLike] = None) -> list[NDArray[np.float64]]:
    """Split ``sum(z)`` into pieces dominated by the ``y_i``.

    Returns ``zh`` with ``sum(zh) == sum(z)`` and ``zh[i] <= y[i]``. Each
    coordinate is water-filled in index order: everybody starts at
    ``floor`` and the remaining mass is handed out up to the caps ``y_i``.
    A negative remainder (total below ``m * floor``) is charged to the last
    piece. ``floor`` defaults to ``min(0, inf_i y_i)``.
    """
    if len(z) == 0 or len(z) != len(y):
        raise LatticeError("z and y must be nonempty and of equal length")
    zs = np.array([as_bundle(v, "z") for v in z])
    ys = np.array([as_bundle(v, "y") for v in y])
    if zs.shape != ys.shape:
        raise LatticeError("dimension mismatch between z and y")
    if floor is None:
        fl = np.minimum(ys.min(axis=0), 0.0)
    else:
        fl = as_bundle(floor, "floor")
        if fl.shape[0] != ys.shape[1]:
            raise LatticeError("dimension mismatch for floor")
    total = zs.sum(axis=0)
    if np.any(total > ys.sum(axis=0)) or np.any(fl > ys):
        raise LatticeError("decomposition infeasible")

    m = zs.shape[0]
    out = np.tile(fl, (m, 1))
    remaining = total - m * fl
    for k in range(ys.shape[1]):
        r = remaining[k]
        if r < 0:
            out[-1, k] += r
            continue
        for i in range(m):
            take = min(r, ys[i, k] - fl[k])
            out[i, k] += take
            r -= take
            if r <= 0:
                break
        else:
            if r > 0:
                # rounding residue; capacity is guaranteed by the precondition
                out[-1, k] += r
    return [row for row in out]


SPACE_FAMILIES = ("Rn", "ell_infinity", "L_infinity", "C_K", "ell_p", "L_p", "M_K_uncountable")


@dataclass(frozen=True)
class SpaceDescriptor:
    family: str
    p: Optional[float] = None

    def __post_init__(self):
        if self.family not in SPACE_FAMILIES:
            raise LatticeError(f"unknown space family {self.family!r}")
        if self.family in ("ell_p", "L_p"):
            if self.p is None or not (1.0 <= self.p < np.inf):
                raise LatticeError(f"{self.family} needs a parameter 1 <= p < inf")
        elif self.p is not None:
            raise LatticeError(f"{self.family} takes no parameter")


@dataclass(frozen=True)
class SpaceClassification:
    has_interior_point: bool
    has_quasi_interior_point: bool
    applicable_theorems: frozenset
    applicable_remarks: frozenset

    def __post_init__(self):
        if self.has_interior_point and not self.has_quasi_interior_point:
            raise LatticeError("interior point without quasi-interior point")


_INTERIOR = SpaceClassification(True, True, frozenset({1, 4, 5, 6}), frozenset())
_QUASI = SpaceClassification(False, True, frozenset({2, 4}), frozenset({4, 6}))
_NEITHER = SpaceClassification(False, False, frozenset({3, 4}), frozenset({4, 6}))

_CHART = {
    "Rn": _INTERIOR,
    "ell_infinity": _INTERIOR,
    "L_infinity": _INTERIOR,
    "C_K": _INTERIOR,
    "ell_p": _QUASI,
    "L_p": _QUASI,
    "M_K_uncountable": _NEITHER,
}


def classify_space(d: SpaceDescriptor) -> SpaceClassification:
    return _CHART[d.family]


def chart_rows() -> list[tuple[str, SpaceClassification]]:
    return [(fam, _CHART[fam]) for fam in SPACE_FAMILIES]


def format_classification(c: SpaceClassification) -> str:
    def yn(b):
        return "yes" if b else "no"

    parts = [
        f"interior: {yn(c.has_interior_point)}",
        f"quasi-interior: {yn(c.has_quasi_interior_point)}",
        "theorems " + ",".join(str(t) for t in sorted(c.applicable_theorems)),
    ]
    if c.applicable_remarks:
        parts.append("remarks " + ",".join(str(r) for r in sorted(c.applicable_remarks)))
    return ", ".join(parts)
