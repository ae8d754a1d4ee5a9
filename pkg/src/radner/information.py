"""Finite state spaces, information partitions and priors."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "InformationError",
    "StateSpace",
    "Partition",
    "Prior",
    "is_measurable",
    "join",
    "project_measurable",
]


class InformationError(ValueError):
    pass


@dataclass(frozen=True)
class StateSpace:
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.labels) == 0:
            raise InformationError("state space must contain at least one state")
        if len(set(self.labels)) != len(self.labels):
            raise InformationError("state labels must be unique")

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InformationError(f"unknown state {label!r}") from None


@dataclass(frozen=True)
class Partition:
    """Partition of ``{0, ..., size-1}`` stored in canonical form.

    Blocks are sorted tuples, ordered by their smallest element, so two
    partitions are equal iff they are the same partition.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = [tuple(sorted(int(s) for s in b)) for b in self.blocks]
        if any(len(b) == 0 for b in blocks):
            raise InformationError("partition blocks must be nonempty")
        blocks.sort(key=lambda b: b[0])
        seen = [s for b in blocks for s in b]
        if sorted(seen) != list(range(len(seen))):
            raise InformationError(f"blocks {blocks} do not partition 0..{len(seen) - 1}")
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def discrete(cls, size: int) -> "Partition":
        return cls(tuple((s,) for s in range(size)))

    @classmethod
    def trivial(cls, size: int) -> "Partition":
        return cls((tuple(range(size)),))

    @classmethod
    def from_labels(cls, space: StateSpace, blocks: Iterable[Iterable[str]]) -> "Partition":
        return cls(tuple(tuple(space.index(s) for s in b) for b in blocks))

    @property
    def size(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    @cached_property
    def block_of(self) -> NDArray[np.intp]:
        out = np.empty(self.size, dtype=np.intp)
        for k, b in enumerate(self.blocks):
            out[list(b)] = k
        return out

    @cached_property
    def indicator(self) -> NDArray[np.float64]:
        """State-by-block 0/1 matrix; ``indicator @ per_block`` expands to states."""
        m = np.zeros((self.size, len(self.blocks)))
        m[np.arange(self.size), self.block_of] = 1.0
        return m

    def expand(self, per_block: ArrayLike) -> NDArray[np.float64]:
        return np.asarray(per_block, dtype=float)[self.block_of]

    def restrict(self, x: ArrayLike) -> NDArray[np.float64]:
        """Per-block values of a measurable function (first state of each block)."""
        x = np.asarray(x, dtype=float)
        return x[[b[0] for b in self.blocks]]

    def refines(self, other: "Partition") -> bool:
        return all(len({other.block_of[s] for s in b}) == 1 for b in self.blocks)


@dataclass(frozen=True)
class Prior:
    weights: tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) == 0 or any(not v > 0 for v in w):
            raise InformationError("prior weights must be positive")
        if abs(sum(w) - 1.0) > 1e-12:
            raise InformationError(f"prior weights sum to {sum(w)!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, size: int) -> "Prior":
        return cls((1.0 / size,) * size)

    @property
    def array(self) -> NDArray[np.float64]:
        return np.array(self.weights)

    def __len__(self) -> int:
        return len(self.weights)


def _check_states(x: NDArray, p: Partition) -> None:
    if x.shape[0] != p.size:
        raise InformationError(f"random bundle has {x.shape[0]} states, partition has {p.size}")


def is_measurable(x: ArrayLike, p: Partition, tol: float = 0.0) -> bool:
    """True iff ``x`` varies by at most ``tol`` (sup norm) within each block."""
    x = np.asarray(x, dtype=float)
    _check_states(x, p)
    for b in p.blocks:
        vals = x[list(b)]
        if np.max(np.abs(vals - vals[0])) > tol:
            return False
    return True


def join(ps: Sequence[Partition]) -> Partition:
    """Coarsest common refinement of the given partitions."""
    if len(ps) == 0:
        raise InformationError("join of an empty family is undefined")
    size = ps[0].size
    if any(p.size != size for p in ps):
        raise InformationError("partitions live on different state spaces")
    keys: dict[tuple[int, ...], list[int]] = {}
    for s in range(size):
        keys.setdefault(tuple(int(p.block_of[s]) for p in ps), []).append(s)
    return Partition(tuple(tuple(b) for b in keys.values()))


def project_measurable(x: ArrayLike, p: Partition, q: Prior) -> NDArray[np.float64]:
    """Prior-weighted block average, i.e. conditional expectation onto ``p``."""
    x = np.asarray(x, dtype=float)
    _check_states(x, p)
    w = q.array
    out = np.empty_like(x)
    for b in p.blocks:
        idx = list(b)
        if np.all(x[idx] == x[idx[0]]):
            out[idx] = x[idx[0]]
            continue
        wb = w[idx] / w[idx].sum()
        avg = np.tensordot(wb, x[idx], axes=1)
        out[idx] = avg
    return out
