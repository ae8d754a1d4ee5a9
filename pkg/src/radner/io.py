"""Economy files, certificate serialization, digests and the instance generator.

Files are JSON with a version tag, canonical key order and Python's
shortest round-trip float repr. Endowments and allocations are stored one
row per information block, so measurability holds by construction.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from .blocking import BlockingCertificate
from .continuum import Cohort, ContinuumBlockingCertificate
from .economy import Agent, Economy, EconomyError, UtilitySpec, audit_assumptions
from .information import InformationError, Partition, Prior, StateSpace

__all__ = [
    "FORMAT",
    "FormatError",
    "EconomyFile",
    "parse_economy",
    "load_economy",
    "dump_economy",
    "economy_to_dict",
    "canonical_json",
    "digest",
    "allocation_to_blocks",
    "allocation_from_blocks",
    "certificate_to_dict",
    "certificate_from_dict",
    "generate",
    "PROFILES",
]

FORMAT = "radner-economy/1"
PROFILES = ("strict", "complementary", "zero-wealth")

_TOP = {"format", "states", "dimension", "agents", "allocations", "prices"}
_AGENT = {"name", "partition", "endowment", "prior", "utilities"}
_UTIL = {"form", "weights", "rho", "shift"}


class FormatError(ValueError):
    """Unparseable or structurally invalid economy file."""


@dataclass
class EconomyFile:
    economy: Economy
    allocations: dict[str, NDArray[np.float64]] = field(default_factory=dict)
    prices: dict[str, NDArray[np.float64]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _num(v: float) -> Any:
    v = float(v)
    return int(v) if v.is_integer() and abs(v) < 2 ** 53 else v


def _rows(a) -> list:
    return [[_num(v) for v in row] for row in np.asarray(a, dtype=float)]


def allocation_to_blocks(e: Economy, x) -> list:
    x = np.asarray(x, dtype=float)
    return [_rows(ag.partition.restrict(x[i])) for i, ag in enumerate(e.agents)]


def allocation_from_blocks(e: Economy, data, where: str = "allocation") -> NDArray[np.float64]:
    if not isinstance(data, list) or len(data) != e.n:
        raise FormatError(f"{where}: expected one entry per agent")
    out = []
    for i, (ag, rows) in enumerate(zip(e.agents, data)):
        arr = _matrix(rows, len(ag.partition), e.dimension, f"{where}[{i}]")
        out.append(ag.partition.expand(arr))
    return np.stack(out)


def _matrix(rows, n_rows: int, n_cols: int, where: str) -> NDArray[np.float64]:
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: expected a numeric matrix") from None
    if arr.shape != (n_rows, n_cols):
        raise FormatError(f"{where}: expected shape ({n_rows}, {n_cols}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{where}: non-finite entry")
    return arr


def _utility_to_dict(u: UtilitySpec) -> dict:
    d = {"form": u.form, "weights": [_num(v) for v in u.weights]}
    if u.rho is not None:
        d["rho"] = _num(u.rho)
    if u.shift is not None and u.form == "log_linear":
        d["shift"] = _num(u.shift)
    return d


def economy_to_dict(e: Economy, allocations: Optional[dict] = None,
                    prices: Optional[dict] = None) -> dict:
    labels = list(e.states.labels)
    agents = []
    for ag in e.agents:
        agents.append({
            "name": ag.name,
            "partition": [[labels[s] for s in b] for b in ag.partition.blocks],
            "endowment": _rows(ag.partition.restrict(ag.endowment)),
            "prior": [_num(v) for v in ag.prior.weights],
            "utilities": [_utility_to_dict(u) for u in ag.utilities],
        })
    d: dict[str, Any] = {"format": FORMAT, "states": labels, "dimension": e.dimension,
                         "agents": agents}
    if allocations:
        d["allocations"] = {k: allocation_to_blocks(e, v) for k, v in allocations.items()}
    if prices:
        d["prices"] = {k: _rows(v) for k, v in prices.items()}
    return d


def dump_economy(e: Economy, allocations: Optional[dict] = None,
                 prices: Optional[dict] = None) -> str:
    return canonical_json(economy_to_dict(e, allocations, prices))


def digest(e: Economy) -> str:
    """sha256 of the canonical serialization of the economy alone."""
    return hashlib.sha256(dump_economy(e).encode()).hexdigest()


def _check_keys(obj, allowed: set, where: str, strict: bool, warnings: list) -> None:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected an object")
    extra = sorted(set(obj) - allowed)
    if extra:
        msg = f"{where}: unknown field(s) {', '.join(extra)}"
        if strict:
            raise FormatError(msg)
        warnings.append(msg)


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise FormatError(f"{where}: missing field '{key}'")
    return obj[key]


def _parse_utility(d, dim: int, where: str, strict: bool, warnings: list) -> UtilitySpec:
    _check_keys(d, _UTIL, where, strict, warnings)
    try:
        return UtilitySpec(_require(d, "form", where), tuple(_require(d, "weights", where)),
                           rho=d.get("rho"), shift=d.get("shift"))
    except (EconomyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def parse_economy(text: str, strict: bool = False) -> EconomyFile:
    """Parse an economy file; JSON syntax errors report line and column."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    warnings: list[str] = []
    _check_keys(data, _TOP, "file", strict, warnings)
    tag = _require(data, "format", "file")
    if tag != FORMAT:
        raise FormatError(f"file: unsupported format tag {tag!r}, expected {FORMAT!r}")
    try:
        states = StateSpace(tuple(_require(data, "states", "file")))
    except (InformationError, TypeError) as exc:
        raise FormatError(f"states: {exc}") from None
    dim = _require(data, "dimension", "file")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise FormatError("dimension: expected a positive integer")
    raw_agents = _require(data, "agents", "file")
    if not isinstance(raw_agents, list) or not raw_agents:
        raise FormatError("agents: expected a nonempty list")
    agents = []
    for i, ra in enumerate(raw_agents):
        where = f"agents[{i}]"
        _check_keys(ra, _AGENT, where, strict, warnings)
        try:
            part = Partition.from_labels(states, _require(ra, "partition", where))
            prior = Prior(tuple(_require(ra, "prior", where)))
        except (InformationError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{where}: {exc}") from None
        endow = part.expand(_matrix(_require(ra, "endowment", where), len(part), dim,
                                    f"{where}.endowment"))
        raw_u = _require(ra, "utilities", where)
        if not isinstance(raw_u, list) or len(raw_u) != len(states):
            raise FormatError(f"{where}.utilities: expected one entry per state")
        utils = tuple(_parse_utility(u, dim, f"{where}.utilities[{s}]", strict, warnings)
                      for s, u in enumerate(raw_u))
        try:
            agents.append(Agent(part, endow, utils, prior, str(ra.get("name", ""))))
        except EconomyError as exc:
            raise FormatError(f"{where}: {exc}") from None
    try:
        e = Economy(states, dim, tuple(agents))
    except EconomyError as exc:
        raise FormatError(str(exc)) from None
    allocations = {}
    for k, v in (data.get("allocations") or {}).items():
        allocations[k] = allocation_from_blocks(e, v, f"allocations.{k}")
    prices = {}
    for k, v in (data.get("prices") or {}).items():
        prices[k] = _matrix(v, e.n_states, dim, f"prices.{k}")
    return EconomyFile(e, allocations, prices, warnings)


def load_economy(path: str, strict: bool = False) -> EconomyFile:
    with open(path, encoding="utf-8") as fh:
        return parse_economy(fh.read(), strict)


def certificate_to_dict(cert) -> dict:
    if isinstance(cert, BlockingCertificate):
        d = {
            "kind": "blocking",
            "coalition": list(cert.coalition),
            "weights": [_num(v) for v in cert.weights],
            "bundles": [_rows(b) for b in cert.bundles],
            "margins": [_num(v) for v in cert.margins],
            "slack": _rows(cert.slack),
            "delta": _num(cert.delta),
            "information": cert.information,
        }
        if cert.state is not None:
            d["state"] = cert.state
        return d
    if isinstance(cert, ContinuumBlockingCertificate):
        d = {
            "kind": "continuum",
            "types": cert.n,
            "cohorts": [{"type": c.type, "mass": _num(c.mass), "bundle": _rows(c.bundle)}
                        for c in cert.cohorts],
            "margins": [_num(v) for v in cert.margins],
            "surplus": _rows(cert.surplus),
            "note": cert.note,
        }
        if cert.z is not None:
            d["z"] = [_num(v) for v in cert.z]
        return d
    raise TypeError(f"cannot serialize {type(cert).__name__}")


def certificate_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "blocking":
        return BlockingCertificate(
            tuple(d["coalition"]), np.array(d["weights"], dtype=float),
            np.array(d["bundles"], dtype=float), np.array(d["margins"], dtype=float),
            np.array(d["slack"], dtype=float), float(d["delta"]), d["information"],
            d.get("state"))
    if kind == "continuum":
        cohorts = tuple(Cohort(c["type"], float(c["mass"]), np.array(c["bundle"], dtype=float))
                        for c in d["cohorts"])
        z = np.array(d["z"], dtype=float) if "z" in d else None
        return ContinuumBlockingCertificate(int(d["types"]), cohorts,
                                            np.array(d["margins"], dtype=float),
                                            np.array(d["surplus"], dtype=float), z, d.get("note", ""))
    raise FormatError(f"unknown certificate kind {kind!r}")


def _random_partition(rng: np.random.Generator, n_states: int) -> Partition:
    labels = rng.integers(0, n_states, size=n_states)
    blocks: dict[int, list[int]] = {}
    for s, b in enumerate(labels):
        blocks.setdefault(int(b), []).append(s)
    return Partition(tuple(tuple(v) for v in blocks.values()))


def _random_utility(rng: np.random.Generator, dim: int) -> UtilitySpec:
    form = ("cobb_douglas", "ces", "log_linear")[int(rng.integers(0, 3))]
    w = np.round(rng.uniform(0.5, 2.0, size=dim), 3)
    if form == "cobb_douglas":
        w = np.round(w / w.sum(), 4)
        w[-1] = round(1.0 - float(w[:-1].sum()), 4)
        if w[-1] <= 0:
            w = np.full(dim, round(1.0 / dim, 4))
        return UtilitySpec(form, tuple(float(v) for v in w))
    if form == "ces":
        rho = float((-1.0, -0.5, 0.5)[int(rng.integers(0, 3))])
        return UtilitySpec(form, tuple(float(v) for v in w), rho=rho)
    return UtilitySpec(form, tuple(float(v) for v in w), shift=1.0)


def _random_prior(rng: np.random.Generator, n_states: int) -> Prior:
    w = np.round(rng.uniform(1.0, 3.0, size=n_states), 3)
    w = np.round(w / w.sum(), 6)
    w[-1] = 1.0 - float(w[:-1].sum())
    return Prior(tuple(float(v) for v in w))


def generate(seed: int, n: int = 2, dim: int = 2, n_states: int = 2,
             profile: str = "strict") -> Economy:
    """Seeded random economy whose audit passes the requested profile.

    strict         A4, A5-strong and the A7 sufficient condition hold.
    complementary  as strict, with partitions alternating discrete/trivial.
    zero-wealth    as strict, except the last agent has no endowment.
    Linear utilities are never drawn.
    """
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    if n < 1 or dim < 1 or n_states < 1:
        raise ValueError("n, l and states must be positive")
    rng = np.random.default_rng(seed)
    states = StateSpace(tuple(f"s{k + 1}" for k in range(n_states)))
    agents = []
    for i in range(n):
        if profile == "complementary":
            part = Partition.discrete(n_states) if i % 2 == 0 else Partition.trivial(n_states)
        else:
            part = _random_partition(rng, n_states)
        per_block = np.round(rng.uniform(0.5, 2.0, size=(len(part), dim)), 3)
        if profile == "zero-wealth" and i == n - 1 and n > 1:
            per_block = np.zeros_like(per_block)
        shared = rng.random() < 0.5
        base = _random_utility(rng, dim)
        utils = tuple(base if shared else _random_utility(rng, dim) for _ in range(n_states))
        agents.append(Agent(part, part.expand(per_block), utils, _random_prior(rng, n_states),
                            f"agent{i + 1}"))
    e = Economy(states, dim, tuple(agents))
    audit = audit_assumptions(e)
    if profile != "zero-wealth":
        assert audit.a4 and audit.a5_strong and audit.a7_sufficient
    return e
