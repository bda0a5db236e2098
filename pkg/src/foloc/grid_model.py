"""Grid topology model: buses, lines, susceptance-weighted Laplacian.

A grid is a connected graph of generator and load buses coupled by effective
line susceptances B_ij = |V_i| |V_j| b_ij.  Generators carry rotor dynamics
(inertia, damping); loads respond instantaneously and are later eliminated by
network reduction.  Everything downstream of this module works in a single
canonical bus order: generators ascending by id, then loads ascending by id.

Case files are JSON::

    {"name": str,
     "buses": [{"id": int, "kind": "generator"|"load", "power": float,
                "voltage_mag": float?, "inertia": float?, "damping": float?}],
     "lines": [{"from": int, "to": int, "susceptance": float}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CaseParseError, CaseValidationError

GENERATOR = "generator"
LOAD = "load"


@dataclass(frozen=True)
class Bus:
    """A single bus.

    Attributes:
        id: unique integer label.
        kind: "generator" (has rotor dynamics) or "load" (algebraic response;
            also models inverter-based resources without inertia).
        power: nominal injection, p.u. (positive generation, negative consumption).
        voltage_mag: voltage magnitude |V|, p.u.; assumed constant in time.
        inertia: rotor inertia m, s^2 (generators only, optional until simulation).
        damping: primary-control damping d, s (generators only, optional).
    """

    id: int
    kind: str
    power: float
    voltage_mag: float = 1.0
    inertia: float | None = None
    damping: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (GENERATOR, LOAD):
            raise CaseValidationError(
                f"bus {self.id}: unknown kind {self.kind!r} (expected 'generator' or 'load')"
            )
        if self.voltage_mag <= 0.0:
            raise CaseValidationError(f"bus {self.id}: voltage_mag must be > 0")
        if self.kind == LOAD and (self.inertia is not None or self.damping is not None):
            raise CaseValidationError(
                f"bus {self.id}: load buses must not carry inertia or damping"
            )
        if self.kind == GENERATOR:
            if self.inertia is not None and self.inertia <= 0.0:
                raise CaseValidationError(f"bus {self.id}: inertia must be > 0")
            if self.damping is not None and self.damping <= 0.0:
                raise CaseValidationError(f"bus {self.id}: damping must be > 0")


@dataclass(frozen=True)
class Line:
    """An undirected transmission line with effective susceptance b > 0, p.u."""

    from_bus: int
    to_bus: int
    susceptance: float

    def __post_init__(self) -> None:
        if self.from_bus == self.to_bus:
            raise CaseValidationError(f"line {self.from_bus}-{self.to_bus}: self-loop")
        if self.susceptance <= 0.0:
            raise CaseValidationError(
                f"line {self.from_bus}-{self.to_bus}: susceptance must be > 0"
            )

    @property
    def key(self) -> tuple[int, int]:
        """Unordered endpoint pair, normalized."""
        a, b = self.from_bus, self.to_bus
        return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class GridCase:
    """A validated grid: connected, unique bus ids, at least one generator.

    Immutable after construction; safe to share across workers.
    """

    name: str
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def gen_ids(self) -> list[int]:
        """Generator bus ids, ascending (first half of the canonical order)."""
        return sorted(b.id for b in self.buses if b.kind == GENERATOR)

    @property
    def load_ids(self) -> list[int]:
        """Load bus ids, ascending (second half of the canonical order)."""
        return sorted(b.id for b in self.buses if b.kind == LOAD)

    @property
    def bus_order(self) -> list[int]:
        """Canonical bus order: generators ascending, then loads ascending."""
        return self.gen_ids + self.load_ids

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise CaseValidationError(f"unknown bus {bus_id}")


@dataclass
class LaplacianBlocks:
    """Susceptance-weighted graph Laplacian and its generator/load partition.

    `full` is indexed by the canonical bus order; `gg`, `gl`, `lg`, `ll` are its
    four sub-blocks (generator rows/cols first).  All arrays are read-only.
    """

    full: np.ndarray
    gg: np.ndarray
    gl: np.ndarray
    lg: np.ndarray
    ll: np.ndarray
    gen_ids: list[int] = field(default_factory=list)
    load_ids: list[int] = field(default_factory=list)

    @property
    def bus_order(self) -> list[int]:
        return list(self.gen_ids) + list(self.load_ids)


def _validate(case: GridCase) -> None:
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise CaseValidationError(f"duplicate bus id(s): {dup}")
    if not any(b.kind == GENERATOR for b in case.buses):
        raise CaseValidationError("no generator bus")
    id_set = set(ids)
    seen: set[tuple[int, int]] = set()
    for ln in case.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in id_set:
                raise CaseValidationError(
                    f"line {ln.from_bus}-{ln.to_bus}: unknown bus {end}"
                )
        if ln.key in seen:
            raise CaseValidationError(
                f"duplicate line between buses {ln.key[0]} and {ln.key[1]}"
            )
        seen.add(ln.key)
    # connectivity by BFS over the undirected line graph
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for ln in case.lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    start = ids[0]
    reached = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in reached:
                    reached.add(v)
                    nxt.append(v)
        frontier = nxt
    if reached != id_set:
        missing = sorted(id_set - reached)
        raise CaseValidationError(f"disconnected grid: buses {missing} unreachable")


def load_case(path: str | Path) -> GridCase:
    """Parse and validate a case file.

    Raises:
        CaseParseError: unreadable/ill-formed JSON or wrong schema, with
            line/field context where available.
        CaseValidationError: structurally invalid grid (named invariant).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CaseParseError(f"{path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise CaseParseError(f"{path}: top level must be a JSON object")
    for key in ("buses", "lines"):
        if key not in raw or not isinstance(raw[key], list):
            raise CaseParseError(f"{path}: missing or non-list field {key!r}")

    buses = []
    for i, entry in enumerate(raw["buses"]):
        try:
            buses.append(
                Bus(
                    id=int(entry["id"]),
                    kind=str(entry["kind"]),
                    power=float(entry["power"]),
                    voltage_mag=float(entry.get("voltage_mag", 1.0)),
                    inertia=None if entry.get("inertia") is None else float(entry["inertia"]),
                    damping=None if entry.get("damping") is None else float(entry["damping"]),
                )
            )
        except KeyError as exc:
            raise CaseParseError(f"{path}: buses[{i}]: missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise CaseParseError(f"{path}: buses[{i}]: {exc}") from exc
    lines = []
    for i, entry in enumerate(raw["lines"]):
        try:
            lines.append(
                Line(
                    from_bus=int(entry["from"]),
                    to_bus=int(entry["to"]),
                    susceptance=float(entry["susceptance"]),
                )
            )
        except KeyError as exc:
            raise CaseParseError(f"{path}: lines[{i}]: missing field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise CaseParseError(f"{path}: lines[{i}]: {exc}") from exc

    return GridCase(name=str(raw.get("name", path.stem)), buses=tuple(buses), lines=tuple(lines))


def build_laplacian(case: GridCase) -> LaplacianBlocks:
    """Assemble the coupling Laplacian L and partition it.

    Off-diagonal: L_ij = -|V_i||V_j| b_ij for each line (i, j); diagonal entries
    make every row sum to zero.  Rows/columns follow the canonical bus order, so
    the generator block comes first.
    """
    order = case.bus_order
    pos = {bus_id: k for k, bus_id in enumerate(order)}
    vmag = {b.id: b.voltage_mag for b in case.buses}
    n = len(order)
    full = np.zeros((n, n))
    for ln in case.lines:
        w = vmag[ln.from_bus] * vmag[ln.to_bus] * ln.susceptance
        i, j = pos[ln.from_bus], pos[ln.to_bus]
        full[i, j] -= w
        full[j, i] -= w
        full[i, i] += w
        full[j, j] += w
    ng = len(case.gen_ids)
    blocks = LaplacianBlocks(
        full=full,
        gg=full[:ng, :ng],
        gl=full[:ng, ng:],
        lg=full[ng:, :ng],
        ll=full[ng:, ng:],
        gen_ids=case.gen_ids,
        load_ids=case.load_ids,
    )
    for arr in (blocks.full, blocks.gg, blocks.gl, blocks.lg, blocks.ll):
        arr.setflags(write=False)
    return blocks
