"""Grid data model: buses, lines, generators, topologies and structural checks."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, fields
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class CaseError(ValueError):
    """Malformed or inconsistent case data."""


class TopologyError(ValueError):
    """Topology does not match the network it is applied to."""


IN_SERVICE = "in-service"
OUT_OF_SERVICE = "out-of-service"


@dataclass(frozen=True)
class Bus:
    id: int
    load: float = 0.0


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    cost: float
    p_min: float = 0.0
    p_max: float = 0.0


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float
    capacity: float
    in_service: bool = True


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    reference_bus: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        bus_ids = [b.id for b in self.buses]
        if len(set(bus_ids)) != len(bus_ids):
            raise CaseError("duplicate bus id")
        for b in self.buses:
            if not _finite(b.load) or b.load < 0:
                raise CaseError(f"bus {b.id}: load must be finite and non-negative")
        known = set(bus_ids)
        if len({ln.id for ln in self.lines}) != len(self.lines):
            raise CaseError("duplicate line id")
        for ln in self.lines:
            for end in (ln.from_bus, ln.to_bus):
                if end not in known:
                    raise CaseError(f"line {ln.id}: dangling reference to bus {end}")
            if ln.from_bus == ln.to_bus:
                raise CaseError(f"line {ln.id}: from_bus equals to_bus")
            if not ln.susceptance > 0:
                raise CaseError(f"line {ln.id}: susceptance must be positive")
            if not ln.capacity > 0:
                raise CaseError(f"line {ln.id}: capacity must be positive")
        if not self.generators:
            raise CaseError("network has no generator")
        if len({g.id for g in self.generators}) != len(self.generators):
            raise CaseError("duplicate generator id")
        for g in self.generators:
            if g.bus not in known:
                raise CaseError(f"generator {g.id}: dangling reference to bus {g.bus}")
            if not (0 <= g.p_min <= g.p_max) or not _finite(g.p_max):
                raise CaseError(f"generator {g.id}: need 0 <= p_min <= p_max < inf")
            if not _finite(g.cost) or g.cost < 0:
                raise CaseError(f"generator {g.id}: cost must be finite and non-negative")
        if self.reference_bus is None:
            object.__setattr__(self, "reference_bus", self.generators[0].bus)
        elif self.reference_bus not in known:
            raise CaseError(f"reference bus {self.reference_bus} does not exist")

    # caches hold mappingproxies, which do not pickle; rebuild them lazily instead
    def __getstate__(self):
        return {f.name: self.__dict__[f.name] for f in fields(self)}

    def __setstate__(self, state):
        self.__dict__.update(state)

    # -- lookups ---------------------------------------------------------
    @cached_property
    def bus_index(self) -> Mapping[int, int]:
        return MappingProxyType({b.id: i for i, b in enumerate(self.buses)})

    @cached_property
    def line_index(self) -> Mapping[int, int]:
        return MappingProxyType({ln.id: i for i, ln in enumerate(self.lines)})

    @property
    def line_ids(self) -> tuple[int, ...]:
        return tuple(ln.id for ln in self.lines)

    def line(self, line_id: int) -> Line:
        return self.lines[self.line_index[line_id]]

    @property
    def total_load(self) -> float:
        return sum(b.load for b in self.buses)

    @cached_property
    def terminal_buses(self) -> frozenset[int]:
        """Buses carrying load or hosting a generator."""
        return frozenset({b.id for b in self.buses if b.load > 0} | {g.bus for g in self.generators})

    @cached_property
    def arrays(self) -> "NetworkArrays":
        return NetworkArrays.build(self)

    # -- derived networks --------------------------------------------------
    def replace_costs(self, costs: Mapping[int, float]) -> "Network":
        gens = tuple(
            Generator(g.id, g.bus, float(costs.get(g.id, g.cost)), g.p_min, g.p_max)
            for g in self.generators
        )
        return Network(self.buses, self.lines, gens, self.reference_bus)

    def without_limits(self) -> "Network":
        lines = tuple(
            Line(ln.id, ln.from_bus, ln.to_bus, ln.susceptance, math.inf, ln.in_service)
            for ln in self.lines
        )
        return Network(self.buses, lines, self.generators, self.reference_bus)


@dataclass(frozen=True)
class NetworkArrays:
    """Dense/sparse numeric form of a network, indexed by position."""

    incidence: np.ndarray  # (L, N) with +1 at from, -1 at to
    frm: np.ndarray
    to: np.ndarray
    susceptance: np.ndarray
    capacity: np.ndarray
    load: np.ndarray
    gen_bus: np.ndarray
    cost: np.ndarray
    p_min: np.ndarray
    p_max: np.ndarray
    ref: int

    @classmethod
    def build(cls, net: Network) -> "NetworkArrays":
        idx = net.bus_index
        nl, nb = len(net.lines), len(net.buses)
        frm = np.array([idx[ln.from_bus] for ln in net.lines], dtype=int)
        to = np.array([idx[ln.to_bus] for ln in net.lines], dtype=int)
        inc = np.zeros((nl, nb))
        inc[np.arange(nl), frm] = 1.0
        inc[np.arange(nl), to] = -1.0
        return cls(
            incidence=inc,
            frm=frm,
            to=to,
            susceptance=np.array([ln.susceptance for ln in net.lines], dtype=float),
            capacity=np.array([ln.capacity for ln in net.lines], dtype=float),
            load=np.array([b.load for b in net.buses], dtype=float),
            gen_bus=np.array([idx[g.bus] for g in net.generators], dtype=int),
            cost=np.array([g.cost for g in net.generators], dtype=float),
            p_min=np.array([g.p_min for g in net.generators], dtype=float),
            p_max=np.array([g.p_max for g in net.generators], dtype=float),
            ref=idx[net.reference_bus],
        )


class Topology:
    """Immutable map from line id to in-service flag."""

    __slots__ = ("_statuses", "_key")

    def __init__(self, statuses: Mapping[int, bool]):
        items = tuple(sorted((int(k), bool(v)) for k, v in statuses.items()))
        self._statuses = MappingProxyType(dict(items))
        self._key = items

    @classmethod
    def all_in(cls, net: Network) -> "Topology":
        return cls({ln.id: True for ln in net.lines})

    @classmethod
    def initial(cls, net: Network) -> "Topology":
        """Topology carried by the case file itself."""
        return cls({ln.id: ln.in_service for ln in net.lines})

    @property
    def statuses(self) -> Mapping[int, bool]:
        return self._statuses

    @property
    def out_of_service(self) -> frozenset[int]:
        return frozenset(k for k, v in self._key if not v)

    @property
    def in_service(self) -> tuple[int, ...]:
        return tuple(k for k, v in self._key if v)

    def switched(self, off: Iterable[int] = (), on: Iterable[int] = ()) -> "Topology":
        st = dict(self._statuses)
        for k in off:
            if k not in st:
                raise TopologyError(f"unknown line {k}")
            st[k] = False
        for k in on:
            if k not in st:
                raise TopologyError(f"unknown line {k}")
            st[k] = True
        return Topology(st)

    def __getitem__(self, line_id: int) -> bool:
        return self._statuses[line_id]

    def __eq__(self, other):
        return isinstance(other, Topology) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        return f"Topology(out={sorted(self.out_of_service)})"


@dataclass(frozen=True, eq=False)
class NetworkView:
    """A network seen through a topology; out-of-service lines are invisible."""

    network: Network
    topology: Topology

    @cached_property
    def mask(self) -> np.ndarray:
        st = self.topology.statuses
        return np.array([st[ln.id] for ln in self.network.lines], dtype=bool)

    @cached_property
    def lines(self) -> tuple[Line, ...]:
        return tuple(ln for ln, on in zip(self.network.lines, self.mask) if on)

    @property
    def buses(self) -> tuple[Bus, ...]:
        return self.network.buses

    @property
    def generators(self) -> tuple[Generator, ...]:
        return self.network.generators

    @cached_property
    def degree(self) -> Mapping[int, int]:
        deg = {b.id: 0 for b in self.network.buses}
        for ln in self.lines:
            deg[ln.from_bus] += 1
            deg[ln.to_bus] += 1
        return MappingProxyType(deg)

    @cached_property
    def components(self) -> np.ndarray:
        """Component label per bus position."""
        a = self.network.arrays
        m = self.mask
        n = len(self.network.buses)
        g = coo_matrix((np.ones(m.sum()), (a.frm[m], a.to[m])), shape=(n, n))
        _, labels = connected_components(g, directed=False)
        return labels

    @property
    def connected(self) -> bool:
        return len(self.network.buses) <= 1 or bool((self.components == self.components[0]).all())

    @cached_property
    def bridges(self) -> frozenset[int]:
        """Ids of in-service lines whose removal splits a component."""
        mult: dict[tuple[int, int], list[int]] = {}
        for ln in self.lines:
            mult.setdefault(tuple(sorted((ln.from_bus, ln.to_bus))), []).append(ln.id)
        g = nx.Graph()
        g.add_nodes_from(b.id for b in self.network.buses)
        g.add_edges_from(mult)
        out = set()
        for u, v in nx.bridges(g):
            ids = mult[tuple(sorted((u, v)))]
            if len(ids) == 1:
                out.add(ids[0])
        return frozenset(out)


def apply_topology(net: Network, topo: Topology) -> NetworkView:
    ids = set(net.line_ids)
    got = set(topo.statuses)
    if ids != got:
        missing = sorted(ids - got)
        extra = sorted(got - ids)
        raise TopologyError(f"topology/line mismatch: missing {missing}, unknown {extra}")
    return NetworkView(net, topo)


def full_view(net: Network) -> NetworkView:
    return NetworkView(net, Topology.initial(net))


@dataclass(frozen=True)
class N1Check:
    connected: bool
    low_degree: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return self.connected and not self.low_degree

    @property
    def violations(self) -> tuple[int | str, ...]:
        head: tuple[int | str, ...] = () if self.connected else ("disconnected",)
        return head + self.low_degree

    def __bool__(self):
        return self.passed


def check_relaxed_n1(view: NetworkView) -> N1Check:
    """Connectivity plus degree >= 2 at every load or generator bus."""
    deg = view.degree
    low = tuple(sorted(b for b in view.network.terminal_buses if deg[b] < 2))
    return N1Check(connected=view.connected, low_degree=low)


# -- native JSON format ------------------------------------------------------

def _require(rec: dict, key: str, where: str):
    if key not in rec:
        raise CaseError(f"{where}: missing field '{key}'")
    return rec[key]


def _num(rec: dict, key: str, where: str) -> float:
    v = _require(rec, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise CaseError(f"{where}: field '{key}' must be a number")
    return float(v)


def _ident(rec: dict, key: str, where: str) -> int:
    v = _require(rec, key, where)
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        raise CaseError(f"{where}: field '{key}' must be a positive integer")
    return v


def network_from_dict(doc: Mapping) -> Network:
    if not isinstance(doc, Mapping):
        raise CaseError("case document must be an object")
    for key in ("buses", "lines", "generators"):
        if not isinstance(doc.get(key), list):
            raise CaseError(f"case document: '{key}' must be an array")
    buses = []
    for rec in doc["buses"]:
        where = f"bus {rec.get('id', '?')}"
        buses.append(Bus(_ident(rec, "id", where), _num(rec, "load_mw", where)))
    lines = []
    for rec in doc["lines"]:
        where = f"line {rec.get('id', '?')}"
        status = rec.get("status", IN_SERVICE)
        if status not in (IN_SERVICE, OUT_OF_SERVICE):
            raise CaseError(f"{where}: bad status {status!r}")
        lines.append(Line(
            _ident(rec, "id", where), _ident(rec, "from", where), _ident(rec, "to", where),
            _num(rec, "susceptance", where), _num(rec, "capacity_mw", where),
            status == IN_SERVICE,
        ))
    gens = []
    for rec in doc["generators"]:
        where = f"generator {rec.get('id', '?')}"
        gens.append(Generator(
            _ident(rec, "id", where), _ident(rec, "bus", where), _num(rec, "cost_per_mwh", where),
            _num(rec, "pmin_mw", where), _num(rec, "pmax_mw", where),
        ))
    ref = doc.get("reference_bus")
    if ref is not None and (isinstance(ref, bool) or not isinstance(ref, int)):
        raise CaseError("reference_bus must be an integer")
    return Network(tuple(buses), tuple(lines), tuple(gens), ref)


def parse_case(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"not a JSON document: {exc}") from None
    return network_from_dict(doc)


def network_to_dict(net: Network, topo: Topology | None = None) -> dict:
    st = topo.statuses if topo is not None else {ln.id: ln.in_service for ln in net.lines}
    return {
        "buses": [{"id": b.id, "load_mw": b.load} for b in net.buses],
        "lines": [
            {
                "id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
                "susceptance": ln.susceptance, "capacity_mw": ln.capacity,
                "status": IN_SERVICE if st[ln.id] else OUT_OF_SERVICE,
            }
            for ln in net.lines
        ],
        "generators": [
            {"id": g.id, "bus": g.bus, "cost_per_mwh": g.cost, "pmin_mw": g.p_min, "pmax_mw": g.p_max}
            for g in net.generators
        ],
        "reference_bus": net.reference_bus,
    }


def emit_case(net: Network, topo: Topology | None = None, indent: int | None = 1) -> str:
    return json.dumps(network_to_dict(net, topo), indent=indent)


def load_case(path) -> Network:
    """Read a native (.json) or legacy MATPOWER-style (.m) case from disk."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".m"):
        return import_legacy_case(text)
    return parse_case(text)


# -- legacy MATPOWER-style import --------------------------------------------

_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")


def _legacy_tables(text: str) -> tuple[dict[str, np.ndarray], dict[str, float]]:
    text = re.sub(r"%[^\n]*", "", text)
    tables = {}
    for name, body in _MATRIX_RE.findall(text):
        rows = [r.strip() for r in body.replace("\n", ";").split(";")]
        data = [[float(v) for v in re.split(r"[\s,]+", r) if v] for r in rows if r]
        width = max((len(r) for r in data), default=0)
        if any(len(r) != width for r in data):
            raise CaseError(f"table '{name}' has ragged rows")
        tables[name] = np.array(data, dtype=float).reshape(len(data), width)
    scalars = {k: float(v) for k, v in _SCALAR_RE.findall(text)}
    return tables, scalars


def import_legacy_case(text: str) -> Network:
    """Convert MATPOWER-style bus/branch/gen/gencost tables to a Network.

    Branch reactance x becomes susceptance baseMVA/x (MW per radian). A
    zero RATE_A means unlimited in the source; it is rejected because every
    line needs a finite capacity here. Only linear cost rows are accepted.
    """
    tables, scalars = _legacy_tables(text)
    for name in ("bus", "branch", "gen", "gencost"):
        if name not in tables:
            raise CaseError(f"legacy case: missing table '{name}'")
    base = scalars.get("baseMVA", 100.0)
    bus_t, br_t, gen_t, cost_t = (tables[k] for k in ("bus", "branch", "gen", "gencost"))
    if len(cost_t) < len(gen_t):
        raise CaseError("legacy case: fewer gencost rows than generators")

    buses = []
    ref = None
    for row in bus_t:
        bid = int(row[0])
        buses.append(Bus(bid, max(float(row[2]), 0.0)))
        if int(row[1]) == 3:
            ref = bid

    lines = []
    for k, row in enumerate(br_t, start=1):
        x = float(row[3])
        if x <= 0:
            raise CaseError(f"line {k}: non-positive reactance")
        rate = float(row[5])
        if rate <= 0:
            raise CaseError(f"line {k}: unlimited (zero) rating is not supported")
        status = bool(row[10]) if row.size > 10 else True
        lines.append(Line(k, int(row[0]), int(row[1]), base / x, rate, status))

    gens = []
    for k, (row, crow) in enumerate(zip(gen_t, cost_t), start=1):
        gens.append(Generator(k, int(row[0]), _linear_cost(crow, k), max(float(row[9]), 0.0), float(row[8])))
    return Network(tuple(buses), tuple(lines), tuple(gens), ref)


def _linear_cost(row: np.ndarray, gen_id: int) -> float:
    model = int(row[0])
    if model != 2:
        raise CaseError(f"generator {gen_id}: piecewise-linear cost rows are not supported")
    n = int(row[3])
    coeffs = row[4:4 + n]
    if n < 2:
        return 0.0
    higher = coeffs[:-2]
    if np.any(higher != 0):
        raise CaseError(f"generator {gen_id}: nonlinear cost (nonzero quadratic/higher coefficient)")
    return float(coeffs[-2])


def emit_legacy_case(net: Network, base_mva: float = 100.0) -> str:
    """Write a network as MATPOWER-style tables (linear costs, polynomial model)."""
    ref = net.reference_bus
    gen_buses = {g.bus for g in net.generators}
    out = ["function mpc = case", "mpc.version = '2';", f"mpc.baseMVA = {base_mva:g};", "mpc.bus = ["]
    for b in net.buses:
        btype = 3 if b.id == ref else (2 if b.id in gen_buses else 1)
        out.append(f"\t{b.id}\t{btype}\t{b.load!r}\t0\t0\t0\t1\t1\t0\t138\t1\t1.06\t0.94;")
    out += ["];", "mpc.gen = ["]
    for g in net.generators:
        out.append(f"\t{g.bus}\t0\t0\t0\t0\t1\t{base_mva:g}\t1\t{g.p_max!r}\t{g.p_min!r};")
    out += ["];", "mpc.branch = ["]
    for ln in net.lines:
        x = base_mva / ln.susceptance
        out.append(f"\t{ln.from_bus}\t{ln.to_bus}\t0\t{x!r}\t0\t{ln.capacity!r}\t0\t0\t0\t0\t{int(ln.in_service)}\t-360\t360;")
    out += ["];", "mpc.gencost = ["]
    for g in net.generators:
        out.append(f"\t2\t0\t0\t2\t{g.cost!r}\t0;")
    out.append("];")
    return "\n".join(out) + "\n"
