"""Current-driven resistive circuits: I^2 R loss laws and the grid congestion margin."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import mpmath
import networkx as nx
import numpy as np

from .grid import NetworkView


class CircuitError(ValueError):
    pass


class BridgeError(CircuitError):
    """Removing the edge would split the circuit."""


@dataclass(frozen=True)
class Edge:
    id: int
    a: int
    b: int
    conductance: float


@dataclass(frozen=True)
class CurrentCircuit:
    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]
    injections: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        known = set(self.nodes)
        for e in self.edges:
            if e.a not in known or e.b not in known or e.a == e.b:
                raise CircuitError(f"edge {e.id}: bad endpoints")
            if not e.conductance > 0:
                raise CircuitError(f"edge {e.id}: conductance must be positive")
        total = sum(self.injections.values())
        scale = max(1.0, sum(abs(v) for v in self.injections.values()))
        if abs(total) > 1e-9 * scale:
            raise CircuitError(f"injections sum to {total:g}")
        if not self.connected:
            raise CircuitError("circuit is disconnected")

    @property
    def connected(self) -> bool:
        g = nx.MultiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from((e.a, e.b) for e in self.edges)
        return nx.is_connected(g) if self.nodes else True

    def without(self, edge_id: int) -> "CurrentCircuit":
        return _unchecked(self.nodes, tuple(e for e in self.edges if e.id != edge_id), self.injections)

    def bridges(self) -> frozenset[int]:
        """Edge ids whose removal disconnects; parallel edges never are."""
        count: dict[frozenset, list[int]] = {}
        for e in self.edges:
            count.setdefault(frozenset((e.a, e.b)), []).append(e.id)
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(tuple(k) for k in count)
        out = set()
        for a, b in nx.bridges(g):
            ids = count[frozenset((a, b))]
            if len(ids) == 1:
                out.add(ids[0])
        return frozenset(out)

    def is_bridge(self, edge_id: int) -> bool:
        return edge_id in self.bridges()


def _unchecked(nodes, edges, injections) -> CurrentCircuit:
    c = object.__new__(CurrentCircuit)
    object.__setattr__(c, "nodes", tuple(nodes))
    object.__setattr__(c, "edges", tuple(edges))
    object.__setattr__(c, "injections", injections)
    return c


@dataclass(frozen=True)
class CircuitSolution:
    potentials: Mapping[int, float]
    currents: Mapping[int, float]  # positive from a to b


def _laplacian(c: CurrentCircuit, zeros):
    idx = {n: i for i, n in enumerate(c.nodes)}
    lap = zeros(len(c.nodes), len(c.nodes))
    for e in c.edges:
        i, j = idx[e.a], idx[e.b]
        lap[i, i] += e.conductance
        lap[j, j] += e.conductance
        lap[i, j] -= e.conductance
        lap[j, i] -= e.conductance
    return idx, lap


def solve_current_circuit(c: CurrentCircuit) -> CircuitSolution:
    """Node potentials from the conductance Laplacian, first node grounded."""
    n = len(c.nodes)
    idx, lap = _laplacian(c, lambda r, k: np.zeros((r, k)))
    inj = np.zeros(n)
    for node, val in c.injections.items():
        inj[idx[node]] += val
    v = np.zeros(n)
    if n > 1:
        v[1:] = np.linalg.solve(lap[1:, 1:], inj[1:])
    pot = {node: float(v[idx[node]]) for node in c.nodes}
    cur = {e.id: e.conductance * (pot[e.a] - pot[e.b]) for e in c.edges}
    return CircuitSolution(pot, cur)


def total_loss(c: CurrentCircuit, sol: CircuitSolution) -> float:
    return float(sum(sol.currents[e.id] ** 2 / e.conductance for e in c.edges))


def _loss_stationary(c: CurrentCircuit, sol: CircuitSolution) -> float:
    """Loss as 2 inj.V - sum G dV^2.

    Same value as sum I^2/G at the exact solution, but stationary in V, so
    solver error enters only at second order. Differences of two such losses
    stay accurate down to much smaller |dP|/P.
    """
    pot = sol.potentials
    work = math.fsum(2.0 * val * pot[node] for node, val in c.injections.items())
    stored = math.fsum(e.conductance * (pot[e.a] - pot[e.b]) ** 2 for e in c.edges)
    return work - stored


def _loss_hp(c: CurrentCircuit, dps: int = 40) -> mpmath.mpf:
    """Loss at high precision, as injections . potentials (equal to sum I^2/G)."""
    with mpmath.workdps(dps):
        idx, lap = _laplacian(c, mpmath.zeros)
        n = len(c.nodes)
        if n == 1:
            return mpmath.mpf(0)
        inj = [mpmath.mpf(0)] * n
        for node, val in c.injections.items():
            inj[idx[node]] += val
        sub = lap[1:, 1:]
        v = mpmath.lu_solve(sub, mpmath.matrix(inj[1:]))
        return +mpmath.fsum(inj[k + 1] * v[k] for k in range(n - 1))


# below this |dP|/P the float64 difference of two losses is mostly rounding
_CANCELLATION = 1e-5


@dataclass(frozen=True)
class RemovalDelta:
    loss_before: float
    loss_after: float
    current_before: float  # I_mn on the removed edge
    voltage_after: float  # V'_mn across its endpoints once removed
    exact_delta: float | None = None  # set when the plain difference would cancel badly

    @property
    def delta_loss(self) -> float:
        if self.exact_delta is not None:
            return self.exact_delta
        return self.loss_after - self.loss_before

    @property
    def identity_check(self) -> float:
        """|dP| - |I_mn V'_mn|; zero when the removal identity holds."""
        return abs(self.delta_loss) - abs(self.current_before * self.voltage_after)


def removal_delta(c: CurrentCircuit, edge_id: int, check_bridge: bool = True) -> RemovalDelta:
    if check_bridge and c.is_bridge(edge_id):
        raise BridgeError(f"edge {edge_id} is a bridge")
    e = next(e for e in c.edges if e.id == edge_id)
    before = solve_current_circuit(c)
    reduced = c.without(edge_id)
    after = solve_current_circuit(reduced)
    p0, p1 = _loss_stationary(c, before), _loss_stationary(reduced, after)
    delta = None
    if abs(p1 - p0) < _CANCELLATION * p0:
        hp0, hp1 = _loss_hp(c), _loss_hp(reduced)
        p0, p1, delta = float(hp0), float(hp1), float(hp1 - hp0)
    return RemovalDelta(
        loss_before=p0,
        loss_after=p1,
        current_before=before.currents[edge_id],
        voltage_after=after.potentials[e.a] - after.potentials[e.b],
        exact_delta=delta,
    )


def circuit_from_view(view: NetworkView, injections: Mapping[int, float]) -> CurrentCircuit:
    """The grid read as a circuit: susceptance -> conductance, MW -> amperes."""
    return CurrentCircuit(
        tuple(b.id for b in view.buses),
        tuple(Edge(ln.id, ln.from_bus, ln.to_bus, ln.susceptance) for ln in view.lines),
        dict(injections),
    )


@dataclass(frozen=True)
class CongestionReport:
    total_loss: float
    total_capacity: float

    @property
    def margin(self) -> float:
        return self.total_capacity - self.total_loss


def congestion_report(view: NetworkView, flows: Mapping[int, float]) -> CongestionReport:
    """Sum of f^2/b (actual) and capacity^2/b (limit) over in-service lines."""
    loss = sum(flows[ln.id] ** 2 / ln.susceptance for ln in view.lines)
    cap = sum(ln.capacity ** 2 / ln.susceptance for ln in view.lines)
    return CongestionReport(float(loss), float(cap))


# -- random corpus for the loss laws ------------------------------------------

def random_circuit(rng: np.random.Generator, max_nodes: int = 20, edge_prob: float = 0.35,
                   g_range: tuple[float, float] = (0.1, 10.0)) -> CurrentCircuit:
    """Connected G(n, p) circuit (rejection sampled) with balanced random injections."""
    while True:
        n = int(rng.integers(2, max_nodes + 1))
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < edge_prob:
                    edges.append((i, j))
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(edges)
        if nx.is_connected(g):
            break
    cond = rng.uniform(*g_range, size=len(edges))
    inj = rng.normal(size=n)
    inj -= inj.mean()
    return CurrentCircuit(
        tuple(range(n)),
        tuple(Edge(k, a, b, float(gv)) for k, ((a, b), gv) in enumerate(zip(edges, cond))),
        {i: float(v) for i, v in enumerate(inj)},
    )


@dataclass
class LawReport:
    circuits: int = 0
    removals: int = 0
    zero_current_removals: int = 0
    max_decrease: float = 0.0  # worst relative loss decrease (Theorem 1 violation)
    max_identity_error: float = 0.0  # worst relative mismatch in |dP| = |I V'|
    max_zero_current_delta: float = 0.0

    def summary(self) -> str:
        return (
            f"circuits={self.circuits} removals={self.removals} "
            f"zero_current={self.zero_current_removals} "
            f"max_rel_decrease={self.max_decrease:.3e} "
            f"max_rel_identity_error={self.max_identity_error:.3e} "
            f"max_zero_current_dP={self.max_zero_current_delta:.3e}"
        )


ZERO_CURRENT = 1e-12


def check_removal(c: CurrentCircuit, edge_id: int, report: LawReport) -> None:
    d = removal_delta(c, edge_id, check_bridge=False)
    report.removals += 1
    scale = max(d.loss_before, 1e-300)
    report.max_decrease = max(report.max_decrease, max(0.0, -d.delta_loss) / scale)
    if abs(d.current_before) <= ZERO_CURRENT:
        report.zero_current_removals += 1
        report.max_zero_current_delta = max(report.max_zero_current_delta, abs(d.delta_loss))
        return
    ref = max(abs(d.delta_loss), abs(d.current_before * d.voltage_after))
    report.max_identity_error = max(report.max_identity_error, abs(d.identity_check) / ref)


def balanced_bridge_circuit(g_top: float = 1.0, g_bottom: float = 2.0, g_bridge: float = 3.0) -> CurrentCircuit:
    """Wheatstone arrangement with equal arm ratios: the bridge edge carries no current."""
    return CurrentCircuit(
        (0, 1, 2, 3),
        (Edge(0, 0, 1, g_top), Edge(1, 1, 3, g_bottom), Edge(2, 0, 2, g_top),
         Edge(3, 2, 3, g_bottom), Edge(4, 1, 2, g_bridge)),
        {0: 1.0, 3: -1.0},
    )


def run_law_corpus(trials: int, seed: int, max_nodes: int = 20) -> LawReport:
    rng = np.random.default_rng(seed)
    report = LawReport()
    for _ in range(trials):
        c = random_circuit(rng, max_nodes)
        report.circuits += 1
        bridges = c.bridges()
        for e in c.edges:
            if e.id not in bridges:
                check_removal(c, e.id, report)
    # a few exactly balanced bridges so the zero-current branch is exercised
    for k in range(1, 6):
        c = balanced_bridge_circuit(float(k), 2.0 * k, 0.5 * k)
        check_removal(c, 4, report)
    return report
