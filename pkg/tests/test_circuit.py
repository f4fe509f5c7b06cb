import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import triangle
from toposwitch.circuit import (
    BridgeError, CircuitError, CurrentCircuit, Edge, balanced_bridge_circuit, circuit_from_view,
    congestion_report, random_circuit, removal_delta, run_law_corpus, solve_current_circuit, total_loss,
)
from toposwitch.dcopf import solve_dc_flow
from toposwitch.grid import Bus, Generator, Line, Network, Topology, apply_topology, full_view

UNIT = CurrentCircuit((1, 2), (Edge(1, 1, 2, 1.0),), {1: 1.0, 2: -1.0})
PAIR = CurrentCircuit((1, 2), (Edge(1, 1, 2, 1.0), Edge(2, 1, 2, 1.0)), {1: 1.0, 2: -1.0})
TRI = CurrentCircuit((1, 2, 3), (Edge(1, 1, 2, 1.0), Edge(2, 2, 3, 1.0), Edge(3, 1, 3, 1.0)), {1: 1.0, 3: -1.0})


def test_unit_resistor():
    sol = solve_current_circuit(UNIT)
    assert sol.currents[1] == pytest.approx(1.0)
    assert sol.potentials[1] - sol.potentials[2] == pytest.approx(1.0)
    assert total_loss(UNIT, sol) == pytest.approx(1.0)


def test_parallel_pair():
    sol = solve_current_circuit(PAIR)
    assert sol.currents == pytest.approx({1: 0.5, 2: 0.5})
    assert total_loss(PAIR, sol) == pytest.approx(0.5)


def test_triangle():
    sol = solve_current_circuit(TRI)
    assert sol.currents[3] == pytest.approx(2 / 3)
    assert sol.currents[1] == pytest.approx(1 / 3)
    assert total_loss(TRI, sol) == pytest.approx(2 / 3)


def test_parallel_pair_removal():
    d = removal_delta(PAIR, 2)
    assert d.delta_loss == pytest.approx(0.5)
    assert d.current_before == pytest.approx(0.5)
    assert d.voltage_after == pytest.approx(1.0)
    assert d.identity_check == pytest.approx(0.0, abs=1e-12)


def test_balanced_wheatstone_edge_carries_nothing():
    c = balanced_bridge_circuit()
    d = removal_delta(c, 4)
    assert abs(d.current_before) < 1e-12
    assert abs(d.delta_loss) <= 1e-10


def test_bridge_removal_is_refused():
    with pytest.raises(BridgeError):
        removal_delta(UNIT, 1)


def test_circuit_validation():
    with pytest.raises(CircuitError, match="sum"):
        CurrentCircuit((1, 2), (Edge(1, 1, 2, 1.0),), {1: 1.0})
    with pytest.raises(CircuitError, match="disconnected"):
        CurrentCircuit((1, 2, 3), (Edge(1, 1, 2, 1.0),), {})
    with pytest.raises(CircuitError, match="conductance"):
        CurrentCircuit((1, 2), (Edge(1, 1, 2, 0.0),), {})


def test_parallel_edges_are_never_bridges():
    assert PAIR.bridges() == frozenset()
    assert UNIT.bridges() == {1}


def test_congestion_report_arithmetic():
    net = Network((Bus(1), Bus(2, 1.0)), (Line(1, 1, 2, 1.0, 2.0),), (Generator(1, 1, 1.0, 0, 5),))
    rep = congestion_report(full_view(net), {1: 1.0})
    assert (rep.total_loss, rep.total_capacity, rep.margin) == (1.0, 4.0, 3.0)


def test_capacity_drops_by_removed_term():
    net = triangle(capacity=2.0)
    view = full_view(net)
    after = apply_topology(net, Topology.all_in(net).switched(off=[1]))
    zero = {ln.id: 0.0 for ln in net.lines}
    assert congestion_report(view, zero).total_capacity - congestion_report(after, zero).total_capacity == 4.0


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_circuit_and_grid_solvers_agree(seed):
    c = random_circuit(np.random.default_rng(seed), max_nodes=10)
    buses = tuple(Bus(n + 1) for n in c.nodes)
    lines = tuple(Line(e.id + 1, e.a + 1, e.b + 1, e.conductance, 1.0) for e in c.edges)
    net = Network(buses, lines, (Generator(1, 1, 1.0, 0, 1),), reference_bus=1)
    _, flows = solve_dc_flow(full_view(net), {n + 1: v for n, v in c.injections.items()})
    currents = solve_current_circuit(c).currents
    for e in c.edges:
        assert flows[e.id + 1] == pytest.approx(currents[e.id], rel=1e-9, abs=1e-12)


def test_view_to_circuit_keeps_in_service_lines_only():
    net = triangle()
    c = circuit_from_view(apply_topology(net, Topology.all_in(net).switched(off=[2])), {1: 1.0, 3: -1.0})
    assert [e.id for e in c.edges] == [1, 3]


@given(st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_loss_laws_on_random_circuits(seed):
    c = random_circuit(np.random.default_rng(seed), max_nodes=12)
    for e in c.edges:
        if e.id in c.bridges():
            continue
        d = removal_delta(c, e.id)
        assert d.delta_loss >= -1e-12 * d.loss_before
        ref = max(abs(d.delta_loss), abs(d.current_before * d.voltage_after), 1e-300)
        assert abs(d.identity_check) <= 1e-8 * ref or abs(d.current_before) < 1e-12


def test_small_corpus_report():
    rep = run_law_corpus(30, seed=3)
    assert rep.circuits == 30 and rep.removals > 30
    assert rep.zero_current_removals >= 5
    assert rep.max_decrease <= 1e-8 and rep.max_identity_error <= 1e-8
    assert rep.max_zero_current_delta <= 1e-10
