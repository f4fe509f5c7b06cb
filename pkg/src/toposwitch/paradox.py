"""Paradox certificates and the constrained search that rebuilds small example grids.

The search enumerates line layouts (which bus pair each labelled line joins)
in lexicographic order and, per layout, integer capacities by depth-first
branch and bound:

* every target operating point fixes the dispatch and the topology, hence
  the line flows, so each capacity has a hard lower bound;
* optimal cost is non-increasing in every capacity, so solving with the
  undecided capacities at their upper and lower bounds brackets the cost of
  every completion and prunes subtrees that miss a target;
* once a line never binds in any LP solved inside a subtree (and no LP there
  was infeasible) larger capacities for it reproduce the same LPs, so its
  loop stops early.

Leaves are checked by actually running the heuristics. None of the pruning
rules discards a matching instance, so "not found" is a proof over the space.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

from .dcopf import DispatchSolution, solve_dc_flow, solve_dcopf
from .grid import (
    Bus, Generator, Line, Network, Topology, apply_topology, full_view, network_from_dict, network_to_dict,
)
from .switching import (
    RECONNECT, REMOVE, BRUTE_FORCE_MAX_LINES, HeuristicConfig, HeuristicError, MoveSet, brute_force_optimum,
    iter_topologies, run_heuristic,
)

NON_COMMUTATIVITY = "non_commutativity"
NON_MONOTONICITY = "non_monotonicity"
NON_CONSISTENCY_A = "non_consistency_A"
NON_CONSISTENCY_B = "non_consistency_B"
KINDS = (NON_COMMUTATIVITY, NON_MONOTONICITY, NON_CONSISTENCY_A, NON_CONSISTENCY_B)

BIND_TOL = 1e-7


# -- targets -----------------------------------------------------------------

@dataclass(frozen=True)
class OperatingPoint:
    cost: float
    dispatch: Mapping[int, float]  # generator id -> MW; omitted generators must sit at 0
    cost_tol: float = 1e-4
    mw_tol: float = 1e-4

    def matches(self, sol: DispatchSolution) -> bool:
        if not sol.feasible or abs(sol.total_cost - self.cost) > self.cost_tol:
            return False
        return all(abs(p - self.dispatch.get(g, 0.0)) <= self.mw_tol for g, p in sol.gen_output.items())


@dataclass(frozen=True)
class TraceTarget:
    """A heuristic run (or, with config None, the initial solve) and where it must land."""

    point: OperatingPoint
    config: HeuristicConfig | None = None
    actions: tuple[tuple[str, tuple[int, ...]], ...] = ()

    def topology(self, net: Network) -> Topology:
        topo = Topology.initial(net)
        for kind, ids in self.actions:
            topo = topo.switched(off=ids) if kind == REMOVE else topo.switched(on=ids)
        return topo

    def check(self, net: Network) -> bool:
        if self.config is None:
            return self.point.matches(solve_dcopf(apply_topology(net, Topology.initial(net))))
        tr = run_heuristic(net, self.config)
        got = tuple((a.kind, a.lines) for a in tr.actions)
        return got == self.actions and self.point.matches(tr.final_solution)


@dataclass(frozen=True)
class Template:
    """Bus/generator skeleton plus the rules that generate candidate line sets."""

    name: str
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    n_lines: int
    targets: tuple[TraceTarget, ...]
    susceptance: float = 1.0
    susceptances: Mapping[int, float] = field(default_factory=dict)  # per-label overrides
    fixed_capacities: Mapping[int, float] = field(default_factory=dict)
    capacity_range: tuple[int, int] = (1, 10)
    pairs: tuple[tuple[int, int], ...] | None = None
    pinned_pairs: Mapping[int, tuple[int, int]] = field(default_factory=dict)
    min_lines: int | None = None
    reference_bus: int | None = None

    @property
    def bus_pairs(self) -> tuple[tuple[int, int], ...]:
        if self.pairs is not None:
            return self.pairs
        return tuple(itertools.combinations([b.id for b in self.buses], 2))

    def build(self, layout: Sequence[int], caps: Mapping[int, float]) -> Network:
        pairs = self.bus_pairs
        lines = []
        for k, p in enumerate(layout, start=1):
            a, b = pairs[p]
            lines.append(Line(k, a, b, self.susceptances.get(k, self.susceptance), float(caps[k])))
        return Network(self.buses, tuple(lines), self.generators, self.reference_bus)


# -- search -------------------------------------------------------------------

@dataclass
class SearchStats:
    layouts: int = 0
    lp_solves: int = 0
    leaves: int = 0


def _binding(net: Network, sol: DispatchSolution) -> set[int]:
    out = set()
    for lid, f in sol.flows.items():
        cap = net.line(lid).capacity
        if math.isfinite(cap) and abs(f) >= cap - BIND_TOL:
            out.add(lid)
    return out


def _trace_binding(net: Network, targets: Iterable[TraceTarget]) -> tuple[bool, set[int]]:
    """Re-solve every LP a leaf's checks touch and report binding lines."""
    seen: set[Topology] = set()
    bound: set[int] = set()
    clean = True
    for t in targets:
        if t.config is None:
            topos = [Topology.initial(net)]
        else:
            topos = list(_trial_topologies(net, t.config))
        for topo in topos:
            if topo in seen:
                continue
            seen.add(topo)
            sol = solve_dcopf(apply_topology(net, topo))
            if not sol.feasible:
                clean = False
            else:
                bound |= _binding(net, sol)
    return clean, bound


def _trial_topologies(net: Network, cfg: HeuristicConfig) -> Iterator[Topology]:
    from .switching import _moves, _apply, admissible
    tr = run_heuristic(net, cfg)
    topo = Topology.initial(net)
    yield topo
    states = [topo]
    for a in tr.actions:
        topo = _apply(topo, a.kind, a.lines)
        states.append(topo)
    for st in states:
        view = apply_topology(net, st)
        for kind, ids in _moves(view, cfg.move_set, cfg.enforce_n1):
            yield _apply(st, kind, ids)


def search_instance(template: Template, max_layouts: int | None = None,
                    stats: SearchStats | None = None) -> Network | None:
    """First network (layouts, then capacities, lexicographically) meeting every target."""
    stats = stats if stats is not None else SearchStats()
    first = template.min_lines or template.n_lines
    for n in range(first, template.n_lines + 1):
        tpl = replace(template, n_lines=n)
        for layout in _layouts(tpl):
            if max_layouts is not None and stats.layouts >= max_layouts:
                return None
            stats.layouts += 1
            net = _search_layout(tpl, layout, stats)
            if net is not None:
                return net
    return None


def _layouts(tpl: Template) -> Iterator[tuple[int, ...]]:
    pairs = tpl.bus_pairs
    choices = []
    for k in range(1, tpl.n_lines + 1):
        if k in tpl.pinned_pairs:
            choices.append((pairs.index(tuple(tpl.pinned_pairs[k])),))
        else:
            choices.append(range(len(pairs)))
    return itertools.product(*choices)


def _search_layout(tpl: Template, layout: Sequence[int], stats: SearchStats) -> Network | None:
    lo, hi = tpl.capacity_range
    labels = list(range(1, tpl.n_lines + 1))
    free = [k for k in labels if k not in tpl.fixed_capacities]
    probe = tpl.build(layout, {k: tpl.fixed_capacities.get(k, hi) for k in labels})

    lower = {k: lo for k in free}
    for t in tpl.targets:
        # heuristic moves never disconnect, so every state along the trace must be connected
        topo = Topology.initial(probe)
        for kind, ids in t.actions:
            topo = topo.switched(off=ids) if kind == REMOVE else topo.switched(on=ids)
            if not apply_topology(probe, topo).connected:
                return None
        view = apply_topology(probe, t.topology(probe))
        if not view.connected:
            return None
        inj = {b.id: -b.load for b in probe.buses}
        for g in probe.generators:
            inj[g.bus] += t.point.dispatch.get(g.id, 0.0)
        _, flows = solve_dc_flow(view, inj)
        for lid, f in flows.items():
            need = abs(f) - t.point.mw_tol
            if lid in lower:
                lower[lid] = max(lower[lid], math.ceil(need - 1e-9))
            elif abs(f) > tpl.fixed_capacities[lid] + t.point.mw_tol:
                return None
    if any(lower[k] > hi for k in free):
        return None

    target_topos = [(t, t.topology(probe)) for t in tpl.targets]

    def cost(caps: Mapping[int, float], topo: Topology) -> tuple[float, set[int], bool]:
        net = tpl.build(layout, caps)
        sol = solve_dcopf(apply_topology(net, topo))
        stats.lp_solves += 1
        if not sol.feasible:
            return math.inf, set(), False
        return sol.total_cost, _binding(net, sol), True

    def dfs(i: int, chosen: dict[int, float]) -> tuple[Network | None, set[int], bool]:
        """Returns (match, lines binding anywhere in the subtree, all LPs feasible)."""
        if i == len(free):
            stats.leaves += 1
            caps = {**tpl.fixed_capacities, **chosen}
            net = tpl.build(layout, caps)
            if all(t.check(net) for t in tpl.targets):
                return net, set(), True
            clean, bound = _trace_binding(net, tpl.targets)
            return None, bound, clean
        k = free[i]
        sub_bound: set[int] = set()
        sub_clean = True
        for v in range(lower[k], hi + 1):
            chosen[k] = v
            rest = free[i + 1:]
            bound_here: set[int] = set()
            clean_here = True
            pruned = False
            for t, topo in target_topos:
                c_min, b1, ok1 = cost({**tpl.fixed_capacities, **chosen, **{r: hi for r in rest}}, topo)
                bound_here |= b1
                clean_here &= ok1
                if c_min > t.point.cost + t.point.cost_tol:
                    pruned = True
                    break
                c_max, b2, ok2 = cost({**tpl.fixed_capacities, **chosen, **{r: lower[r] for r in rest}}, topo)
                bound_here |= b2
                clean_here &= ok2
                if c_max < t.point.cost - t.point.cost_tol:
                    pruned = True
                    break
            if not pruned:
                found, b, c = dfs(i + 1, chosen)
                if found is not None:
                    return found, set(), True
                bound_here |= b
                clean_here &= c
            sub_bound |= bound_here
            sub_clean &= clean_here
            if clean_here and k not in bound_here:
                break
        del chosen[k]
        return None, sub_bound, sub_clean

    found, _, _ = dfs(0, {})
    return found


# -- certificates -------------------------------------------------------------

@dataclass(frozen=True)
class ParadoxCertificate:
    kind: str
    instance: Network
    evidence: Mapping
    fallback: bool = False

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "fallback": self.fallback,
            "instance": network_to_dict(self.instance),
            "evidence": _jsonable(self.evidence),
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "ParadoxCertificate":
        doc = json.loads(text)
        return cls(doc["kind"], network_from_dict(doc["instance"]), doc["evidence"], doc.get("fallback", False))

    def replay(self) -> bool:
        """Recompute the certificate from scratch and compare evidence."""
        again = CERTIFIERS[self.kind](self.instance, self.evidence.get("enforce_n1", True))
        return again is not None and _jsonable(again.evidence) == _jsonable(self.evidence)


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=list))


def _best_removal(net: Network, k: int, enforce_n1: bool):
    """Cheapest admissible removal of exactly k lines (ties: lexicographic)."""
    base = Topology.initial(net)
    best = None
    for topo in iter_topologies(net, base, enforce_n1):
        off = tuple(sorted(topo.out_of_service - base.out_of_service))
        if len(off) != k:
            continue
        sol = solve_dcopf(apply_topology(net, topo))
        if sol.feasible and (best is None or sol.total_cost < best[1] - 1e-9):
            best = (off, sol.total_cost)
    return best


def _check_size(net: Network):
    if len(net.lines) > BRUTE_FORCE_MAX_LINES:
        raise ValueError(f"{len(net.lines)} lines exceeds the enumeration bound {BRUTE_FORCE_MAX_LINES}")


def certify_non_commutativity(net: Network, enforce_n1: bool = True) -> ParadoxCertificate | None:
    """Best single removal is not part of the best pair removal."""
    _check_size(net)
    base = solve_dcopf(apply_topology(net, Topology.initial(net)))
    single = _best_removal(net, 1, enforce_n1)
    pair = _best_removal(net, 2, enforce_n1)
    if not base.feasible or single is None or pair is None:
        return None
    if single[1] >= base.total_cost - 1e-6 or pair[1] >= base.total_cost - 1e-6:
        return None
    if single[0][0] in pair[0]:
        return None
    return ParadoxCertificate(NON_COMMUTATIVITY, net, {
        "enforce_n1": enforce_n1,
        "initial_cost": round(base.total_cost, 6),
        "best_single": list(single[0]), "best_single_cost": round(single[1], 6),
        "best_pair": list(pair[0]), "best_pair_cost": round(pair[1], 6),
    })


def _trace_evidence(tr) -> list:
    return [[a.kind, list(a.lines), round(a.cost_after, 6)] for a in tr.actions]


def certify_non_monotonicity(net: Network, enforce_n1: bool = True) -> ParadoxCertificate | None:
    """Greedy remove-or-reconnect trace reconnects a line it removed itself."""
    _check_size(net)
    tr = run_heuristic(net, HeuristicConfig(move_set=MoveSet(1, True), enforce_n1=enforce_n1))
    removed: set[int] = set()
    for step, a in enumerate(tr.actions):
        if a.kind == REMOVE:
            removed.update(a.lines)
        elif set(a.lines) <= removed and a.cost_after < a.cost_before:
            return ParadoxCertificate(NON_MONOTONICITY, net, {
                "enforce_n1": enforce_n1,
                "trace": _trace_evidence(tr), "reconnect_step": step,
                "final_cost": round(tr.final_cost, 6),
            })
    return None


def certify_non_consistency(net: Network, variant: str, enforce_n1: bool = True) -> ParadoxCertificate | None:
    """A: removal-only beats remove-or-reconnect.  B: single removals beat pairs."""
    _check_size(net)
    if variant not in ("A", "B"):
        raise ValueError("variant must be 'A' or 'B'")
    simple = run_heuristic(net, HeuristicConfig(move_set=MoveSet(1, False), enforce_n1=enforce_n1))
    richer_moves = MoveSet(1, True) if variant == "A" else MoveSet(2, False)
    richer = run_heuristic(net, HeuristicConfig(move_set=richer_moves, enforce_n1=enforce_n1))
    if not simple.final_cost < richer.final_cost - 1e-6:
        return None
    kind = NON_CONSISTENCY_A if variant == "A" else NON_CONSISTENCY_B
    return ParadoxCertificate(kind, net, {
        "enforce_n1": enforce_n1,
        "simple_trace": _trace_evidence(simple), "simple_final_cost": round(simple.final_cost, 6),
        "richer_trace": _trace_evidence(richer), "richer_final_cost": round(richer.final_cost, 6),
    })


CERTIFIERS = {
    NON_COMMUTATIVITY: certify_non_commutativity,
    NON_MONOTONICITY: certify_non_monotonicity,
    NON_CONSISTENCY_A: lambda net, enforce_n1=True: certify_non_consistency(net, "A", enforce_n1),
    NON_CONSISTENCY_B: lambda net, enforce_n1=True: certify_non_consistency(net, "B", enforce_n1),
}


SUSCEPTANCE_CHOICES = (1.0, 2.0, 3.0, 5.0, 8.0, 10.0)
CAPACITY_CHOICES = (5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 1000.0)


def random_instance(rng: random.Random, n_lines: int = 6, three_generators: bool = True) -> Network:
    """Three-bus corridor: cheap (and mid) supply at buses 1-2, a 100 MW load with dear supply at bus 3."""
    buses = (Bus(1), Bus(2), Bus(3, 100.0))
    pairs = ((1, 2), (1, 3), (2, 3))
    while True:
        lines = tuple(
            Line(k, *rng.choice(pairs), rng.choice(SUSCEPTANCE_CHOICES), rng.choice(CAPACITY_CHOICES))
            for k in range(1, n_lines + 1)
        )
        probe = Network(buses, lines, (Generator(1, 3, 1.0, 0.0, 1.0),))
        if full_view(probe).connected:
            break
    if three_generators:
        gens = (Generator(1, 1, 20.0, 0.0, 100.0), Generator(2, 2, 10.0, 0.0, 100.0),
                Generator(3, 3, 80.0, 0.0, 100.0))
    else:
        gens = (Generator(1, 1, 10.0, 0.0, 100.0), Generator(2, 3, 80.0, 0.0, 100.0))
    return Network(buses, lines, gens, reference_bus=3)


def find_certificate(kind: str, seed: int = 0, max_tries: int = 20000, max_lines: int = 6,
                     enforce_n1: bool = False, min_lines: int = 4) -> ParadoxCertificate | None:
    """Random search over small instances until a certificate of the given kind turns up."""
    rng = random.Random(f"{kind}:{seed}")
    certify = CERTIFIERS[kind]
    for _ in range(max_tries):
        net = random_instance(rng, rng.randint(min_lines, max_lines), rng.random() < 0.5)
        try:
            cert = certify(net, enforce_n1)
        except HeuristicError:
            continue
        if cert is not None:
            return replace(cert, fallback=True)
    return None
