"""Line-switching heuristics, move-set variants and an exhaustive oracle."""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .dcopf import DispatchSolution, line_profits, solve_dcopf
from .grid import Network, NetworkView, Topology, apply_topology

FAMILIES = ("random", "line_profit", "greedy")
REMOVE = "remove"
RECONNECT = "reconnect"
BRUTE_FORCE_MAX_LINES = 24


class HeuristicError(RuntimeError):
    pass


@dataclass(frozen=True)
class MoveSet:
    max_removals: int = 1
    allow_reconnect: bool = False

    def __post_init__(self):
        if self.max_removals < 1:
            raise ValueError("max_removals must be >= 1")


@dataclass(frozen=True)
class HeuristicConfig:
    family: str = "greedy"
    move_set: MoveSet = MoveSet()
    seed: int = 0
    improvement_tolerance: float = 1e-6
    enforce_n1: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown heuristic family {self.family!r}")


@dataclass(frozen=True)
class SwitchAction:
    kind: str
    lines: tuple[int, ...]
    cost_before: float
    cost_after: float


@dataclass
class HeuristicTrace:
    family: str
    initial_cost: float
    actions: list[SwitchAction] = field(default_factory=list)
    final_topology: Topology | None = None
    final_solution: DispatchSolution | None = None
    dcopf_solve_count: int = 0
    # cumulative solve count after each action, for trace export
    solves_at_action: list[int] = field(default_factory=list)

    @property
    def final_cost(self) -> float:
        return self.final_solution.total_cost

    @property
    def costs(self) -> list[float]:
        return [self.initial_cost] + [a.cost_after for a in self.actions]

    @property
    def lines_disconnected(self) -> int:
        return len(self.final_topology.out_of_service)


def admissible(before: NetworkView, after: NetworkView, enforce_n1: bool = True) -> bool:
    """Connectivity, plus no load/generator bus pushed below two lines.

    A bus that already sits below two lines is left alone as long as the
    move does not lower its degree further.
    """
    if not after.connected:
        return False
    if not enforce_n1:
        return True
    d0, d1 = before.degree, after.degree
    return all(d1[b] >= 2 or d1[b] >= d0[b] for b in after.network.terminal_buses)


def switchable_set(view: NetworkView, enforce_n1: bool = True) -> frozenset[int]:
    """In-service lines whose individual removal keeps the relaxed N-1 rule."""
    deg = view.degree
    term = view.network.terminal_buses
    out = set()
    for ln in view.lines:
        if ln.id in view.bridges:
            continue
        if enforce_n1 and any(b in term and deg[b] - 1 < 2 for b in (ln.from_bus, ln.to_bus)):
            continue
        out.add(ln.id)
    return frozenset(out)


class _Solver:
    """Counts DCOPF solves and memoises them per topology."""

    def __init__(self, net: Network):
        self.net = net
        self.count = 0
        self._cache: dict[Topology, DispatchSolution] = {}

    def __call__(self, topo: Topology) -> DispatchSolution:
        self.count += 1
        sol = self._cache.get(topo)
        if sol is None:
            sol = solve_dcopf(apply_topology(self.net, topo))
            self._cache[topo] = sol
        return sol


def _moves(view: NetworkView, moves: MoveSet, enforce_n1: bool) -> Iterator[tuple[str, tuple[int, ...]]]:
    cands = sorted(switchable_set(view, enforce_n1))
    for k in range(1, moves.max_removals + 1):
        for combo in itertools.combinations(cands, k):
            yield REMOVE, combo
    if moves.allow_reconnect:
        for lid in sorted(view.topology.out_of_service):
            yield RECONNECT, (lid,)


def _apply(topo: Topology, kind: str, ids: tuple[int, ...]) -> Topology:
    return topo.switched(off=ids) if kind == REMOVE else topo.switched(on=ids)


def run_heuristic(net: Network, cfg: HeuristicConfig, topology: Topology | None = None) -> HeuristicTrace:
    """Switch lines one move at a time until no admissible move lowers cost.

    random:      uniformly sampled unprofitable switchable line, accepted if
                 the trial solve is feasible and improving (else resampled
                 without replacement within the iteration).
    line_profit: unprofitable switchable lines in ascending profit order;
                 first feasible improving removal wins.
    greedy:      every move in the move set is trial-solved and the best
                 one is taken (ties go to enumeration order).
    """
    topo = topology if topology is not None else Topology.initial(net)
    solve = _Solver(net)
    sol = solve(topo)
    if not sol.feasible:
        raise HeuristicError("initial DCOPF is infeasible")
    trace = HeuristicTrace(cfg.family, sol.total_cost)
    rng = random.Random(cfg.seed)
    tol = cfg.improvement_tolerance

    while True:
        view = apply_topology(net, topo)
        if cfg.family == "greedy":
            step = _greedy_step(view, sol, solve, cfg)
        else:
            step = _profit_step(view, sol, solve, cfg, rng)
        if step is None:
            break
        kind, ids, new_topo, new_sol = step
        trace.actions.append(SwitchAction(kind, ids, sol.total_cost, new_sol.total_cost))
        trace.solves_at_action.append(solve.count)
        topo, sol = new_topo, new_sol
        assert new_sol.total_cost < trace.actions[-1].cost_before - tol

    trace.final_topology = topo
    trace.final_solution = sol
    trace.dcopf_solve_count = solve.count
    return trace


def _greedy_step(view, sol, solve, cfg):
    best = None
    for kind, ids in _moves(view, cfg.move_set, cfg.enforce_n1):
        new_topo = _apply(view.topology, kind, ids)
        if len(ids) > 1 and not admissible(view, apply_topology(view.network, new_topo), cfg.enforce_n1):
            continue
        trial = solve(new_topo)
        if not trial.feasible:
            continue
        if best is None or trial.total_cost < best[3].total_cost - 1e-9:
            best = (kind, ids, new_topo, trial)
    if best is not None and best[3].total_cost < sol.total_cost - cfg.improvement_tolerance:
        return best
    return None


def _profit_step(view, sol, solve, cfg, rng):
    profits = line_profits(view, sol)
    pool = sorted(l for l in switchable_set(view, cfg.enforce_n1) if profits[l] < 0)
    if cfg.family == "line_profit":
        order = sorted(pool, key=lambda l: (profits[l], l))
    else:
        order = pool[:]
        rng.shuffle(order)
    for lid in order:
        new_topo = view.topology.switched(off=(lid,))
        trial = solve(new_topo)
        if trial.feasible and trial.total_cost < sol.total_cost - cfg.improvement_tolerance:
            return REMOVE, (lid,), new_topo, trial
    return None


@dataclass(frozen=True)
class BruteForceResult:
    topology: Topology
    cost: float
    solution: DispatchSolution
    topologies_checked: int


def iter_topologies(net: Network, base: Topology | None = None, enforce_n1: bool = True) -> Iterator[Topology]:
    """Admissible removal sets of the base topology: fewest removals first, then lexicographic."""
    base = base if base is not None else Topology.initial(net)
    base_view = apply_topology(net, base)
    ids = sorted(base.in_service)
    for k in range(len(ids) + 1):
        for combo in itertools.combinations(ids, k):
            topo = base.switched(off=combo)
            if k and not admissible(base_view, apply_topology(net, topo), enforce_n1):
                continue
            yield topo


def brute_force_optimum(net: Network, enforce_n1: bool = True, tol: float = 1e-9) -> BruteForceResult:
    """Exact minimum DCOPF cost over every admissible topology."""
    if len(net.lines) > BRUTE_FORCE_MAX_LINES:
        raise ValueError(f"{len(net.lines)} lines exceeds the enumeration bound {BRUTE_FORCE_MAX_LINES}")
    best = None
    checked = 0
    for topo in iter_topologies(net, enforce_n1=enforce_n1):
        sol = solve_dcopf(apply_topology(net, topo))
        checked += 1
        if sol.feasible and (best is None or sol.total_cost < best[1].total_cost - tol):
            best = (topo, sol)
    if best is None:
        raise HeuristicError("no admissible topology has a feasible dispatch")
    return BruteForceResult(best[0], best[1].total_cost, best[1], checked)
