"""Subset-sum to topology-control feasibility, and a two-sided brute-force check.

Gadget: a generator bus T feeds a 2 MW load at bus D through two branches.
The left branch is a bank of parallel T-L lines (one per positive element,
susceptance x_i) followed by a stiff L-D line; the right branch is a bank of
T-R lines (susceptance -y_j) followed by a stiff R-D line. Both stiff lines
carry 1 MW at most, so the load is served only if the branches split the
flow evenly, i.e. the in-service bank susceptances are equal on both sides.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .dcopf import solve_dcopf
from .grid import Bus, Generator, Line, Network, Topology, apply_topology

TOP, LEFT, RIGHT, DEMAND = 1, 2, 3, 4
DEMAND_MW = 2.0
BOTTOM_CAPACITY = 1.0
STIFF_SUSCEPTANCE = 1e6
MAX_ELEMENTS = 12


@dataclass(frozen=True)
class SubsetSumInstance:
    positives: tuple[float, ...]
    negatives: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "positives", tuple(float(v) for v in self.positives))
        object.__setattr__(self, "negatives", tuple(float(v) for v in self.negatives))
        if not self.positives and not self.negatives:
            raise ValueError("instance is empty")
        for v in self.elements:
            if not math.isfinite(v) or v == 0:
                raise ValueError(f"element {v!r} must be finite and nonzero")
        if any(v < 0 for v in self.positives) or any(v > 0 for v in self.negatives):
            raise ValueError("positives/negatives have the wrong sign")

    @classmethod
    def from_values(cls, values) -> "SubsetSumInstance":
        vals = [float(v) for v in values]
        if 0.0 in vals:
            raise ValueError("element 0.0 must be finite and nonzero")
        return cls(tuple(v for v in vals if v > 0), tuple(v for v in vals if v < 0))

    @property
    def elements(self) -> tuple[float, ...]:
        """Positives then negatives; bank line k carries element k-1."""
        return self.positives + self.negatives


def reduce_subset_sum(inst: SubsetSumInstance) -> Network:
    m = len(inst.positives)
    lines = [Line(k + 1, TOP, LEFT, x, math.inf) for k, x in enumerate(inst.positives)]
    lines += [Line(m + k + 1, TOP, RIGHT, -y, math.inf) for k, y in enumerate(inst.negatives)]
    n_bank = len(lines)
    lines.append(Line(n_bank + 1, LEFT, DEMAND, STIFF_SUSCEPTANCE, BOTTOM_CAPACITY))
    lines.append(Line(n_bank + 2, RIGHT, DEMAND, STIFF_SUSCEPTANCE, BOTTOM_CAPACITY))
    buses = (Bus(TOP), Bus(LEFT), Bus(RIGHT), Bus(DEMAND, DEMAND_MW))
    gen = Generator(1, TOP, 1.0, 0.0, 2 * DEMAND_MW)
    return Network(buses, tuple(lines), (gen,), reference_bus=TOP)


def bank_line_ids(inst: SubsetSumInstance) -> tuple[int, ...]:
    return tuple(range(1, len(inst.elements) + 1))


def _subsets(n: int):
    """Non-empty index subsets, smallest first, then lexicographic."""
    for k in range(1, n + 1):
        yield from itertools.combinations(range(n), k)


def zero_sum_subset(inst: SubsetSumInstance) -> tuple[float, ...] | None:
    vals = inst.elements
    for idx in _subsets(len(vals)):
        if sum(vals[i] for i in idx) == 0:
            return tuple(sorted(vals[i] for i in idx))
    return None


def feasible_topology(net: Network, bank: tuple[int, ...]) -> Topology | None:
    """First topology (bank lines switchable, the rest fixed in) with a feasible DCOPF."""
    base = Topology.all_in(net)
    for idx in _subsets(len(bank)):
        keep = {bank[i] for i in idx}
        topo = base.switched(off=[b for b in bank if b not in keep])
        if solve_dcopf(apply_topology(net, topo)).feasible:
            return topo
    return None


@dataclass(frozen=True)
class ReductionVerdict:
    agree: bool
    subset_sum_feasible: bool
    grid_feasible: bool
    subset_witness: tuple[float, ...] | None
    topology_witness: Topology | None

    @property
    def topology_subset(self) -> tuple[int, ...] | None:
        if self.topology_witness is None:
            return None
        return tuple(sorted(self.topology_witness.in_service))


def verify_reduction(inst: SubsetSumInstance) -> ReductionVerdict:
    if len(inst.elements) > MAX_ELEMENTS:
        raise ValueError(f"|X| = {len(inst.elements)} exceeds the enumeration budget of {MAX_ELEMENTS}")
    subset = zero_sum_subset(inst)
    net = reduce_subset_sum(inst)
    topo = feasible_topology(net, bank_line_ids(inst))
    return ReductionVerdict(
        agree=(subset is not None) == (topo is not None),
        subset_sum_feasible=subset is not None,
        grid_feasible=topo is not None,
        subset_witness=subset,
        topology_witness=topo,
    )


def topology_to_subset(inst: SubsetSumInstance, topo: Topology) -> tuple[float, ...]:
    """Elements whose bank lines are in service."""
    vals = inst.elements
    return tuple(sorted(vals[i - 1] for i in topo.in_service if i <= len(vals)))


def random_instance(rng, max_size: int = 10, bound: int = 20) -> SubsetSumInstance:
    nonzero = [v for v in range(-bound, bound + 1) if v != 0]
    size = rng.randint(1, max_size)
    return SubsetSumInstance.from_values(rng.choice(nonzero) for _ in range(size))
