"""Search templates for the four small paradox grids, and the stored results.

Cost coefficients come from solving the published (cost, dispatch) pairs:
cheap 10 $/MWh, mid 20 $/MWh, expensive 80 $/MWh.
"""
from __future__ import annotations

import json
from importlib import resources

from .grid import Bus, Generator, Network, parse_case
from .paradox import (
    KINDS, NON_COMMUTATIVITY, NON_CONSISTENCY_A, NON_CONSISTENCY_B, NON_MONOTONICITY,
    OperatingPoint, ParadoxCertificate, Template, TraceTarget,
)
from .switching import HeuristicConfig, MoveSet, REMOVE, RECONNECT

CHEAP, MID, DEAR = 10.0, 20.0, 80.0

# the small examples are analysed without the degree-2 safeguard
def _greedy(k: int = 1, reconnect: bool = False) -> HeuristicConfig:
    return HeuristicConfig("greedy", MoveSet(k, reconnect), enforce_n1=False)


def _removals(*ids: int) -> tuple:
    return tuple((REMOVE, (i,)) for i in ids)


FIG2 = Template(
    "fig2",
    (Bus(1), Bus(2), Bus(3, 15.0)),
    (Generator(1, 1, CHEAP, 0.0, 100.0), Generator(2, 3, DEAR, 0.0, 100.0)),
    n_lines=5,
    min_lines=4,
    targets=(
        TraceTarget(OperatingPoint(710.0, {1: 7.0, 2: 8.0})),
        TraceTarget(OperatingPoint(500.0, {1: 10.0, 2: 5.0}), _greedy(1), _removals(1)),
        TraceTarget(OperatingPoint(150.0, {1: 15.0}), _greedy(2), ((REMOVE, (3, 4)),)),
    ),
    capacity_range=(1, 10),
    reference_bus=1,
)

_FIG34_BUSES = (Bus(1), Bus(2), Bus(3, 100.0))
_FIG34_GENS = (Generator(1, 1, MID, 0.0, 100.0), Generator(2, 2, CHEAP, 0.0, 100.0),
               Generator(3, 3, DEAR, 0.0, 100.0))

FIG3 = Template(
    "fig3", _FIG34_BUSES, _FIG34_GENS,
    n_lines=6,
    min_lines=4,
    targets=(
        TraceTarget(OperatingPoint(7650.0, {2: 5.0, 3: 95.0})),
        TraceTarget(OperatingPoint(5900.0, {2: 30.0, 3: 70.0}), _greedy(1, True),
                    _removals(1, 2, 3) + ((RECONNECT, (1,)),)),
    ),
    capacity_range=(1, 100),
    reference_bus=3,
)

FIG4 = Template(
    "fig4", _FIG34_BUSES, _FIG34_GENS,
    n_lines=6,
    targets=(
        TraceTarget(OperatingPoint(7580.0, {2: 6.0, 3: 94.0})),
        TraceTarget(OperatingPoint(4950.0, {1: 10.0, 2: 35.0, 3: 55.0}), _greedy(1), _removals(1, 2, 3, 5, 6)),
        TraceTarget(OperatingPoint(5200.0, {2: 40.0, 3: 60.0}), _greedy(1, True),
                    _removals(1, 2, 3) + ((RECONNECT, (1,)),)),
    ),
    capacity_range=(1, 100),
    reference_bus=3,
)

# Published dispatches are rounded to 0.1 MW and the costs follow from the
# rounded figures, so the match window is half a step times the price spread.
FIG5_MW_TOL = 0.05
FIG5_COST_TOL = FIG5_MW_TOL * (DEAR - CHEAP)
FIG5_SUSCEPTANCES = {1: 8.0, 2: 1.1, 3: 1.1, 4: 5.0, 5: 5.0, 6: 5.0, 7: 10.0}
FIG5_UNLIMITED = 1000.0


def _fig5_point(cost: float, cheap: float) -> OperatingPoint:
    return OperatingPoint(cost, {1: cheap, 2: 100.0 - cheap}, cost_tol=FIG5_COST_TOL, mw_tol=FIG5_MW_TOL)


FIG5 = Template(
    "fig5",
    (Bus(1), Bus(2, 100.0), Bus(3)),
    (Generator(1, 1, CHEAP, 0.0, 100.0), Generator(2, 2, DEAR, 0.0, 100.0)),
    n_lines=7,
    targets=(
        TraceTarget(_fig5_point(6775.0, 17.5)),
        TraceTarget(_fig5_point(6600.0, 20.0), _greedy(1), _removals(1, 2, 3)),
        TraceTarget(_fig5_point(6607.0, 19.9), _greedy(2), ((REMOVE, (4, 5)),)),
    ),
    susceptances=FIG5_SUSCEPTANCES,
    fixed_capacities={1: FIG5_UNLIMITED, 2: FIG5_UNLIMITED, 3: FIG5_UNLIMITED, 4: FIG5_UNLIMITED,
                      5: FIG5_UNLIMITED, 6: 10.0, 7: 10.0},
    pinned_pairs={6: (1, 2), 7: (2, 3)},
    reference_bus=2,
)

TEMPLATES = {"fig2": FIG2, "fig3": FIG3, "fig4": FIG4, "fig5": FIG5}
FIGURE_OF_KIND = {
    NON_COMMUTATIVITY: "fig2",
    NON_MONOTONICITY: "fig3",
    NON_CONSISTENCY_A: "fig4",
    NON_CONSISTENCY_B: "fig5",
}


def _data(name: str) -> str:
    return resources.files("toposwitch").joinpath("data", name).read_text()


def reconstructed(figure: str) -> Network | None:
    """Stored search result for a figure, or None when its search came up empty."""
    try:
        return parse_case(_data(f"{figure}.json"))
    except FileNotFoundError:
        return None


def fallback_certificate(kind: str) -> ParadoxCertificate:
    """Small (at most six lines) instance certified for the given paradox kind."""
    if kind not in KINDS:
        raise ValueError(f"unknown paradox kind {kind!r}")
    return ParadoxCertificate.from_json(_data(f"certificates/{kind}.json"))


def stored_search_log() -> dict:
    """Outcome of the last full template search (written by scripts/search_figures.py)."""
    return json.loads(_data("search_log.json"))
