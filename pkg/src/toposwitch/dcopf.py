"""Lossless DC power flow and DC optimal power flow with nodal prices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .grid import NetworkView

FEAS_TOL = 1e-6

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
FAILED = "failed"


class FlowError(ValueError):
    """DC flow preconditions violated (islanding or unbalanced injections)."""


class SolverError(RuntimeError):
    """The LP backend returned something other than optimal or infeasible."""


@dataclass(frozen=True)
class DispatchSolution:
    status: str
    angles: Mapping[int, float] = field(default_factory=dict)
    flows: Mapping[int, float] = field(default_factory=dict)
    gen_output: Mapping[int, float] = field(default_factory=dict)
    prices: Mapping[int, float] = field(default_factory=dict)
    total_cost: float = math.inf

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL


def _laplacian(view: NetworkView) -> np.ndarray:
    a = view.network.arrays
    m = view.mask
    inc = a.incidence[m]
    return inc.T @ (a.susceptance[m][:, None] * inc)


def solve_dc_flow(view: NetworkView, injections: Mapping[int, float]) -> tuple[dict[int, float], dict[int, float]]:
    """Angles and raw line flows for fixed nodal injections (positive = into the grid).

    Line limits are not enforced.
    """
    net = view.network
    if not view.connected:
        raise FlowError("in-service graph is disconnected")
    idx = net.bus_index
    p = np.zeros(len(net.buses))
    for bus, val in injections.items():
        p[idx[bus]] += val
    scale = max(1.0, float(np.abs(p).sum()))
    if abs(p.sum()) > FEAS_TOL * scale:
        raise FlowError(f"injections sum to {p.sum():g}, not zero")
    a = net.arrays
    lap = _laplacian(view)
    keep = np.arange(len(net.buses)) != a.ref
    theta = np.zeros(len(net.buses))
    if keep.any():
        theta[keep] = np.linalg.solve(lap[np.ix_(keep, keep)], p[keep])
    m = view.mask
    f = a.susceptance[m] * (theta[a.frm[m]] - theta[a.to[m]])
    angles = {b.id: float(theta[i]) for i, b in enumerate(net.buses)}
    flows = {ln.id: float(v) for ln, v in zip(view.lines, f)}
    return angles, flows


def solve_dcopf(view: NetworkView, enforce_limits: bool = True) -> DispatchSolution:
    """Minimum-cost dispatch under DC flow, generator bounds and line limits.

    Variables are stacked as [angles, generator outputs, line flows]. Nodal
    balance rows read  gen - (net outflow) = load, so their duals are the
    nodal prices. One angle per island is pinned to zero.
    """
    net = view.network
    a = net.arrays
    m = view.mask
    nb, ng = len(net.buses), len(net.generators)
    inc = a.incidence[m]
    nl = inc.shape[0]
    b = a.susceptance[m]

    cg = sp.csr_matrix((np.ones(ng), (a.gen_bus, np.arange(ng))), shape=(nb, ng))
    inc_s = sp.csr_matrix(inc)
    balance = sp.hstack([sp.csr_matrix((nb, nb)), cg, -inc_s.T])
    flow_def = sp.hstack([-sp.diags(b) @ inc_s, sp.csr_matrix((nl, ng)), sp.identity(nl)])
    a_eq = sp.vstack([balance, flow_def]).tocsc()
    b_eq = np.concatenate([a.load, np.zeros(nl)])
    c = np.concatenate([np.zeros(nb), a.cost, np.zeros(nl)])

    labels = view.components
    pinned = {}
    for i, lab in enumerate(labels):
        pinned.setdefault(lab, i)
    pinned[labels[a.ref]] = a.ref
    theta_bounds = [(None, None)] * nb
    for i in pinned.values():
        theta_bounds[i] = (0.0, 0.0)
    cap = a.capacity[m] if enforce_limits else np.full(nl, np.inf)
    flow_bounds = [(-x, x) if math.isfinite(x) else (None, None) for x in cap]
    bounds = theta_bounds + list(zip(a.p_min, a.p_max)) + flow_bounds

    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status == 2:
        return DispatchSolution(INFEASIBLE)
    if res.status != 0:
        raise SolverError(f"LP backend failed: {res.message}")
    x = res.x
    theta, pg, f = x[:nb], x[nb:nb + ng], x[nb + ng:]
    prices = res.eqlin.marginals[:nb]
    return DispatchSolution(
        status=OPTIMAL,
        angles={bus.id: float(v) for bus, v in zip(net.buses, theta)},
        flows={ln.id: float(v) for ln, v in zip(view.lines, f)},
        gen_output={g.id: float(v) for g, v in zip(net.generators, pg)},
        prices={bus.id: float(v) for bus, v in zip(net.buses, prices)},
        total_cost=float(a.cost @ pg),
    )


def line_profits(view: NetworkView, sol: DispatchSolution) -> dict[int, float]:
    """Flow times the price rise along the flow direction, per in-service line.

    With flow oriented from bus m to bus n this is  |f| * (price_n - price_m),
    which equals  f * (price_to - price_from)  for the signed from->to flow.
    """
    if not sol.feasible:
        raise ValueError("line profits need a feasible dispatch")
    pr = sol.prices
    return {
        ln.id: sol.flows[ln.id] * (pr[ln.to_bus] - pr[ln.from_bus])
        for ln in view.lines
    }
