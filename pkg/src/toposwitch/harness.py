"""Monte Carlo comparison of the switching heuristics under randomized generator costs."""
from __future__ import annotations

import csv
import hashlib
import io
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .dcopf import solve_dcopf
from .grid import Network, Topology, apply_topology, load_case
from .switching import FAMILIES, HeuristicConfig, HeuristicError, MoveSet, run_heuristic

MAS_TOL = 1e-6
FAMILY_ALIASES = {"profit": "line_profit"}


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    case_path: str
    trials: int = 50
    master_seed: int = 0
    cost_scale_low: float = 0.5
    cost_scale_high: float = 1.5
    families: tuple[str, ...] = FAMILIES
    output_path: str | None = None
    workers: int = 1
    move_set: MoveSet = MoveSet()
    enforce_n1: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.cost_scale_low <= self.cost_scale_high:
            raise ValueError("need 0 < cost_scale_low <= cost_scale_high")
        fams = tuple(FAMILY_ALIASES.get(f, f) for f in self.families)
        for f in fams:
            if f not in FAMILIES:
                raise ValueError(f"unknown family {f!r}")
        object.__setattr__(self, "families", fams)


@dataclass(frozen=True)
class MasResult:
    c_init: float
    c_unconstrained: float

    @property
    def mas(self) -> float:
        return self.c_init - self.c_unconstrained


def compute_mas(net: Network, topology: Topology | None = None) -> MasResult:
    """Constrained base-case cost and the cost with every line limit lifted."""
    topo = topology if topology is not None else Topology.initial(net)
    base = solve_dcopf(apply_topology(net, topo))
    if not base.feasible:
        raise HarnessError("base case DCOPF is infeasible")
    free = solve_dcopf(apply_topology(net, topo), enforce_limits=False)
    return MasResult(base.total_cost, free.total_cost)


def trial_seed(master_seed: int, trial: int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{trial}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def randomized_costs(net: Network, seed: int, low: float, high: float) -> Network:
    scale = np.random.default_rng(seed).uniform(low, high, size=len(net.generators))
    return net.replace_costs({g.id: g.cost * float(s) for g, s in zip(net.generators, scale)})


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    family: str
    status: str  # "ok", "zero_mas" or "infeasible"
    initial_cost: float
    unconstrained_cost: float
    mas: float
    final_cost: float
    saving: float
    saving_over_mas: float
    lines_disconnected: int
    solves: int

    @classmethod
    def from_row(cls, row: dict) -> "TrialRecord":
        conv = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in row.items():
            t = conv[k]
            out[k] = v if t == "str" else int(v) if t == "int" else float(v)
        return cls(**out)


def run_trial(net: Network, cfg: ExperimentConfig, trial: int) -> list[TrialRecord]:
    seed = trial_seed(cfg.master_seed, trial)
    inst = randomized_costs(net, seed, cfg.cost_scale_low, cfg.cost_scale_high)
    nan = float("nan")
    try:
        mas = compute_mas(inst)
    except HarnessError:
        return [TrialRecord(trial, seed, f, "infeasible", nan, nan, nan, nan, nan, nan, 0, 0) for f in cfg.families]
    rows = []
    for fam in cfg.families:
        hc = HeuristicConfig(fam, cfg.move_set, seed=seed, enforce_n1=cfg.enforce_n1)
        try:
            tr = run_heuristic(inst, hc)
        except HeuristicError:
            rows.append(TrialRecord(trial, seed, fam, "infeasible", mas.c_init, mas.c_unconstrained, mas.mas,
                                    nan, nan, nan, 0, 0))
            continue
        saving = mas.c_init - tr.final_cost
        if mas.mas > MAS_TOL:
            status, ratio = "ok", saving / mas.mas
            if not -1e-9 <= ratio <= 1 + 1e-9:
                raise HarnessError(f"trial {trial} {fam}: saving/MAS {ratio} outside [0, 1]")
        else:
            status, ratio = "zero_mas", 0.0
        rows.append(TrialRecord(trial, seed, fam, status, mas.c_init, mas.c_unconstrained, mas.mas,
                                tr.final_cost, saving, ratio, tr.lines_disconnected, tr.dcopf_solve_count))
    return rows


def _run_trial_args(args):
    return run_trial(*args)


@dataclass(frozen=True)
class Dispersion:
    mean: float
    std: float

    def __str__(self) -> str:
        return f"{self.mean:.3f} ± {self.std:.3f}"


def _disp(values: list[float]) -> Dispersion:
    if not values:
        return Dispersion(float("nan"), float("nan"))
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return Dispersion(statistics.fmean(values), std)


@dataclass(frozen=True)
class FamilyStats:
    family: str
    saving_over_mas: Dispersion
    lines_disconnected: Dispersion
    mean_effort: float
    mean_solves: float


@dataclass(frozen=True)
class StatsReport:
    families: tuple[FamilyStats, ...]
    rows: tuple[TrialRecord, ...]
    zero_mas_trials: int
    infeasible_trials: int

    def family(self, name: str) -> FamilyStats:
        name = FAMILY_ALIASES.get(name, name)
        return next(f for f in self.families if f.family == name)


def aggregate(rows: list[TrialRecord]) -> StatsReport:
    """Per-family statistics; effort is normalized by greedy's mean solve count."""
    rows = sorted(rows, key=lambda r: (r.trial, r.family))
    fams = list(dict.fromkeys(r.family for r in sorted(rows, key=lambda r: FAMILIES.index(r.family))))
    usable = [r for r in rows if r.status != "infeasible"]
    mean_solves = {f: statistics.fmean([r.solves for r in usable if r.family == f] or [float("nan")]) for f in fams}
    norm = mean_solves.get("greedy", max(mean_solves.values(), default=1.0))
    stats = []
    for f in fams:
        mine = [r for r in usable if r.family == f]
        stats.append(FamilyStats(
            family=f,
            saving_over_mas=_disp([r.saving_over_mas for r in mine if r.status == "ok"]),
            lines_disconnected=_disp([float(r.lines_disconnected) for r in mine]),
            mean_effort=mean_solves[f] / norm,
            mean_solves=mean_solves[f],
        ))
    trials = {r.trial: r for r in rows}
    zero = sum(1 for t in trials if any(r.trial == t and r.status == "zero_mas" for r in rows))
    infeasible = sum(1 for t in trials if all(r.status == "infeasible" for r in rows if r.trial == t))
    return StatsReport(tuple(stats), tuple(rows), zero, infeasible)


def run_monte_carlo(cfg: ExperimentConfig, net: Network | None = None) -> StatsReport:
    net = net if net is not None else load_case(cfg.case_path)
    jobs = [(net, cfg, t) for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_run_trial_args, jobs))
    else:
        parts = [_run_trial_args(j) for j in jobs]
    report = aggregate([r for p in parts for r in p])
    if cfg.output_path:
        Path(cfg.output_path).write_text(emit_report(report, "csv"))
    return report


# -- report emission ------------------------------------------------------------

FAMILY_LABELS = {"random": "Random", "line_profit": "Line profit", "greedy": "Standard greedy"}


def emit_report(report: StatsReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        names = [f.name for f in fields(TrialRecord)]
        w = csv.DictWriter(buf, names, lineterminator="\n")
        w.writeheader()
        for r in report.rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in asdict(r).items()})
        return buf.getvalue()
    if fmt == "markdown":
        out = ["| Heuristic | Saving/MAS | Lines disconnected | Mean effort |",
               "|---|---|---|---|"]
        for f in report.families:
            out.append(f"| {FAMILY_LABELS.get(f.family, f.family)} | {f.saving_over_mas} "
                       f"| {f.lines_disconnected} | {f.mean_effort:.3f} |")
        trials = len({r.trial for r in report.rows})
        out.append("")
        out.append(f"Trials: {trials}. Excluded from saving/MAS: {report.zero_mas_trials} (zero MAS). "
                   f"Excluded entirely: {report.infeasible_trials} (infeasible).")
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def read_trial_csv(text: str) -> list[TrialRecord]:
    return [TrialRecord.from_row(row) for row in csv.DictReader(io.StringIO(text))]
