"""toposwitch command line."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import circuit, figures, harness, paradox, reduction
from .dcopf import solve_dcopf
from .grid import CaseError, Topology, apply_topology, check_relaxed_n1, emit_case, load_case
from .switching import HeuristicConfig, HeuristicError, MoveSet, run_heuristic

EXIT_OK, EXIT_FAIL, EXIT_VIOLATION = 0, 1, 2

PARADOX_KINDS = {
    "commutativity": paradox.NON_COMMUTATIVITY,
    "monotonicity": paradox.NON_MONOTONICITY,
    "consistency-a": paradox.NON_CONSISTENCY_A,
    "consistency-b": paradox.NON_CONSISTENCY_B,
}


def _load(path: str):
    try:
        return load_case(path)
    except (OSError, CaseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_FAIL)


def cmd_validate(args) -> int:
    net = _load(args.case)
    res = check_relaxed_n1(apply_topology(net, Topology.initial(net)))
    for v in res.violations:
        print(v)
    return EXIT_OK if res.passed else EXIT_VIOLATION


def cmd_opf(args) -> int:
    net = _load(args.case)
    sol = solve_dcopf(apply_topology(net, Topology.initial(net)), enforce_limits=not args.unconstrained)
    if args.json:
        print(json.dumps({
            "status": sol.status,
            "total_cost": sol.total_cost if sol.feasible else None,
            "gen_output": sol.gen_output,
            "prices": sol.prices,
            "flows": sol.flows,
            "angles": sol.angles,
        }, indent=1))
        return EXIT_OK if sol.feasible else EXIT_FAIL
    print(f"status: {sol.status}")
    if not sol.feasible:
        return EXIT_FAIL
    print(f"total cost: {sol.total_cost:.6f}")
    for gid, p in sol.gen_output.items():
        print(f"gen {gid}: {p:.6f} MW")
    for bid, price in sol.prices.items():
        print(f"bus {bid}: {price:.6f} $/MWh")
    return EXIT_OK


def cmd_laws(args) -> int:
    rep = circuit.run_law_corpus(args.trials, args.seed)
    print(rep.summary())
    ok = rep.max_decrease <= 1e-8 and rep.max_identity_error <= 1e-8 and rep.max_zero_current_delta <= 1e-10
    print("laws hold" if ok else "law violation")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_switch(args) -> int:
    net = _load(args.case)
    family = harness.FAMILY_ALIASES.get(args.family, args.family)
    cfg = HeuristicConfig(family, MoveSet(args.k, args.reconnect), seed=args.seed, enforce_n1=not args.no_n1)
    try:
        tr = run_heuristic(net, cfg)
    except HeuristicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"initial cost: {tr.initial_cost:.6f}")
    for i, a in enumerate(tr.actions, start=1):
        print(f"{i}: {a.kind} {','.join(map(str, a.lines))} -> {a.cost_after:.6f}")
    print(f"final cost: {tr.final_cost:.6f}  lines out: {tr.lines_disconnected}  solves: {tr.dcopf_solve_count}")
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "action_kind", "line_ids", "cost_before", "cost_after", "solves_so_far"])
            for i, (a, n) in enumerate(zip(tr.actions, tr.solves_at_action), start=1):
                w.writerow([i, a.kind, " ".join(map(str, a.lines)), repr(a.cost_before), repr(a.cost_after), n])
    return EXIT_OK


def cmd_reduce(args) -> int:
    try:
        values = [float(v) for v in args.set.split(",") if v.strip()]
        inst = reduction.SubsetSumInstance.from_values(values)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(emit_case(reduction.reduce_subset_sum(inst)))
    if args.verify:
        try:
            v = reduction.verify_reduction(inst)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAIL
        print(f"subset-sum feasible: {v.subset_sum_feasible}")
        print(f"grid feasible: {v.grid_feasible}")
        print(f"agree: {v.agree}")
        if v.subset_witness is not None:
            print("subset witness: " + ",".join(f"{x:g}" for x in v.subset_witness))
        if v.topology_witness is not None:
            print("in-service bank lines: " + ",".join(str(i) for i in v.topology_witness.in_service
                                                       if i in reduction.bank_line_ids(inst)))
        return EXIT_OK if v.agree else EXIT_FAIL
    return EXIT_OK


def _certificate(kind: str, search: bool) -> paradox.ParadoxCertificate | None:
    figure = figures.FIGURE_OF_KIND[kind]
    if search:
        net = paradox.search_instance(figures.TEMPLATES[figure])
        if net is None:
            print(f"{figure}: search space exhausted, falling back", file=sys.stderr)
            return paradox.find_certificate(kind)
    else:
        net = figures.reconstructed(figure)
        if net is None:
            return figures.fallback_certificate(kind)
    return paradox.CERTIFIERS[kind](net, False)


def cmd_paradox(args) -> int:
    kind = PARADOX_KINDS[args.kind]
    cert = _certificate(kind, args.search)
    if cert is None:
        print("no certificate")
        return EXIT_FAIL
    print(f"kind: {cert.kind}{' (fallback instance)' if cert.fallback else ''}")
    print(f"lines: {len(cert.instance.lines)}")
    print(json.dumps(cert.evidence, indent=1))
    print(f"replays: {cert.replay()}")
    if args.emit:
        Path(args.emit).write_text(cert.to_json())
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    fams = tuple(f.strip() for f in args.families.split(",") if f.strip())
    try:
        cfg = harness.ExperimentConfig(args.case, args.trials, args.seed, families=fams,
                                       output_path=args.out, workers=args.workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    net = _load(args.case)
    try:
        rep = harness.run_monte_carlo(cfg, net=net)
    except harness.HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    md = harness.emit_report(rep, "markdown")
    if args.markdown:
        Path(args.markdown).write_text(md)
    print(md, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="toposwitch", description="Topology control experiments on DC grid models.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check connectivity and the degree-2 rule")
    s.add_argument("case")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("opf", help="solve the DC optimal power flow")
    s.add_argument("case")
    s.add_argument("--unconstrained", action="store_true", help="ignore line limits")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_opf)

    s = sub.add_parser("laws", help="check the loss laws on random circuits")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_laws)

    s = sub.add_parser("switch", help="run a switching heuristic")
    s.add_argument("case")
    s.add_argument("--family", choices=["random", "profit", "greedy"], default="greedy")
    s.add_argument("--k", type=int, default=1, help="max lines removed per greedy move")
    s.add_argument("--reconnect", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace", help="write the action trace as CSV")
    s.add_argument("--no-n1", action="store_true", help="drop the degree-2 rule (connectivity still kept)")
    s.set_defaults(func=cmd_switch)

    s = sub.add_parser("reduce", help="build the subset-sum gadget grid")
    s.add_argument("--set", required=True, help='comma separated nonzero values, e.g. "-1,-2,-3,4,8"')
    s.add_argument("--verify", action="store_true")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("paradox", help="certify a switching paradox")
    s.add_argument("kind", choices=sorted(PARADOX_KINDS))
    s.add_argument("--search", action="store_true", help="rerun the template search instead of loading")
    s.add_argument("--emit", help="write the certificate JSON here")
    s.set_defaults(func=cmd_paradox)

    s = sub.add_parser("montecarlo", help="randomized-cost heuristic comparison")
    s.add_argument("case")
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--families", default="random,profit,greedy")
    s.add_argument("--out", required=True, help="per-trial CSV")
    s.add_argument("--markdown")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_montecarlo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
