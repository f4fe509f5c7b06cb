"""Build data/case118.{m,json} from the IEEE 118-bus system shipped with PYPOWER.

The source case carries no thermal ratings and quadratic costs, so both are
replaced: every generator gets a flat linear cost, and each line is rated
at a multiple of the flow it carries under the case's own dispatch (DC
flow, mismatch taken up at the reference bus), with a floor for lightly
loaded lines.

    python scripts/build_case118.py [--alpha 1.1] [--floor 20] [--cost 20]
"""
import argparse
import math
from pathlib import Path

from pypower.case118 import case118

from toposwitch.dcopf import solve_dc_flow
from toposwitch.grid import (Bus, Generator, Line, Network, emit_case, emit_legacy_case, full_view,
                             import_legacy_case)

DATA = Path(__file__).resolve().parents[1] / "src" / "toposwitch" / "data"


def build(alpha: float, floor: float, cost: float) -> Network:
    c = case118()
    base = float(c["baseMVA"])
    buses = [Bus(int(r[0]), float(r[2])) for r in c["bus"]]
    ref = next(int(r[0]) for r in c["bus"] if int(r[1]) == 3)
    gens = [Generator(k, int(r[0]), cost, 0.0, float(r[8])) for k, r in enumerate(c["gen"], start=1)]
    lines = [Line(k, int(r[0]), int(r[1]), base / float(r[3]), math.inf)
             for k, r in enumerate(c["branch"], start=1)]
    draft = Network(tuple(buses), tuple(lines), tuple(gens), ref)

    inj = {b.id: -b.load for b in buses}
    for r in c["gen"]:
        inj[int(r[0])] += float(r[1])
    inj[ref] -= sum(inj.values())
    _, flows = solve_dc_flow(full_view(draft), inj)
    rated = [Line(ln.id, ln.from_bus, ln.to_bus, ln.susceptance,
                  float(max(math.ceil(alpha * abs(flows[ln.id])), floor))) for ln in lines]
    return Network(tuple(buses), tuple(rated), tuple(gens), ref)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1.1)
    ap.add_argument("--floor", type=float, default=20.0)
    ap.add_argument("--cost", type=float, default=20.0)
    ap.add_argument("--out", type=Path, default=DATA)
    args = ap.parse_args()
    net = build(args.alpha, args.floor, args.cost)
    legacy = emit_legacy_case(net)
    # the JSON is produced from the written tables so both files describe the same grid
    twin = import_legacy_case(legacy)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "case118.m").write_text(legacy)
    (args.out / "case118.json").write_text(emit_case(twin))
    print(f"{len(net.buses)} buses, {len(net.lines)} lines, {len(net.generators)} generators -> {args.out}")


if __name__ == "__main__":
    main()
