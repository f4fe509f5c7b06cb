"""Rebuild the small paradox grids by template search and refresh the stored results.

    python scripts/search_figures.py                  # all four figures
    python scripts/search_figures.py fig3 --max-layouts 200
    python scripts/search_figures.py --fallbacks      # regenerate fallback certificates too

Found instances go to src/toposwitch/data/<figure>.json; every run's outcome
(found / exhausted / budget hit, with search statistics) is merged into
data/search_log.json.
"""
import argparse
import json
import time
from pathlib import Path

from toposwitch.figures import TEMPLATES
from toposwitch.grid import emit_case
from toposwitch.paradox import KINDS, SearchStats, find_certificate, search_instance

DATA = Path(__file__).resolve().parents[1] / "src" / "toposwitch" / "data"


def run_search(name: str, max_layouts: int | None) -> dict:
    stats = SearchStats()
    t0 = time.perf_counter()
    net = search_instance(TEMPLATES[name], max_layouts=max_layouts, stats=stats)
    elapsed = time.perf_counter() - t0
    if net is not None:
        (DATA / f"{name}.json").write_text(emit_case(net))
        outcome = "found"
    elif max_layouts is not None and stats.layouts >= max_layouts:
        outcome = "budget"
    else:
        outcome = "exhausted"
    print(f"{name}: {outcome} after {elapsed:.1f}s, {stats}")
    return {"outcome": outcome, "seconds": round(elapsed, 1), "layouts": stats.layouts,
            "lp_solves": stats.lp_solves, "leaves": stats.leaves, "max_layouts": max_layouts}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("figures", nargs="*", default=sorted(TEMPLATES))
    ap.add_argument("--max-layouts", type=int)
    ap.add_argument("--fallbacks", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    log_path = DATA / "search_log.json"
    log = json.loads(log_path.read_text()) if log_path.exists() else {}
    for name in args.figures:
        log[name] = run_search(name, args.max_layouts)
        log_path.write_text(json.dumps(log, indent=1, sort_keys=True) + "\n")

    if args.fallbacks:
        out = DATA / "certificates"
        out.mkdir(exist_ok=True)
        for kind in KINDS:
            cert = find_certificate(kind, args.seed)
            if cert is None:
                print(f"{kind}: no fallback certificate within the try budget")
                continue
            (out / f"{kind}.json").write_text(cert.to_json() + "\n")
            print(f"{kind}: {len(cert.instance.lines)}-line certificate written")


if __name__ == "__main__":
    main()
