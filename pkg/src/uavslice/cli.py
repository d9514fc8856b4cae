"""Command-line entry point.

    uavslice run --scenario scenarios/default.yaml --seed 3 --algo re2fs --out runs/s3
    uavslice sweep --scenario scenarios/default.yaml --param users=16,32 \
        --param algo=re2fs,suav,cct --seeds 0,1,2 --out runs/sweep --jobs 4

A sweep runs the Cartesian product of every ``--param`` list and every
seed; each combination writes its own sub-directory and one line to
``sweep.csv``.  Runs are independent processes, each single-threaded.
"""

import argparse
import csv
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import scenario as scn_mod
from . import sim

# short CLI names for scenario fields
ALIASES = {"users": "n_users", "uavs": "n_uavs", "algo": "algorithm", "horizon": "horizon",
           "seed": "seed"}


def _base_scenario(path):
    if path:
        return scn_mod.load_scenario(path)
    return scn_mod.default_scenario()


def _apply(scn, overrides):
    changes = {}
    for key, text in overrides.items():
        field = ALIASES.get(key, key)
        changes[field] = scn_mod.coerce(field, text) if isinstance(text, str) else text
    return scn.replace(**changes)


def _run_one(scn, out_dir, quiet=True):
    def progress(t, row):
        if not quiet and (t % 10 == 0 or t == scn.horizon):
            print(f"  t={t:5d}  S_Q={row['s_q']:.3f}  S_Z={row['s_z']:.3f}  "
                  f"S_H={row['s_h']:.3f}  sum_rate={row['sum_rate_mbps']:.2f} Mbps",
                  flush=True)

    metrics = sim.run(scn, progress=progress)
    sim.write_outputs(metrics, out_dir)
    return metrics.summary


def cmd_run(args):
    scn = _base_scenario(args.scenario)
    over = {"seed": str(args.seed), "algo": args.algo}
    for key in ("horizon", "users", "uavs"):
        val = getattr(args, key)
        if val is not None:
            over[key] = str(val)
    for item in args.set or []:
        k, v = _split_assignment(item)
        over[k] = v
    scn = _apply(scn, over)
    print(f"running {scn.algorithm} seed={scn.seed} N={scn.n_users} J={scn.n_uavs} "
          f"T={scn.horizon} -> {args.out}", flush=True)
    s = _run_one(scn, args.out, quiet=args.quiet)
    print(f"energy efficiency {s['energy_efficiency']:.4f}  jain {s['jain_index']:.4f}  "
          f"({s['runtime_s']:.1f} s)")
    return 0


def _split_assignment(text):
    if "=" not in text:
        raise SystemExit(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _sweep_job(job):
    scn, out_dir = job
    s = _run_one(scn, out_dir)
    return {k: s[k] for k in ("algorithm", "seed", "n_users", "n_uavs", "horizon",
                              "energy_efficiency", "jain_index", "utility", "final_s_q",
                              "final_s_z", "final_s_h", "constraint_violations",
                              "runtime_s")} | {"out": out_dir}


def build_sweep(base, params, seeds, out_root):
    names = list(params)
    jobs = []
    for combo in itertools.product(*(params[n] for n in names)):
        for seed in seeds:
            over = dict(zip(names, combo))
            over["seed"] = str(seed)
            scn = _apply(base, over)
            tag = "_".join(f"{n}-{v}" for n, v in zip(names, combo)) or "base"
            jobs.append((scn, os.path.join(out_root, f"{tag}_seed-{seed}")))
    return jobs


def cmd_sweep(args):
    base = _base_scenario(args.scenario)
    params = {}
    for item in args.param or []:
        k, v = _split_assignment(item)
        params[k] = [x for x in v.split(",") if x]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [base.seed]
    if args.horizon is not None:
        base = base.replace(horizon=args.horizon)
    jobs = build_sweep(base, params, seeds, args.out)
    print(f"{len(jobs)} runs, {args.jobs} worker(s)", flush=True)
    os.makedirs(args.out, exist_ok=True)
    if args.jobs <= 1:
        results = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(results[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(results)
    for r in results:
        print(f"{r['out']}: EE {r['energy_efficiency']:.4f}  jain {r['jain_index']:.4f}")
    return 0


def make_parser():
    ap = argparse.ArgumentParser(prog="uavslice", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--scenario", help="YAML scenario file (defaults if omitted)")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--algo", choices=scn_mod.ALGORITHMS, default="re2fs")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--horizon", type=int)
    r.add_argument("--users", type=int)
    r.add_argument("--uavs", type=int)
    r.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any scenario field (repeatable)")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="grid of runs over parameters and seeds")
    s.add_argument("--scenario")
    s.add_argument("--param", action="append", metavar="KEY=V1,V2,...",
                   help="parameter grid, e.g. users=16,32,64 or algo=re2fs,suav")
    s.add_argument("--seeds", help="comma-separated seeds")
    s.add_argument("--horizon", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
