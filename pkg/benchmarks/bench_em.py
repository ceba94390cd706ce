"""Compare the compiled and numpy Euler-Maruyama kernels.

    python3 benchmarks/bench_em.py --paths 2000 --steps 5000

Both backends run the same cellular-flow ensemble; the script reports
wall time, nanoseconds per path-step and how closely the two agree.  For
eps > 0 the flow is chaotic, so libm-level differences grow exponentially
along a path; agreement is reported over the first 0.5 time units and,
at the horizon, through the ensemble displacement variance.
"""

import argparse
import json
import time

import numpy as np

from shearlab import BACKEND, sde


def bench(spec: sde.SdeSpec, backend: str, repeat: int) -> tuple[float, sde.PathEnsemble]:
    best, ens = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        ens = sde.simulate(spec, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, ens


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--nu", type=float, default=0.1)
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="print a JSON record instead of a table")
    args = ap.parse_args(argv)

    spec = sde.SdeSpec("stream", args.nu, 1.0, args.dt, args.steps * args.dt, args.paths, 0, eps=args.eps)
    work = args.paths * args.steps
    rows = {}
    ens = {}
    backends = ["python"] + (["compiled"] if BACKEND == "compiled" else [])
    for b in backends:
        wall, ens[b] = bench(spec, b, args.repeat)
        rows[b] = {"seconds": wall, "ns_per_path_step": 1e9 * wall / work}
    out = {"paths": args.paths, "steps": args.steps, "eps": args.eps, "nu": args.nu, "backends": rows}
    if len(ens) == 2:
        out["speedup"] = rows["python"]["seconds"] / rows["compiled"]["seconds"]
        a, b = ens["python"], ens["compiled"]
        early = a.t <= 0.5 + 1e-12
        out["max_abs_diff_t_le_0.5"] = float(np.max(np.abs(a.pos[:, early] - b.pos[:, early])))
        out["var_x_at_T"] = {k: float(np.var(e.x[:, -1] - e.x[:, 0])) for k, e in ens.items()}

    if args.json:
        print(json.dumps(out, indent=2))
        return
    print(f"{args.paths} paths x {args.steps} steps, stream flow eps={args.eps}, nu={args.nu}")
    for b, r in rows.items():
        print(f"  {b:9s} {r['seconds']:8.3f} s  {r['ns_per_path_step']:7.1f} ns/path-step")
    if "speedup" in out:
        v = out["var_x_at_T"]
        print(f"  speedup {out['speedup']:.2f}x, max |difference| for t <= 0.5: {out['max_abs_diff_t_le_0.5']:.2e}")
        print(f"  Var(X(T)-X(0)): python {v['python']:.4g}, compiled {v['compiled']:.4g}")
    else:
        print("  compiled kernel not built; only the numpy backend was timed")


if __name__ == "__main__":
    main()
