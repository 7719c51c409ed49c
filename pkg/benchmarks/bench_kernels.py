"""Time the hot kernels with numba on and off.

Each mode runs in its own interpreter because the switch is read at import:

    python3 benchmarks/bench_kernels.py            # both modes, side by side
    python3 benchmarks/bench_kernels.py --child    # one mode, JSON to stdout
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best_of(fn, repeat: int) -> float:
    fn()  # warm-up (includes JIT compilation)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def child(repeat: int) -> dict:
    from commexplore._jit import NUMBA_ENABLED
    from commexplore.instances import lattice_lcp, random_figop, random_mesh_snr
    from commexplore.kernels import all_pairs_widest
    from commexplore.planner import gls_solve, lcp_plan

    li = lattice_lcp(0)
    figs = [random_figop(s) for s in range(20)]
    mesh = random_mesh_snr(0, max_radios=7)
    big = np.where(np.random.default_rng(1).random((60, 60)) < 0.3, 30.0, -np.inf)
    big = np.maximum(big, big.T)

    cases = {
        "lcp_plan_512x5": lambda: lcp_plan(li.irm, li.belief, None, li.params, np.random.default_rng(0),
                                           li.start, li.coverage),
        "gls_solve_20_instances": lambda: [gls_solve(f, 0.99, 2000, np.random.default_rng(0)) for f in figs],
        "widest_7": lambda: all_pairs_widest(mesh),
        "widest_60": lambda: all_pairs_widest(big),
    }
    return {"numba": NUMBA_ENABLED, "seconds": {k: _best_of(f, repeat) for k, f in cases.items()}}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--child", action="store_true")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if args.child:
        print(json.dumps(child(args.repeat)))
        return
    rows = {}
    for flag in ("0", "1"):
        env = dict(os.environ, COMMEXPLORE_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--child", "--repeat", str(args.repeat)],
                             env=env, capture_output=True, text=True, check=True)
        rows["python" if flag == "1" else "numba"] = json.loads(out.stdout)["seconds"]
    print(f"{'kernel':<26}{'numba [ms]':>12}{'python [ms]':>13}{'speed-up':>10}")
    for k in rows["numba"]:
        a, b = rows["numba"][k] * 1e3, rows["python"][k] * 1e3
        print(f"{k:<26}{a:>12.3f}{b:>13.3f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
