"""Command line: ``commexplore run|validate|replay|oracle``.

Exit codes: 0 success, 2 invalid input (scenario, overrides, log format),
3 runtime or I/O failure (including a failed replay).
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _cmd_run(args) -> int:
    from .harness import run
    from .scenario import ScenarioError

    try:
        report = run(args.scenario, args.override, args.seed, args.out, args.duration, args.dt)
    except (ScenarioError, KeyError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except OSError as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    except RuntimeError as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    summary = {k: report.to_dict()[k] for k in ("scenario", "seed", "ticks", "final_coverage",
                                                "time_to_coverage_90_s", "digest")}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .harness import prepare
    from .scenario import ScenarioError

    try:
        sc, _ = prepare(args.scenario, args.override)
    except (ScenarioError, KeyError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except OSError as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    print(f"ok: {len(sc.world)} nodes, {len(sc.robots)} robot(s)")
    return EXIT_OK


def _cmd_replay(args) -> int:
    from .harness import ReplayParseError, replay_check

    try:
        verdict = replay_check(args.log)
    except ReplayParseError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except OSError as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    print(json.dumps({"ok": verdict.ok, "first_divergent_tick": verdict.first_divergent_tick,
                      "reason": verdict.reason}))
    return EXIT_OK if verdict.ok else EXIT_RUNTIME


def _oracle_figop(n: int, seed: int) -> dict:
    from .config import PlannerParams
    from .instances import random_figop
    from .oracles import figop_brute_force
    from .planner import figop_score, gls_solve

    iters = PlannerParams().gls_iterations
    ratios = []
    for k in range(n):
        inst = random_figop(seed + k)
        got = figop_score(inst, gls_solve(inst, 0.99, iters, np.random.default_rng(seed + k)), 0.99)
        opt, _ = figop_brute_force(inst.times.tolist(), inst.prizes.tolist(), inst.budget, 0.99)
        ratios.append(got / opt if opt > 0 else 1.0)
    return {"instances": n, "min_ratio": min(ratios), "mean_ratio": float(np.mean(ratios))}


def _oracle_widest(n: int, seed: int) -> dict:
    from .instances import random_mesh_snr
    from .kernels import all_pairs_widest
    from .oracles import widest_path_brute_force

    worst = 0.0
    for k in range(n):
        m = random_mesh_snr(seed + k)
        w = all_pairs_widest(m)
        for s in range(1, len(m)):
            ref = widest_path_brute_force(m.tolist(), s, 0)
            if ref != w[s, 0]:
                worst = max(worst, abs(ref - w[s, 0]) if np.isfinite(ref) else np.inf)
    return {"instances": n, "max_abs_error_db": worst}


def _oracle_lcp(n: int, seed: int) -> dict:
    from .instances import lattice_lcp
    from .oracles import lcp_exhaustive
    from .planner import lcp_plan

    ratios = []
    for k in range(n):
        li = lattice_lcp(seed + k)
        pol = lcp_plan(li.irm, li.belief, None, li.params, np.random.default_rng(seed + k), li.start, li.coverage)
        o = li.oracle_inputs()
        opt, _ = lcp_exhaustive(o["adj"], o["times"], o["footprint"], o["probs"], li.belief.eps_cov, li.start,
                                li.params.horizon, li.params.gamma, li.params.lambda_cost)
        ratios.append(pol.utility / opt if opt > 0 else 1.0)
    return {"instances": n, "min_ratio": min(ratios), "mean_ratio": float(np.mean(ratios))}


_ORACLES = {"figop": (_oracle_figop, 200), "widest": (_oracle_widest, 100), "lcp": (_oracle_lcp, 20)}


def _cmd_oracle(args) -> int:
    fn, default_n = _ORACLES[args.which]
    t0 = time.perf_counter()
    out = fn(args.instances or default_n, args.seed)
    out["which"] = args.which
    out["seconds"] = round(time.perf_counter() - t0, 3)
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="commexplore", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    def scenario_args(p, full: bool):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--override", nargs="*", default=[], metavar="KEY=VALUE",
                       help="parameter overrides such as mission.wait_timeout_s=30")
        if full:
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--duration", type=float, default=None, help="simulated seconds")
            p.add_argument("--dt", type=float, default=None, help="tick length in seconds")
            p.add_argument("--out", default=None, help="directory for report and logs")

    p = sub.add_parser("run", help="simulate a scenario")
    scenario_args(p, True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a scenario file and overrides")
    scenario_args(p, False)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("replay", help="verify an events.jsonl by re-execution")
    p.add_argument("log")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("oracle", help="compare solvers with brute-force references")
    p.add_argument("which", choices=sorted(_ORACLES))
    p.add_argument("--instances", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
