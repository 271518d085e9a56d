"""Command-line pipeline: scenario parsing, solve/shoot/propagate/validate.

Exit codes: 0 success, 1 I/O or usage error, 2 partial success (PSO produced
a guess but no minimum-fuel convergence), 3 non-convergence or validation
failure.
"""

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict

import numpy as np

from .control import optimal_throttle, switching_function
from .errors import LowThrustError, ScenarioFormatError
from .propagation import IntegratorSettings, propagate
from .pso import PsoObjectiveSpec, SwarmConfig, pso_minimize
from .scenarios import Scenario, load_scenario
from .shooting import (ContinuationSchedule, ShootingProblem, SolutionRecord,
                       TrustRegionSettings, continuation_solve,
                       trust_region_solve)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_NO_CONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def count_revolutions(trajectory, center):
    """Winding number of the x-y projected path about center.

    The unwrapped polar angle is accumulated over the whole trajectory and
    floored; the counting convention for published revolution figures is not
    standardized, so treat comparisons as soft.
    """
    xy = trajectory.states[:, 0:2] - np.asarray(center, dtype=float)[:2]
    ang = np.unwrap(np.arctan2(xy[:, 1], xy[:, 0]))
    return int(np.floor(abs(ang[-1] - ang[0]) / (2.0 * np.pi)))


def _record_dict(rec: SolutionRecord):
    d = asdict(rec)
    d["lam0"] = [float(v) for v in rec.lam0]
    return d


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def export_epochs(sol, samples):
    """Dense sample epochs plus every switch node, in time order."""
    base = np.linspace(sol.times[0], sol.times[-1], samples)
    ts = np.concatenate([base, sol.switch_times])
    ts = ts[np.argsort(ts, kind="stable")]
    return ts, sol.sample(ts)


def write_trajectory_csv(path, scenario: Scenario, ts, ys, eps):
    """CSV export; thrust-direction columns are blank while coasting."""
    sc = scenario.spacecraft
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "rx", "ry", "rz", "vx", "vy", "vz", "m",
                    "lr1", "lr2", "lr3", "lv1", "lv2", "lv3", "lm",
                    "S", "u", "ax", "ay", "az"])
        for t, y in zip(ts, ys):
            s = switching_function(y, sc.c_nd)
            u = optimal_throttle(s, eps)
            row = [repr(float(t))] + [repr(float(v)) for v in y]
            row.append(repr(float(s)))
            row.append(repr(float(u)))
            lv = y[10:13]
            lvn = np.linalg.norm(lv)
            if u > 0.0 and lvn > 0.0:
                alpha = -lv / lvn
                row.extend(repr(float(a)) for a in alpha)
            else:
                row.extend(["", "", ""])
            w.writerow(row)


def cmd_propagate(args):
    scenario = load_scenario(args.scenario)
    lam0 = np.array(args.costates, dtype=float)
    y0 = scenario.initial_extended_state(lam0)
    settings = IntegratorSettings()
    sol = propagate(y0, (0.0, scenario.tof), args.epsilon,
                    scenario.spacecraft, settings)
    if sol.halted is not None:
        print(f"propagation halted: {sol.halted}", file=sys.stderr)
        return EXIT_USAGE
    ts, ys = export_epochs(sol, args.samples)
    write_trajectory_csv(args.out, scenario, ts, ys, args.epsilon)
    print(f"wrote {args.out}: {len(ts)} rows "
          f"({args.samples} samples + {len(sol.switch_times)} switch nodes)")
    return EXIT_OK


def _shoot_records(scenario, lam0, epsilon, continue_n, settings=None):
    problem = ShootingProblem.from_scenario(scenario, epsilon)
    tr = settings or TrustRegionSettings()
    if continue_n is None:
        return [trust_region_solve(lam0, problem, tr)]
    schedule = ContinuationSchedule(n_steps=continue_n)
    epsilons = [e for e in schedule.epsilons if e <= epsilon + 1e-15]
    records = []
    guess = lam0
    prev_eps = None
    for eps in epsilons:
        rec = trust_region_solve(guess, problem.with_eps(eps), tr)
        if not rec.converged and prev_eps is not None:
            mid = 0.5 * (prev_eps + eps)
            rec_mid = trust_region_solve(guess, problem.with_eps(mid), tr)
            if rec_mid.converged:
                rec = trust_region_solve(rec_mid.lam0, problem.with_eps(eps),
                                         tr)
        records.append(rec)
        if not rec.converged:
            break
        guess = rec.lam0
        prev_eps = eps
    return records


def cmd_shoot(args):
    scenario = load_scenario(args.scenario)
    lam0 = np.array(args.costates, dtype=float)
    if lam0.shape != (7,) or not np.all(np.isfinite(lam0)):
        print("error: need 7 finite co-state values", file=sys.stderr)
        return EXIT_USAGE
    records = _shoot_records(scenario, lam0, args.epsilon,
                             getattr(args, "continue_n", None))
    for rec in records:
        print("eps=%-10.6f converged=%-5s |e|inf=%.3e delta_m=%.4f kg "
              "switches=%d rank=%d iters=%d"
              % (rec.eps, rec.converged, rec.residual_inf, rec.delta_m_kg,
                 rec.n_switches, rec.jacobian_rank, rec.iterations))
    if args.out:
        _write_json(args.out, [_record_dict(r) for r in records])
    final = records[-1]
    return EXIT_OK if final.converged else EXIT_NO_CONVERGENCE


def cmd_solve(args):
    import os
    scenario = load_scenario(args.scenario)
    try:
        os.makedirs(args.out, exist_ok=True)
        probe = os.path.join(args.out, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        print(f"error: output directory unusable: {exc}", file=sys.stderr)
        return EXIT_USAGE

    config = SwarmConfig(swarm_size=args.swarm_size, rng_seed=args.seed,
                         max_wall_time=args.max_time,
                         propagation_tol=args.pso_tol)
    spec = PsoObjectiveSpec()
    progress_path = os.path.join(args.out, "progress.log")
    t_start = time.time()
    with open(progress_path, "w", encoding="utf-8") as pf:
        def progress(iteration, best, evals, elapsed):
            pf.write(f"{iteration} {best!r} {evals} {elapsed!r}\n")

        pso = pso_minimize(scenario, config, spec, progress=progress)
    pso_elapsed = time.time() - t_start

    t_start = time.time()
    problem = ShootingProblem.from_scenario(scenario, 1.0)
    records = continuation_solve(pso.best_position, problem)
    chain_elapsed = time.time() - t_start

    final = records[-1] if records else None
    solved = final is not None and final.converged and final.eps == 0.0

    record_path = os.path.join(args.out, "solution_records.json")
    _write_json(record_path, [_record_dict(r) for r in records])

    artifacts = {"solution_records": record_path, "progress_log": progress_path}
    if solved:
        traj_path = os.path.join(args.out, "trajectory_minfuel.csv")
        y0 = scenario.initial_extended_state(final.lam0)
        sol = propagate(y0, (0.0, scenario.tof), 0.0, scenario.spacecraft)
        ts, ys = export_epochs(sol, args.samples)
        write_trajectory_csv(traj_path, scenario, ts, ys, 0.0)
        artifacts["trajectory_csv"] = traj_path

    manifest = {
        "scenario": scenario.name,
        "swarm_config": {
            "swarm_size": config.swarm_size,
            "rng_seed": config.rng_seed,
            "max_wall_time": config.max_wall_time,
            "propagation_tol": config.propagation_tol,
            "stall_iterations": config.stall_iterations,
            "stall_tolerance": config.stall_tolerance,
        },
        "pso": {
            "best_value": float(pso.best_value),
            "best_position": [float(v) for v in pso.best_position],
            "iterations": pso.iterations,
            "evaluations": pso.evaluations,
            "stop_reason": pso.stop_reason,
        },
        "continuation": [_record_dict(r) for r in records],
        "timings": {"pso_s": pso_elapsed, "continuation_s": chain_elapsed,
                    "pso_internal_s": pso.elapsed},
        "artifacts": artifacts,
        "outcome": "min-fuel" if solved else (
            "pso-only" if pso.best_value < spec.infeasible_penalty
            else "failed"),
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)

    if solved:
        print(f"minimum-fuel solution: delta_m = {final.delta_m_kg:.4f} kg")
        return EXIT_OK
    if pso.best_value < spec.infeasible_penalty:
        print("continuation incomplete; best PSO guess recorded")
        return EXIT_PARTIAL
    print("no usable PSO result")
    return EXIT_NO_CONVERGENCE


def load_published_solutions():
    import importlib.resources
    res = importlib.resources.files("lowthrust.data") / "published_solutions.json"
    return json.loads(res.read_text(encoding="utf-8"))


def cmd_validate(args):
    entries = load_published_solutions()
    if args.scenario_set != "all":
        entries = [e for e in entries if e["scenario"] == args.scenario_set]
        if not entries:
            print(f"error: no published solutions for {args.scenario_set!r}",
                  file=sys.stderr)
            return EXIT_USAGE
    failures = 0
    lines = []
    for entry in entries:
        scenario = load_scenario(entry["scenario"])
        lam0 = np.array(entry["lam0"], dtype=float)
        rec = _shoot_records(scenario, lam0, 0.0, None)[0]
        ok = rec.converged and abs(rec.delta_m_kg - entry["delta_m_kg"]) \
            <= entry["tol_kg"]
        note = ""
        if ok and entry.get("revolutions") is not None:
            y0 = scenario.initial_extended_state(rec.lam0)
            sol = propagate(y0, (0.0, scenario.tof), 0.0, scenario.spacecraft)
            revs = count_revolutions(sol, (-scenario.constants.mu, 0.0, 0.0))
            if revs != entry["revolutions"]:
                note = (f" (soft: winding {revs} vs published "
                        f"{entry['revolutions']})")
        failures += not ok
        lines.append("%-12s %-4s delta_m=%9.4f kg (published %7.2f +/- %.1f)"
                     " |e|inf=%.2e%s"
                     % (entry["name"], "PASS" if ok else "FAIL",
                        rec.delta_m_kg, entry["delta_m_kg"], entry["tol_kg"],
                        rec.residual_inf, note))
    report = "\n".join(lines)
    print(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report + "\n")
    return EXIT_NO_CONVERGENCE if failures else EXIT_OK


def build_parser():
    p = _Parser(prog="lowthrust",
                description="Low-thrust minimum-fuel CR3BP transfers by "
                            "PSO-initialized indirect shooting")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="full pipeline: PSO then continuation")
    ps.add_argument("--scenario", required=True)
    ps.add_argument("--swarm-size", type=int, default=500)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--max-time", type=float, default=1800.0,
                    help="PSO wall-time cap [s]")
    ps.add_argument("--pso-tol", type=float, default=1e-12,
                    help="propagation tolerance during the swarm phase")
    ps.add_argument("--samples", type=int, default=2000)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_solve)

    sh = sub.add_parser("shoot", help="single shooting from given co-states")
    sh.add_argument("--scenario", required=True)
    sh.add_argument("--costates", type=float, nargs=7, required=True)
    sh.add_argument("--epsilon", type=float, required=True)
    sh.add_argument("--continue", dest="continue_n", type=int, default=None,
                    help="run the full continuation schedule with N steps")
    sh.add_argument("--out", default=None)
    sh.set_defaults(func=cmd_shoot)

    pr = sub.add_parser("propagate", help="export a trajectory as CSV")
    pr.add_argument("--scenario", required=True)
    pr.add_argument("--costates", type=float, nargs=7, required=True)
    pr.add_argument("--epsilon", type=float, required=True)
    pr.add_argument("--samples", type=int, default=2000)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_propagate)

    va = sub.add_parser("validate", help="re-converge published solutions")
    va.add_argument("--scenario-set", default="all")
    va.add_argument("--out", default=None)
    va.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except (ScenarioFormatError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except LowThrustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_NO_CONVERGENCE
    return code


if __name__ == "__main__":
    sys.exit(main())
