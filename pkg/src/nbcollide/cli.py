"""Command-line entry point: ``nbcollide <subcommand>``.

Subcommands
-----------
simulate   integrate (or shoot) a scenario to collision; trajectory CSV + summary JSON
rates      collision-rate and perturbation-decay report for a trajectory or scenario
cc         enumerate central configurations for given masses
segment    isolating-segment verification (``--self-test`` for the linear saddle)
spin       spin-tail table of a trajectory or scenario

Every failure exits nonzero and emits a JSON object with ``status`` and
``reason`` on standard error (and in the output file where one is due).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import io as nio
from .analysis import analyze_collapse, restpoint_segment, spin_report
from .blowup import mcgehee_observables
from .cc import CCSolveError, enumerate_cc, shape_distance, solve_cc
from .config import ConfigError, RunConfig, load_config, preset_config
from .coords import ChartError, best_order, jacobi_forward, to_real
from .scenarios import PRESETS, run_scenario
from .segment import SegmentError, linear_saddle_selftest

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class CLIFailure(Exception):
    def __init__(self, reason: str, code: int = EXIT_RUNTIME, payload: Optional[dict] = None):
        super().__init__(reason)
        self.reason = reason
        self.code = code
        self.payload = payload or {}


def _global_flags(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON run configuration (schema 1)")
    p.add_argument("--out", default=d if suppress else ".", help="output directory (default: .)")
    p.add_argument("--precision", choices=("double", "dd"), default=d,
                   help="working precision: double or dd (extended, default)")
    p.add_argument("--seed", type=int, default=d if suppress else None, help="seed for sampled checks")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nbcollide", description="Partial collisions in the planar n-body problem.")
    _global_flags(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run a scenario to collision")
    s.add_argument("--preset", action="append", choices=sorted(PRESETS), help="named scenario (repeatable)")
    s.add_argument("extra_configs", nargs="*", metavar="CONFIG", help="further configurations for a batch")
    s.add_argument("--jobs", type=int, default=1, help="parallel jobs for batches")

    r = sub.add_parser("rates", parents=[common], help="verify collision rates")
    r.add_argument("--traj", help="trajectory CSV written by simulate")
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--A-reference", type=float, dest="A_reference", help="closed-form A for ratio checks")
    r.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"), help="window of T - t")

    c = sub.add_parser("cc", parents=[common], help="enumerate central configurations")
    c.add_argument("--masses", required=True, help="comma-separated masses, e.g. 1,1,1")
    c.add_argument("--multistart", type=int, default=256, help="number of Newton starts")
    c.add_argument("--relabel", action="store_true", help="identify configurations up to relabelling")

    g = sub.add_parser("segment", parents=[common], help="isolating-segment verification")
    g.add_argument("--self-test", action="store_true", help="linear-saddle closed-form check")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--R", type=float, help="radius of the cone-constant ball")

    sp = sub.add_parser("spin", parents=[common], help="spin-tail table")
    sp.add_argument("--traj", help="trajectory CSV written by simulate")
    sp.add_argument("--preset", choices=sorted(PRESETS))
    return p


# ---------------------------------------------------------------- helpers

def _run_config(args, preset_name=None) -> RunConfig:
    try:
        if args.config:
            if preset_name:
                raise CLIFailure("give either --config or --preset", EXIT_USAGE)
            return load_config(args.config, args.precision, args.seed)
        if preset_name:
            return preset_config(preset_name, args.precision, args.seed)
    except ConfigError as e:
        raise CLIFailure(f"config error: {e}", EXIT_USAGE, {"field": e.field}) from None
    except OSError as e:
        raise CLIFailure(f"cannot read config: {e}", EXIT_USAGE) from None
    raise CLIFailure("no scenario: pass --config or --preset", EXIT_USAGE)


def _outdir(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _terminal_cc_distance(traj):
    g = list(traj.part.focus)
    if len(g) < 3:
        return None
    m = np.asarray(traj.masses[g], float)
    q = traj.q[-1][g]
    q = np.asarray(q - q.mean(0), float)
    try:
        order = best_order(q, m)
        fr = jacobi_forward(q, m, order)
        cc = solve_cc(to_real(fr.z[:-1] / fr.z[-1]), m, order)
    except (CCSolveError, ChartError, np.linalg.LinAlgError) as e:
        return {"error": str(e)}
    return {"distance": shape_distance(q, cc.normalized_q, m), "lambda": cc.lam, "residual": cc.residual}


def _simulate_one(rc: RunConfig, outdir: Path) -> dict:
    from .asymptotics import FitError, estimate_T_L

    sc = rc.scenario
    summary = {"scenario": sc.name, "precision": rc.precision, "masses": sc.masses,
               "cluster": list(sc.part.focus), "status": "failure"}
    try:
        run = run_scenario(sc)
    except Exception as e:  # embed the failure, keep going
        summary["reason"] = f"{type(e).__name__}: {e}"
        nio.write_json(summary, outdir / rc.output["summary"])
        return summary
    tr = run.trajectory
    nio.write_trajectory_csv(tr, outdir / rc.output["trajectory"])
    rG = tr.r_G()
    summary.update({"status": tr.status, "reason": tr.reason, "samples": len(tr), "terminal_r_G": float(rG[-1]),
                    "terminal_r_G_ratio": float(rG[-1] / rG[0]), "t_end": float(tr.t[-1])})
    if run.param is not None:
        summary["shooting_param"] = float(run.param)
        summary["shift"] = [float(x) for x in run.shift]
    if tr.collided:
        try:
            est = estimate_T_L(tr)
            summary.update({"T_est": float(est.T), "T_uncertainty": est.T_uncertainty,
                            "L_G": [float(x) for x in est.L_G], "L_uncertainty": est.L_uncertainty})
        except FitError as e:
            summary["status"] = "failure"
            summary["reason"] = f"collision time fit failed: {e}"
        if rc.analysis.get("cc_residual", True):
            summary["terminal_cc_distance"] = _terminal_cc_distance(tr)
    if sc.T_reference is not None:
        summary["T_reference"] = sc.T_reference
    nio.write_json(summary, outdir / rc.output["summary"])
    return summary


def _simulate_job(job):
    path, name, precision, seed, outdir = job
    rc = load_config(path, precision, seed) if path else preset_config(name, precision, seed)
    return _simulate_one(rc, Path(outdir))


# ---------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    out = _outdir(args)
    configs = ([args.config] if args.config else []) + list(args.extra_configs)
    presets = args.preset or []
    if not configs and not presets:
        raise CLIFailure("no scenario: pass --config or --preset", EXIT_USAGE)
    jobs = [(c, None) for c in configs] + [(None, p) for p in presets]
    # validate everything before running anything
    rcs = []
    for path, name in jobs:
        try:
            rcs.append(load_config(path, args.precision, args.seed) if path else
                       preset_config(name, args.precision, args.seed))
        except ConfigError as e:
            raise CLIFailure(f"config error in {path or name}: {e}", EXIT_USAGE, {"field": e.field}) from None
        except OSError as e:
            raise CLIFailure(f"cannot read config: {e}", EXIT_USAGE) from None
    if len(rcs) == 1:
        summaries = [_simulate_one(rcs[0], out)]
    else:
        dirs = []
        for i, rc in enumerate(rcs):
            d = out / f"{i:02d}_{rc.scenario.name}"
            d.mkdir(parents=True, exist_ok=True)
            dirs.append(d)
        work = [(p, n, args.precision, args.seed, str(d)) for (p, n), d in zip(jobs, dirs)]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                summaries = list(ex.map(_simulate_job, work))
        else:
            summaries = [_simulate_job(w) for w in work]
    for s in summaries:
        line = f"{s['scenario']:<22} {s['status']:<14}"
        if "T_est" in s:
            line += f" T_est={s['T_est']:.15g} r_G={s['terminal_r_G']:.3e}"
        else:
            line += f" {s.get('reason', '')}"
        print(line)
    return EXIT_OK if all(s["status"] == "collision" for s in summaries) else EXIT_RUNTIME


def _trajectory_from(args):
    """Trajectory plus scenario-provided reference values."""
    if getattr(args, "traj", None):
        if args.config or args.preset:
            raise CLIFailure("give either --traj or a scenario", EXIT_USAGE)
        try:
            return nio.read_trajectory_csv(args.traj), None, None
        except (OSError, ValueError, KeyError) as e:
            raise CLIFailure(f"cannot read trajectory: {e}", EXIT_USAGE) from None
    rc = _run_config(args, args.preset)
    try:
        run = run_scenario(rc.scenario)
    except Exception as e:
        raise CLIFailure(f"{type(e).__name__}: {e}") from None
    if not run.trajectory.collided:
        raise CLIFailure(f"run did not reach collision: {run.trajectory.reason}")
    return run.trajectory, rc, rc.scenario.A_reference


def cmd_rates(args) -> int:
    from .asymptotics import FitError

    traj, rc, A_ref = _trajectory_from(args)
    A_ref = args.A_reference if args.A_reference is not None else A_ref
    window = tuple(args.window) if args.window else tuple(rc.analysis["window"]) if rc else (1e-8, 1e-4)
    out = _outdir(args)
    fname = rc.output["rates"] if rc else "rates.json"
    try:
        an = analyze_collapse(traj, A_ref, window)
    except FitError as e:
        raise CLIFailure(f"insufficient window: {e}", EXIT_FAILED_CHECK, {"file": str(out / fname)}) from None
    rep = an.rates
    print(f"A_hat = {rep.A_hat:.10g}   A_reference = {rep.A_reference:.10g}   window = {window}")
    print(f"{'limit':<22} {'expected':>14} {'fitted':>14} {'max rel dev':>12}")
    for name, ck in rep.ratio_checks.items():
        print(f"{name:<22} {ck.expected:>14.8g} {ck.limit:>14.8g} {ck.max_rel_dev:>12.3e}")
    print(f"{'exponent':<22} {'fitted':>14}")
    for name, f in rep.exponents.items():
        print(f"{name:<22} {f.exponent:>14.8f}")
    print(f"mu bound {rep.mu_bound:.4g} (slope {rep.mu_residual_slope:+.2e})   "
          f"mudot bound {rep.mudot_bound:.4g} (slope {rep.mudot_residual_slope:+.2e})")
    print(f"H_G limit {rep.H_G_limit:.10g}  oscillation {rep.H_G_oscillation:.3e}   "
          f"cc residual tail {rep.cc_residual_tail:.3e}")
    for name, ch in an.chains.items():
        print(f"decay {name:<14} E={ch['E']:.5g} ratio={ch['ratio']:.4f} {'ok' if ch['ok'] else 'FAIL'}")
    payload = {"status": "ok", **an.to_dict()}
    nio.write_json(payload, out / fname)
    return EXIT_OK


def cmd_cc(args) -> int:
    try:
        masses = np.array([float(x) for x in args.masses.split(",")])
    except ValueError:
        raise CLIFailure(f"--masses: cannot parse {args.masses!r}", EXIT_USAGE) from None
    if masses.size < 3 or np.any(masses <= 0) or not np.all(np.isfinite(masses)):
        raise CLIFailure("--masses: need at least three positive masses", EXIT_USAGE)
    if args.multistart < 1:
        raise CLIFailure("--multistart must be positive", EXIT_USAGE)
    seed = args.seed or 0
    cat = enumerate_cc(masses, args.multistart, seed=seed, modulo_relabeling=args.relabel)
    print(f"{'#':>3} {'lambda':>20} {'residual':>10} {'degenerate':>10}")
    for i, c in enumerate(cat):
        print(f"{i:>3} {c.lam:>20.15g} {c.residual:>10.2e} {str(c.degenerate):>10}")
    out = _outdir(args)
    nio.write_json({"masses": masses, "multistart": args.multistart, "seed": seed, "relabel": args.relabel,
                    "catalog": [c.to_dict() for c in cat]}, out / "cc.json")
    return EXIT_OK if cat else EXIT_FAILED_CHECK


def cmd_segment(args) -> int:
    out = _outdir(args)
    seed = args.seed or 0
    if args.self_test:
        res = linear_saddle_selftest(seed=seed)
        rep = res["report"]
        payload = {"status": "ok" if rep.verified else "failure", "case": "linear_saddle",
                   "cone": res["cone"].to_dict(), "report": _report_summary(rep),
                   "closed_form_deviation": res["closed_form_deviation"]}
        fname = "segment.json"
    else:
        rc = _run_config(args, args.preset)
        seg = dict(rc.segment)
        if args.R is not None:
            seg["R"] = args.R
        try:
            run = run_scenario(rc.scenario)
            an = analyze_collapse(run.trajectory, rc.scenario.A_reference, tuple(rc.analysis["window"]))
            cone, rep = restpoint_segment(an.blowup, an.perturbation, seg["R"], seg["gamma"], seg["slices"],
                                          seg["boundary_samples"], seed)
        except (SegmentError, ValueError, RuntimeError) as e:
            raise CLIFailure(f"{type(e).__name__}: {e}") from None
        payload = {"status": "ok" if rep.verified else "failure", "case": rc.scenario.name,
                   "cone": cone.to_dict(), "cone_condition": cone.holds, "report": _report_summary(rep)}
        if not rep.verified:
            payload["reason"] = "sampled exit/entry conditions violated"
        fname = rc.output["segment"]
    nio.write_json(payload, out / fname)
    r = payload["report"]
    print(f"{payload['case']}: verified={r['verified']} min_exit={r['min_exit_margin']:.3e} "
          f"max_entry={r['max_entry_margin']:.3e} t_U={r['t_U']:.4g} direct_t0={r['direct_t0']:.4g}")
    return EXIT_OK if r["verified"] else EXIT_FAILED_CHECK


def _report_summary(rep):
    d = rep.to_dict()
    d.pop("slices", None)
    return d


def cmd_spin(args) -> int:
    traj, rc, _ = _trajectory_from(args)
    bs = mcgehee_observables(traj)
    floor = float(bs.mu[-1]) if traj.part.external else 0.0
    rep = spin_report(bs, floor)
    print(f"{'tau/2':>12} {'tau':>12} {'S(tau)-S(tau/2)':>18}")
    for lo, hi, tail in rep["rows"]:
        print(f"{lo:>12.5g} {hi:>12.5g} {tail:>18.6e}")
    print(f"total spin {rep['total']:.6e}; tails halve per doubling: {rep['decreasing']}")
    out = _outdir(args)
    nio.write_json({"status": "ok", "mu_floor": floor, **rep}, out / (rc.output["spin"] if rc else "spin.json"))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "rates": cmd_rates, "cc": cmd_cc, "segment": cmd_segment, "spin": cmd_spin}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CLIFailure as e:
        payload = {"status": "failure", "reason": e.reason, **{k: v for k, v in e.payload.items() if k != "file"}}
        sys.stderr.write(nio.dumps(payload))
        if "file" in e.payload:
            try:
                nio.write_json(payload, e.payload["file"])
            except OSError:
                pass
        return e.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
