"""Command line entry point: ``crossdiff {simulate, sweep, check-xi, check-hypothesis} --config FILE``.

Exit codes: 0 ok, 1 configuration error, 2 solver failure, 3 invariant violation.
Outputs go to ``--out`` or, if absent, to $CROSSDIFF_OUTPUT_DIR (default ./crossdiff_out).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, Scenario, build_safely, parse_config
from .diagnostics import gronwall_monitor, invariant_summary
from .initdata import check_compatibility
from .pressure import LOGARITHMIC, check_hypothesis
from .solver import SchemeFailure, StateError, run
from .weakcheck import TestFunction, l1_distance, weak_residual
from .xi import XiEvaluationError, XiEvaluator

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_INVARIANT = 3

OUTPUT_ENV = "CROSSDIFF_OUTPUT_DIR"
XI_ETAS = (0.0, 0.01, 0.1, 1.0)
ODE_TOL = 1e-5

log = logging.getLogger("crossdiff")


def _out_dir(args, scenario: Scenario, sub: str) -> Path:
    root = Path(args.out or os.environ.get(OUTPUT_ENV, "crossdiff_out"))
    path = root / scenario.name / sub
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> Scenario:
    return parse_config(args.config)


def cmd_simulate(args) -> int:
    scenario = _load(args)
    cfg = build_safely(scenario)
    out = _out_dir(args, scenario, "simulate")
    compat = check_compatibility(cfg.initial, cfg.potentials, cfg.law, cfg.eta)
    traj = run(cfg)
    io.write_snapshots(out / "snapshots.csv", traj)
    io.write_diagnostics(out / "diagnostics.jsonl", traj.records)
    io.write_summary_csv(out / "summary.csv", traj.records)
    summary = invariant_summary(traj)
    report = {
        "scenario": scenario.name,
        "invariants": summary,
        "compatibility": compat.to_dict(),
        "steps": traj.log.steps,
        "clipped_cells": int(traj.log.clipped.sum()),
    }
    if len(traj.records) >= 2:
        report["gronwall"] = gronwall_monitor(traj).to_dict()
    io.write_json(out / "invariants.json", report)
    failed = [k for k, v in summary.items() if isinstance(v, dict) and not v["passed"]]
    print(f"simulate {scenario.name}: {traj.log.steps} steps, output in {out}")
    if failed:
        print("invariant violations: " + ", ".join(failed))
        return EXIT_INVARIANT
    return EXIT_OK


def _sweep_member(scenario: Scenario, eta: float, n: int, snapshots: int):
    cfg = scenario.build(eta=eta, n=n)
    if scenario.T > 0:
        cfg.output_every = scenario.T / snapshots
    return run(cfg)


def _parse_list(text, kind):
    return [kind(v) for v in text.replace(",", " ").split()] if text else None


def cmd_sweep(args) -> int:
    scenario = _load(args)
    etas = _parse_list(args.etas, float) or scenario.sweep_etas
    grids = _parse_list(args.grids, int) or scenario.sweep_grids
    if len(grids) == 1 and len(etas) > 1:
        grids = grids * len(etas)
    if not etas or len(etas) != len(grids):
        raise ConfigError(["sweep: eta and grid lists must be nonempty and of equal length"])
    modes = args.modes if args.modes is not None else scenario.sweep_modes
    for eta, n in zip(etas, grids):
        build_safely(scenario, eta=eta, n=n, diagnostics=False)  # validate before spending time
    out = _out_dir(args, scenario, "sweep")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            trajs = list(pool.map(_sweep_member, [scenario] * len(etas), etas, grids, [args.snapshots] * len(etas)))
    else:
        trajs = [_sweep_member(scenario, e, n, args.snapshots) for e, n in zip(etas, grids)]
    rows, diag = [], []
    for eta, n, traj in zip(etas, grids, trajs):
        best = 0.0
        for k in range(modes + 1):
            r = max(weak_residual(traj, TestFunction(k, scenario.T, scenario.L), sp, False) for sp in (1, 2))
            rows.append((eta, n, k, r))
            best = max(best, r)
        diag.append(best)
    io.write_rows(out / "sweep.csv", io.SWEEP_COLUMNS, rows)
    cauchy = [(etas[k], etas[k + 1], l1_distance(trajs[k], trajs[k + 1])) for k in range(len(trajs) - 1)]
    io.write_rows(out / "cauchy.csv", io.CAUCHY_COLUMNS, cauchy)
    summaries = [invariant_summary(t) for t in trajs]
    residual_trend = all(b < a for a, b in zip(diag, diag[1:]))
    cauchy_trend = all(b[2] < a[2] for a, b in zip(cauchy, cauchy[1:]))
    io.write_json(out / "sweep_summary.json", {
        "etas": etas, "grids": grids, "max_residual": diag, "cauchy": cauchy,
        "residual_decreasing": residual_trend, "cauchy_decreasing": cauchy_trend,
        "invariants_passed": [s["passed"] for s in summaries],
    })
    verdict = "PASS" if residual_trend and cauchy_trend else "FAIL"
    print(f"{verdict}: max weak residual {', '.join(f'{d:.3e}' for d in diag)}; "
          f"L1 Cauchy {', '.join(f'{c[2]:.3e}' for c in cauchy)}")
    return EXIT_OK if all(s["passed"] for s in summaries) else EXIT_INVARIANT


def cmd_check_xi(args) -> int:
    scenario = _load(args)
    law = scenario.law
    s = np.logspace(-2, 2, args.samples)
    etas = sorted(set(XI_ETAS) | {scenario.eta})
    out = _out_dir(args, scenario, "check_xi")
    results, ok = [], True
    for eta in etas:
        ev = XiEvaluator(law, eta, scenario.tail_cutoff, scenario.quad_tol)
        bounds = ev.verify_bounds(s)
        ode = float(np.max(np.abs(ev.ode_residual(s))))
        entry = {"eta": eta, "ode_residual_max": ode, "ode_ok": ode < ODE_TOL, "bounds": bounds.to_dict()}
        if eta == 0.0 and law.kind != LOGARITHMIC:
            rel = float(np.max(np.abs(ev.xi_quad(s) / ev.xi(s) - 1.0)))
            entry["closed_form_vs_quadrature"] = rel
        good = entry["ode_ok"] and bounds.passed
        ok = ok and good
        results.append(entry)
        print(f"eta={eta:<6g} ode max |res|={ode:.2e}  bounds {'pass' if bounds.passed else 'FAIL'}")
    io.write_json(out / "xi_check.json", {"law": law.kind, "results": results, "passed": ok})
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_check_hypothesis(args) -> int:
    scenario = _load(args)
    rep = check_hypothesis(scenario.law, np.logspace(-2, 2, args.samples))
    out = _out_dir(args, scenario, "check_hypothesis")
    io.write_json(out / "hypothesis.json", {"law": scenario.law.kind, "kappa": scenario.law.kappa, **rep.to_dict()})
    print(f"{scenario.law.kind}: {'pass' if rep.passed else 'FAIL'} (worst growth margin {rep.worst_growth_margin:.3g}, "
          f"worst ratio margin {rep.worst_ratio_margin:.3g})")
    return EXIT_OK if rep.passed else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crossdiff", description="two-species cross-diffusion simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./crossdiff_out)")

    sp = sub.add_parser("simulate", help="run one scenario")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="joint (eta, n) refinement with weak residuals and L1 Cauchy distances")
    common(sp)
    sp.add_argument("--etas", default=None, help="comma or space separated viscosities")
    sp.add_argument("--grids", default=None, help="comma or space separated cell counts")
    sp.add_argument("--modes", type=int, default=None)
    sp.add_argument("--snapshots", type=int, default=200, help="snapshots per run used by the time quadrature")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("check-xi", help="ODE residual and bound battery for xi_eta")
    common(sp)
    sp.add_argument("--samples", type=int, default=100)
    sp.set_defaults(func=cmd_check_xi)

    sp = sub.add_parser("check-hypothesis", help="sample the structural conditions on f")
    common(sp)
    sp.add_argument("--samples", type=int, default=200)
    sp.set_defaults(func=cmd_check_hypothesis)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemeFailure, StateError, FloatingPointError, XiEvaluationError) as exc:
        t = getattr(exc, "t", None)
        where = f" at t={t:.6g}" if t is not None else ""
        print(f"solver failure{where}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
