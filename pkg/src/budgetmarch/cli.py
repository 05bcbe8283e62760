"""Scenario runner and exporter.

Subcommands: run, compare-fronts, convergence-table, trace, visibility.
Exit codes: 0 success, 2 validation failure, 3 numerical failure.
BUDGETMARCH_WORKERS bounds the number of threads used by the slice kernels.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from . import __version__
from .convergence import convergence_table, parse_spacing
from .core import validate_problem
from .errors import (BudgetMarchError, SweepConvergenceError,
                     TraversalLimitError, TrajectoryError, ValidationError)
from .figures import convergence_figure, field_figure, front_figure
from .io_formats import (write_field_csv, write_front_csv, write_manifest,
                         write_mask_csv, write_mask_pgm, write_pgm,
                         write_slice_csv, write_trajectory_csv)
from .pareto import WeightMesh, compare_fronts as run_compare_fronts
from .pipeline import solve_problem
from .scenarios import load_scenario, shipped_scenarios
from .trajectory import follow_constrained, follow_static
from .visibility import ray_visibility_oracle

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _apply_workers():
    workers = os.environ.get("BUDGETMARCH_WORKERS")
    if workers:
        import numba

        numba.set_num_threads(max(1, int(workers)))


def _overrides_from_args(args) -> dict:
    ov = {}
    if getattr(args, "n", None):
        ov["grid.n"] = args.n
    if getattr(args, "h", None):
        ov["grid.n"] = int(round(1.0 / parse_spacing(args.h))) + 1
    if getattr(args, "budget_counts", None):
        ov["budgets.counts"] = [int(c) for c in args.budget_counts.split(",")]
    if getattr(args, "budget_bounds", None):
        ov["budgets.bounds"] = [float(b) for b in args.budget_bounds.split(",")]
    if getattr(args, "algorithm", None):
        ov["march.algorithm"] = args.algorithm
    for item in getattr(args, "set", None) or []:
        key, _, value = item.partition("=")
        try:
            import ast

            ov[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            ov[key] = value
    return ov


def _load(args):
    scen = load_scenario(args.scenario, _overrides_from_args(args))
    if getattr(args, "db", None):
        db = parse_spacing(args.db)
        bounds = scen.problem.budgets.bounds
        counts = tuple(int(round(b / db)) + 1 for b in bounds)
        ov = _overrides_from_args(args)
        ov["budgets.counts"] = list(counts)
        scen = load_scenario(args.scenario, ov)
    return scen


def _scenario_manifest(scen, out, overrides):
    return {
        "package": "budgetmarch",
        "version": __version__,
        "scenario": scen.name,
        "description": scen.description,
        "config": scen.config,
        "overrides": overrides,
        "grid_n": scen.problem.grid.nx,
        "h": scen.problem.grid.h,
        "budget_bounds": list(scen.problem.budgets.bounds),
        "budget_counts": list(scen.problem.budgets.counts),
        "budget_deltas": list(scen.problem.budgets.deltas),
        "hat_h": scen.problem.hat_h,
        "march": {
            "algorithm": scen.march.algorithm,
            "angle_samples": scen.march.angle_samples,
            "golden_tolerance": scen.march.golden_tolerance,
            "monotone_completion": scen.march.monotone_completion,
        },
        "smoothing": scen.smoothing,
        "start": list(scen.start),
        "workers": os.environ.get("BUDGETMARCH_WORKERS", "default"),
        "artifacts": {},
        "timings": {},
        "heatmap_bounds": {},
    }


def _write_field(out, manifest, name, values, h, title, **fig_kw):
    write_field_csv(out / f"{name}.csv", values, h)
    bounds = write_pgm(out / f"{name}.pgm", values)
    field_figure(out / f"{name}.png", values, h, title=title, **fig_kw)
    manifest["artifacts"][name] = [f"{name}.csv", f"{name}.pgm", f"{name}.png"]
    manifest["heatmap_bounds"][name] = list(bounds)


def cmd_run(args) -> int:
    scen = _load(args)
    problem = scen.problem
    report = validate_problem(problem)
    if not report.ok:
        print("problem validation failed:", file=sys.stderr)
        print(str(report), file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out) / scen.name
    out.mkdir(parents=True, exist_ok=True)
    manifest = _scenario_manifest(scen, out, _overrides_from_args(args))

    t0 = time.perf_counter()
    result = solve_problem(problem, scen.march, scen.statics)
    manifest["timings"].update(result.timings)
    obstacles = problem.obstacles
    vis_mask = scen.visibility[0].non_visible if scen.visibility else None

    for i, u in enumerate(result.u):
        _write_field(out, manifest, f"u_{i}", u.values, problem.grid.h,
                     f"value function u_{i}", obstacles=obstacles,
                     visibility_mask=vis_mask)
    for (i, jdx), v in sorted(result.v.items()):
        _write_field(out, manifest, f"v_{i}{jdx}", v.values, problem.grid.h,
                     f"restricted cost v_{i}{jdx}", obstacles=obstacles)

    if problem.r == 1:
        write_field_csv(out / "mfl_level.csv", result.mfl.level, problem.grid.h)
        write_field_csv(out / "mfl_value.csv", result.mfl.value_on_mfl,
                        problem.grid.h)
        manifest["artifacts"]["mfl"] = ["mfl_level.csv", "mfl_value.csv"]

    # exported slices (with their excluded masks): per trace budget + top
    b1s = problem.budgets.values(0)
    slice_idx = sorted({len(b1s) - 1}
                       | {int(round(b[0] / problem.budgets.deltas[0]))
                          for b in scen.trace_budgets if b})
    mask_all = result.field.excluded_mask
    for j in slice_idx:
        if not 0 <= j < len(b1s):
            continue
        if problem.r == 1:
            sl, msk = result.field.values[j], mask_all[j]
        else:
            sl, msk = result.field.values[j, -1], mask_all[j, -1]
        tag = f"w_b1_{b1s[j]:.4g}"
        write_slice_csv(out / f"{tag}.csv", sl, problem.grid.h, "b1", b1s[j])
        write_pgm(out / f"{tag}.pgm", sl)
        field_figure(out / f"{tag}.png", sl, problem.grid.h,
                     title=f"W at b1 = {b1s[j]:.4g}", obstacles=obstacles,
                     visibility_mask=vis_mask)
        write_field_csv(out / f"{tag}_mask.csv", msk.astype(float),
                        problem.grid.h,
                        header="x,y,mask (0 active, 1 below MFL, 2 capped)")
        manifest["artifacts"][tag] = [f"{tag}.csv", f"{tag}.pgm",
                                      f"{tag}.png", f"{tag}_mask.csv"]

    if scen.name == "convergence":
        from .convergence import analytic_w, l1_error, linf_error

        exact = analytic_w(problem)
        row = {
            "h": problem.grid.h,
            "db1": problem.budgets.deltas[0],
            "l1_error": l1_error(result.field.values, exact, problem),
            "linf_error": linf_error(result.field.values, exact, problem),
        }
        manifest["error_table_row"] = row
        print(f"error-table row: h={row['h']:.6g} db1={row['db1']:.6g} "
              f"L1={row['l1_error']:.7f} Linf={row['linf_error']:.7f}")

    reduction = result.reduction
    manifest["domain_reduction"] = {
        "cap_pct_of_domain": reduction.cap_pct_of_domain,
        "mfl_pct_of_remaining": reduction.mfl_pct_of_remaining,
        "formula_cap_pct": reduction.formula_cap_pct,
        "formula_mfl_pct": reduction.formula_mfl_pct,
    }
    print(reduction)

    trajs = []
    for budget in scen.trace_budgets:
        try:
            traj = follow_constrained(problem, result.field, scen.start, budget)
        except (TrajectoryError, BudgetMarchError) as exc:
            print(f"trace at budget {budget} failed: {exc}", file=sys.stderr)
            continue
        tag = "traj_" + "_".join(f"{b:.4g}" for b in budget)
        write_trajectory_csv(out / f"{tag}.csv", traj, budget)
        manifest["artifacts"][tag] = [f"{tag}.csv"]
        trajs.append((f"b={budget}", traj.points))
    us = follow_static(problem, result.u[1], scen.start, cost_index=1)
    trajs.append(("secondary-optimal", us.points))
    if trajs:
        field_figure(out / "trajectories.png", result.u[0].values,
                     problem.grid.h, title="u_0 with optimal trajectories",
                     trajectories=trajs, obstacles=obstacles,
                     visibility_mask=vis_mask,
                     points=[("start", scen.start)])
        manifest["artifacts"]["trajectories"] = ["trajectories.png"]

    if problem.r == 1:
        front = None
        try:
            from .pareto import extract_front

            front = extract_front(result.field, problem, scen.start)
            write_front_csv(out / "front.csv", [front])
            front_figure(out / "front.png", [front],
                         title=f"Pareto front at {scen.start}")
            manifest["artifacts"]["front"] = ["front.csv", "front.png"]
        except BudgetMarchError as exc:
            print(f"front extraction failed: {exc}", file=sys.stderr)

    for k, vis in enumerate(scen.visibility):
        write_mask_pgm(out / f"visibility_{k}.pgm", vis.non_visible)
        write_mask_csv(out / f"visibility_{k}.csv", vis.non_visible,
                       problem.grid.h)
        manifest["artifacts"][f"visibility_{k}"] = [
            f"visibility_{k}.pgm", f"visibility_{k}.csv"]

    manifest["timings"]["total"] = time.perf_counter() - t0
    write_manifest(out / "manifest.json", manifest)
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_compare_fronts(args) -> int:
    scen = _load(args)
    problem = scen.problem
    if problem.r != 1:
        print("compare-fronts requires a one-constraint scenario", file=sys.stderr)
        return EXIT_VALIDATION
    report = validate_problem(problem)
    if not report.ok:
        print(str(report), file=sys.stderr)
        return EXIT_VALIDATION
    start = _parse_point(args.start) if args.start else scen.start
    out = Path(args.out) / scen.name
    out.mkdir(parents=True, exist_ok=True)
    result = solve_problem(problem, scen.march, scen.statics)
    comparison = run_compare_fronts(problem, result.field, start,
                                    WeightMesh.uniform(args.lambdas, 1))
    write_front_csv(out / "fronts_compare.csv",
                    [comparison.augmented, comparison.weighted])
    front_figure(out / "fronts_compare.png",
                 [comparison.augmented, comparison.weighted],
                 title=f"front comparison at {start}")
    print(comparison)
    print(f"envelope gap {comparison.max_gap:.6g} at b1 = {comparison.gap_budget}; "
          f"threshold 3*theta = {3 * comparison.theta:.6g}; "
          f"non-convex segment detected: {comparison.nonconvex_detected}; "
          f"Hausdorff distance {comparison.hausdorff:.6g}")
    return EXIT_OK


def cmd_convergence_table(args) -> int:
    hs = [parse_spacing(tok) for tok in args.hs.split(",")]
    dbs = [parse_spacing(tok) for tok in args.dbs.split(",")]
    rows = convergence_table(hs, dbs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["h,db1,l1_error,linf_error,seconds"]
    for row in rows:
        print(f"h={row.h:.6g} db1={row.db1:.6g}: L1={row.l1:.7f} "
              f"Linf={row.linf:.7f} ({row.seconds:.1f}s)")
        lines.append(f"{row.h:.9g},{row.db1:.9g},{row.l1:.9g},"
                     f"{row.linf:.9g},{row.seconds:.3f}")
    (out / "convergence_table.csv").write_text("\n".join(lines) + "\n")
    convergence_figure(out / "convergence_table.png",
                       [(r.h, r.db1, r.l1, r.linf) for r in rows])
    print(f"table written to {out}/convergence_table.csv")
    return EXIT_OK


def cmd_trace(args) -> int:
    scen = _load(args)
    problem = scen.problem
    report = validate_problem(problem)
    if not report.ok:
        print(str(report), file=sys.stderr)
        return EXIT_VALIDATION
    start = _parse_point(args.start) if args.start else scen.start
    budget = [float(tok) for tok in args.budget.split(",")]
    out = Path(args.out) / scen.name
    out.mkdir(parents=True, exist_ok=True)
    result = solve_problem(problem, scen.march, scen.statics)
    traj = follow_constrained(problem, result.field, start, budget)
    tag = "trace_" + "_".join(f"{b:.4g}" for b in budget)
    write_trajectory_csv(out / f"{tag}.csv", traj, budget)
    field_figure(out / f"{tag}.png", result.u[0].values, problem.grid.h,
                 title=f"constrained trajectory, budget {budget}",
                 trajectories=[(f"b={budget}", traj.points)],
                 obstacles=problem.obstacles,
                 points=[("start", start)])
    print(f"terminated: {traj.terminated}; cost totals "
          + ", ".join(f"J{i}={v:.6g}" for i, v in enumerate(traj.cost_totals)))
    print(f"W(start, budget) = {result.field.value_at(start, budget):.6g}")
    return EXIT_OK


def cmd_visibility(args) -> int:
    scen = _load(args)
    out = Path(args.out) / scen.name
    out.mkdir(parents=True, exist_ok=True)
    if not scen.visibility:
        print("scenario defines no observers", file=sys.stderr)
        return EXIT_VALIDATION
    for k, vis in enumerate(scen.visibility):
        write_mask_pgm(out / f"visibility_{k}.pgm", vis.non_visible)
        write_mask_csv(out / f"visibility_{k}.csv", vis.non_visible,
                       scen.problem.grid.h)
        if args.oracle:
            oracle = ray_visibility_oracle(scen.observers[k],
                                           scen.problem.obstacles,
                                           scen.problem.grid)
            agree = float((oracle == vis.non_visible).mean())
            print(f"observer {k} at {scen.observers[k]}: "
                  f"hidden fraction {vis.non_visible.mean():.4f}, "
                  f"oracle agreement {agree:.4f}")
        else:
            print(f"observer {k} at {scen.observers[k]}: "
                  f"hidden fraction {vis.non_visible.mean():.4f}")
    return EXIT_OK


def _parse_point(text: str):
    x, y = (float(tok) for tok in text.split(","))
    return (x, y)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="budgetmarch",
        description="grid solvers for optimal control under integral constraints",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario",
                            help="shipped scenario name or path to a TOML file "
                                 f"(shipped: {', '.join(shipped_scenarios())})")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--n", type=int, help="override grid points per axis")
        sp.add_argument("--h", help="override spacing as a fraction, e.g. 1/160")
        sp.add_argument("--db", help="override budget spacing, e.g. 1/40")
        sp.add_argument("--budget-counts", help="override budget axis counts")
        sp.add_argument("--budget-bounds", help="override budget bounds")
        sp.add_argument("--algorithm", type=int, choices=(1, 2, 3),
                        help="marching algorithm")
        sp.add_argument("--set", action="append",
                        help="generic override section.key=value")

    sp = sub.add_parser("run", help="solve a scenario and write all artifacts")
    common(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("compare-fronts",
                        help="augmented vs weighted-sum Pareto fronts")
    common(sp)
    sp.add_argument("--start", help="start point 'x,y' (default: scenario)")
    sp.add_argument("--lambdas", type=int, default=21,
                    help="weighted-sum mesh size")
    sp.set_defaults(fn=cmd_compare_fronts)

    sp = sub.add_parser("convergence-table",
                        help="error table against the analytic benchmark")
    sp.add_argument("--hs", default="1/40,1/80,1/160",
                    help="comma-separated spatial spacings")
    sp.add_argument("--dbs", default="1/10,1/20,1/40",
                    help="comma-separated budget spacings")
    sp.add_argument("--out", default="out")
    sp.set_defaults(fn=cmd_convergence_table)

    sp = sub.add_parser("trace", help="constrained-optimal trajectory")
    common(sp)
    sp.add_argument("--start", help="start point 'x,y' (default: scenario)")
    sp.add_argument("--budget", required=True, help="budget vector 'b1[,b2]'")
    sp.set_defaults(fn=cmd_trace)

    sp = sub.add_parser("visibility", help="observer visibility masks")
    common(sp)
    sp.add_argument("--oracle", action="store_true",
                    help="also compare against the exact ray-casting oracle")
    sp.set_defaults(fn=cmd_visibility)
    return p


def main(argv=None) -> int:
    _apply_workers()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SweepConvergenceError, TraversalLimitError, TrajectoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
