"""Command-line harness: verification, stability scans, studies, references.

All numeric output is CSV with a header row, written to stdout or --out.
Exit status is 0/1 according to the verification verdict where applicable.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import stability
from .harness import (
    load_reference,
    make_reference,
    problem_by_name,
    run_sigma_study,
    run_work_precision,
    save_reference,
    verify_method,
)
from .tableau import available_methods, builtin_tableau, load_tableau, save_tableau


def _write_rows(rows, path, fieldnames=None):
    rows = list(rows)
    if not rows:
        return
    fieldnames = fieldnames or list(rows[0])

    def emit(fh):
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for r in rows:
            w.writerow(r)

    if path:
        with open(path, "w", newline="") as fh:
            emit(fh)
    else:
        emit(sys.stdout)


def _tableau_arg(name_or_path: str):
    import os

    from .tableau import TableauError
    try:
        return builtin_tableau(name_or_path)
    except TableauError as exc:
        if os.path.exists(name_or_path):
            with open(name_or_path) as fh:
                return load_tableau(fh.read())
        raise SystemExit(f"imexpeer: {exc}") from None


def _problem_arg(args):
    kwargs = {}
    if args.problem == "burgers" and getattr(args, "dx", None):
        kwargs["dx"] = args.dx
    if args.problem == "advection_reaction" and getattr(args, "m_nodes", None):
        kwargs["m_nodes"] = args.m_nodes
    if args.problem == "dahlquist":
        kwargs["lambda0"] = complex(getattr(args, "lambda0", "-1"))
        kwargs["lambda1"] = complex(getattr(args, "lambda1", "-1e3"))
    return problem_by_name(args.problem, **kwargs)


def cmd_verify(args):
    report = verify_method(_tableau_arg(args.method), regions=args.regions)
    print(report)
    if args.out:
        _write_rows(({"condition": c, "residual": r} for c, r in report.condition_rows),
                    args.out, ["condition", "residual"])
    return 0 if report.passed else 1


def cmd_stability(args):
    tab = _tableau_arg(args.method)
    grid = None
    if args.box:
        x0, x1, y1 = (float(v) for v in args.box.split(","))
        grid = stability.GridSpec(x0, x1, y1, args.resolution, args.resolution)
    if args.alpha:
        alphas = [float(a) for a in args.alpha.split(",")]
        rays = stability.SUMMARY_RAYS
        rows = []
        for a in alphas:
            scan = stability.scan_region(tab, a, grid=grid, rays=rays,
                                         resolution=args.resolution)
            rows.append({"method": tab.name, "alpha": a, "area": scan.area,
                         "x_max": scan.x_max, "y_max": scan.y_max,
                         "nx": scan.grid.nx, "ny": scan.grid.ny,
                         "box_x0": scan.grid.x0, "box_x1": scan.grid.x1,
                         "box_y1": scan.grid.y1})
            if args.boundary_out:
                pts = stability.region_boundary(scan)
                path = args.boundary_out.replace("ALPHA", f"{a:g}")
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["x", "y"])
                    w.writerows(pts)
        _write_rows(rows, args.out)
    else:
        rep = stability.region_summary(tab)
        _write_rows([rep.row()], args.out)
    return 0


def cmd_converge(args):
    tab = _tableau_arg(args.method)
    problem = _problem_arg(args)
    dts = [float(d) for d in args.dt_list.split(",")]
    ref = load_reference(open(args.reference).read()).y if args.reference else None
    rep = run_sigma_study(tab, problem, args.sigma, dts, reference=ref)
    _write_rows(rep.rows(), args.out)
    return 0


def cmd_wp(args):
    tab = _tableau_arg(args.method)
    problem = _problem_arg(args)
    tols = [float(t) for t in args.tols.split(",")]
    ref = load_reference(open(args.reference).read()).y if args.reference else None
    rows = run_work_precision(tab, problem, tols, tau_rule=args.tau_rule,
                              reference=ref, repeats=args.repeats)
    _write_rows(rows, args.out)
    return 0


def cmd_reference(args):
    problem = _problem_arg(args)
    ref = make_reference(problem, tol=args.tol, method=args.method, tau=args.tau)
    if args.restrict_every > 1:
        k = args.restrict_every
        if problem.name == "advection_reaction":
            # keep every k-th node pair of the interleaved (u, v) state
            y = ref.y.reshape(-1, 2)[k - 1::k].reshape(-1)
        else:
            y = ref.y[k - 1::k]
        ref.y = y
        ref.sha256 = ""
        ref.meta["restricted"] = f"every {k}-th node"
    text = save_reference(ref)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_tableau(args):
    if args.action == "show":
        tab = _tableau_arg(args.source)
        sys.stdout.write(save_tableau(tab))
        return 0
    with open(args.source) as fh:
        tab = load_tableau(fh.read())
    print(f"loaded {tab.name}: s={tab.s}, gamma={tab.gamma:.17g}")
    rep = verify_method(tab)
    print(rep)
    return 0 if rep.passed else 1


def build_parser():
    p = argparse.ArgumentParser(
        prog="imexpeer",
        description="Variable-step super-convergent IMEX-Peer methods: "
                    "verification, stability regions, convergence and "
                    "work-precision studies.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("verify", help="verify a method's structural and order properties")
    q.add_argument("method", help=f"built-in ({', '.join(available_methods())}) or tableau file")
    q.add_argument("--regions", action="store_true",
                   help="also scan stability regions (slow)")
    q.add_argument("--out", help="write condition residuals CSV here")
    q.set_defaults(func=cmd_verify)

    q = sub.add_parser("stability", help="stability regions and summary table")
    q.add_argument("method")
    q.add_argument("--alpha", help="comma list of wedge angles in degrees")
    q.add_argument("--box", help="scan box 'x0,x1,y1' (default: automatic)")
    q.add_argument("--resolution", type=int, default=260)
    q.add_argument("--boundary-out",
                   help="boundary polyline CSV path; ALPHA is replaced per angle")
    q.add_argument("--out")
    q.set_defaults(func=cmd_stability)

    q = sub.add_parser("converge", help="prescribed-step sigma-pattern study")
    q.add_argument("method")
    q.add_argument("problem")
    q.add_argument("--sigma", type=float, default=1.0)
    q.add_argument("--dt-list", required=True, help="comma list of mean step sizes")
    q.add_argument("--reference", help="reference CSV (defaults to exact solution)")
    q.add_argument("--dx", type=float)
    q.add_argument("--m-nodes", type=int)
    q.add_argument("--lambda0")
    q.add_argument("--lambda1")
    q.add_argument("--out")
    q.set_defaults(func=cmd_converge)

    q = sub.add_parser("wp", help="adaptive work-precision sweep")
    q.add_argument("method")
    q.add_argument("problem")
    q.add_argument("--tols", required=True, help="comma list of tolerances")
    q.add_argument("--tau-rule", default="sqrt",
                   help="'atol', 'sqrt', or a fixed number")
    q.add_argument("--repeats", type=int, default=3)
    q.add_argument("--reference")
    q.add_argument("--dx", type=float)
    q.add_argument("--m-nodes", type=int)
    q.add_argument("--lambda0")
    q.add_argument("--lambda1")
    q.add_argument("--out")
    q.set_defaults(func=cmd_wp)

    q = sub.add_parser("reference", help="compute a tight-tolerance reference solution")
    q.add_argument("problem")
    q.add_argument("--tol", type=float, default=1e-12)
    q.add_argument("--tau", type=float)
    q.add_argument("--method", default="IMEX-Peer4sv")
    q.add_argument("--dx", type=float)
    q.add_argument("--m-nodes", type=int)
    q.add_argument("--lambda0")
    q.add_argument("--lambda1")
    q.add_argument("--restrict-every", type=int, default=1,
                   help="keep every k-th node (fine-to-coarse restriction)")
    q.add_argument("--out")
    q.set_defaults(func=cmd_reference)

    q = sub.add_parser("tableau", help="load/show tableau files")
    q.add_argument("action", choices=["load", "show"])
    q.add_argument("source", help="built-in name or file path")
    q.set_defaults(func=cmd_tableau)
    return p


def main(argv=None) -> int:
    from .tableau import TableauError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TableauError as exc:
        print(f"imexpeer: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
