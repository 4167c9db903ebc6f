"""Command-line front end.

Verbs:
  run CONFIG              march a configured scenario, audit, grade suites
  audit TRAJECTORY        re-audit a stored trajectory file
  dispersion-check        standing-mode period versus the linear prediction
  print-config-template   annotated starting point for run configs

Exit codes: 0 all enabled suites passed, 1 bad input or guard abort,
2 suites evaluated and failed.

Only argparse/os/sys are imported at module scope so --threads can pin
the BLAS/FFT pool sizes before numpy first loads.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "BLIS_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are exit 1, not 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="wavelaw",
                     description="pseudo-spectral water-wave solver with a "
                                 "conservation-law auditor")
    parser.add_argument("--threads", type=int, metavar="N",
                        help="pin numerical thread pools to N")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute a configured run")
    p_run.add_argument("config", help="INI-style run configuration")
    p_run.add_argument("--solver", choices=("nonlocal", "dno"),
                       help="override the configured kinematic route")

    p_audit = sub.add_parser("audit", help="audit a stored trajectory")
    p_audit.add_argument("trajectory", help="binary trajectory file")
    p_audit.add_argument("--report", metavar="PATH",
                         help="write the density report CSV here")
    p_audit.add_argument("--probes", metavar="PATH",
                         help="write the probe report CSV here")
    p_audit.add_argument("--solver", choices=("nonlocal", "dno"),
                         default="nonlocal")

    p_disp = sub.add_parser("dispersion-check",
                            help="measure a standing-mode period")
    p_disp.add_argument("--nx", type=int, default=32)
    p_disp.add_argument("--eps", type=float, default=1e-3)
    p_disp.add_argument("--m", type=int, default=1)
    p_disp.add_argument("--n", type=int, default=0)
    p_disp.add_argument("--depth", type=float, default=1.0)
    p_disp.add_argument("--gravity", type=float, default=9.81)
    p_disp.add_argument("--rho", type=float, default=1000.0)
    p_disp.add_argument("--sigma", type=float, default=0.0)
    p_disp.add_argument("--steps-per-period", type=int, default=200)
    p_disp.add_argument("--periods", type=float, default=1.0)
    p_disp.add_argument("--tol", type=float, default=1e-3)
    p_disp.add_argument("--solver", choices=("nonlocal", "dno"),
                        default="nonlocal")

    sub.add_parser("print-config-template",
                   help="print an annotated run configuration")
    return parser


def _cmd_run(args) -> int:
    from . import runner
    try:
        cfg = runner.load_config(args.config)
    except (OSError, ValueError, KeyError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    if args.solver:
        cfg.solver = args.solver
    result = runner.run(cfg, log=print)
    if result.exit_code == 1:
        print(result.message, file=sys.stderr)
    return result.exit_code


def _cmd_audit(args) -> int:
    import numpy as np

    from . import runner, storage

    try:
        grid, states = storage.load_trajectory(args.trajectory)
    except (OSError, ValueError) as err:
        print(f"trajectory error: {err}", file=sys.stderr)
        return 1
    if len(states) < 5:
        print(f"trajectory holds {len(states)} states; auditing needs 5",
              file=sys.stderr)
        return 1
    times = np.array([s.t for s in states])
    dt_s = float(times[1] - times[0])
    samples = [runner.prepare_sample(grid, s) for s in states]
    report = runner.audit_trajectory(grid, samples, dt_s)
    if args.report:
        storage.write_density_report(args.report, report)
    if args.probes:
        storage.write_probe_report(args.probes, report)
    eps = max(float(np.max(np.abs(s.eta))) for s in states)
    cap = None
    if grid.sigma > 0.0:
        cap = np.array([runner.capillary_area_integral(grid, s.eta)
                        for s in states])
    suites = runner.evaluate_suites(grid, eps, report, dt_s, cap)
    print(runner.summarize(report, suites))
    return 0 if suites["passed"] else 2


def _cmd_dispersion(args) -> int:
    from . import runner
    measured, predicted, rel = runner.dispersion_check(
        Nx=args.nx, eps=args.eps, m=args.m, n=args.n, h=args.depth,
        g=args.gravity, rho=args.rho, sigma=args.sigma,
        steps_per_period=args.steps_per_period, periods=args.periods,
        solver=args.solver)
    ok = rel <= args.tol
    print(f"measured period  {measured:.9f} s")
    print(f"predicted period {predicted:.9f} s")
    print(f"relative error   {rel:.3e}  (tol {args.tol:.0e})  "
          f"{'pass' if ok else 'FAIL'}")
    return 0 if ok else 2


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be positive", file=sys.stderr)
            return 1
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    if args.verb == "print-config-template":
        from . import runner
        sys.stdout.write(runner.config_template())
        return 0
    if args.verb == "run":
        return _cmd_run(args)
    if args.verb == "audit":
        return _cmd_audit(args)
    return _cmd_dispersion(args)


if __name__ == "__main__":
    sys.exit(main())
