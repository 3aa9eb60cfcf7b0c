"""Command line entry point: ``fairrecip {generate,run,sweep,evaluate}``.

Exit status is 0 on success, 1 for configuration or input errors (nothing is
written) and 2 when some cells failed at run time (the other rows are written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .core import ExaminationModel, InstanceError, load_instance
from .datagen import GenConfig, export_instance, generate
from .experiment import (
    SWEEP_COLUMNS,
    ConfigError,
    load_config,
    load_policy,
    run,
    spec_from_dict,
    sweep,
    write_rows,
)
from .metrics import ENVY_TOL, evaluate

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("fairrecip")


def _threshold(text):
    if text is None or str(text).lower() in ("none", "full", ""):
        return None
    return int(text)


def _add_market_args(p, generated=True):
    if generated:
        p.add_argument("--n", type=int, help="left-side agents")
        p.add_argument("--m", type=int, help="right-side agents")
        p.add_argument("--lambda", dest="lam", type=float, help="popularity weight in [0, 1]")
    p.add_argument("--p1", help="CSV with n rows of left preferences")
    p.add_argument("--p2", help="CSV with m rows of right preferences")
    p.add_argument("--exam", choices=["log", "inv"], help="examination model")
    p.add_argument("--K", dest="threshold", help="examination threshold (default: full list)")


def _add_run_args(p):
    p.add_argument("--config", help="YAML or JSON run specification")
    p.add_argument("--methods", help="comma list: naive,prod,tu,iterlp,sw,nsw,alpha=0.5")
    p.add_argument("--seeds", help="e.g. 0..9 or 0,3,5")
    _add_market_args(p)
    p.add_argument("--sigma", type=float, help="preference noise for the policy builder")
    p.add_argument("--oracle", choices=["exact", "sinkhorn"], help="linear maximization oracle")
    p.add_argument("--tau", type=float, help="Sinkhorn regularization strength")
    p.add_argument("--sinkhorn-iters", dest="sinkhorn_iters", type=int, help="scaling iterations per oracle call")
    p.add_argument("--log-domain", dest="log_domain", action="store_true", default=None,
                   help="stabilized Sinkhorn for large tau")
    p.add_argument("--eta", type=float, help="constant Frank-Wolfe step")
    p.add_argument("--step", dest="step_schedule", choices=["constant", "diminishing"], help="step schedule")
    p.add_argument("--iters", dest="max_outer_iters", type=int, help="maximum outer iterations")
    p.add_argument("--converge-tol", dest="converge_tol", type=float, help="stop when SW changes less than this")
    p.add_argument("--beta", type=float, help="TU scale parameter")
    p.add_argument("--envy-tol", dest="envy_tol", type=float, help="margin before an envy is counted")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--no-timing", dest="timing", action="store_false", default=None,
                   help="write 0 for wall time so reruns are byte-identical")
    p.add_argument("--save-policies", dest="policy_dir", help="directory for .npz policies")
    p.add_argument("--out", default="-", help="output CSV (default: stdout)")


_OVERRIDES = (
    "methods", "seeds", "n", "m", "lam", "p1", "p2", "exam", "threshold", "sigma", "oracle", "tau",
    "sinkhorn_iters", "log_domain", "eta", "step_schedule", "max_outer_iters", "converge_tol", "beta",
    "envy_tol", "jobs", "timing", "policy_dir",
)


def _spec(args):
    data = load_config(args.config) if args.config else {}
    data = {("lam" if k == "lambda" else k): v for k, v in data.items()}
    for key in _OVERRIDES:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = _threshold(v) if key == "threshold" else v
    return spec_from_dict(data).validate()


def _finish(rows, errors, out, columns=None):
    kw = {} if columns is None else {"columns": columns}
    write_rows(rows, None if out == "-" else out, **kw)
    for e in errors:
        print(f"fairrecip: failed cell: {e}", file=sys.stderr)
    return EXIT_RUNTIME if errors else EXIT_OK


def cmd_generate(args):
    exam = ExaminationModel(args.exam or "log", _threshold(args.threshold))
    cfg = GenConfig(args.n or 75, args.m or 50, 0.0 if args.lam is None else args.lam, exam, args.seed)
    out = export_instance(generate(cfg), args.out, cfg)
    log.info("wrote market to %s", out)
    return EXIT_OK


def cmd_run(args):
    spec = _spec(args)
    rows, errors = run(spec)
    return _finish(rows, errors, args.out)


def cmd_sweep(args):
    spec = _spec(args)
    values = [v.strip() for v in (args.values or "").split(",") if v.strip()]
    rows, errors = sweep(spec, args.axis, values)
    return _finish(rows, errors, args.out, SWEEP_COLUMNS)


def cmd_evaluate(args):
    if not (args.p1 and args.p2):
        raise ConfigError("evaluate needs --p1 and --p2")
    exam = ExaminationModel(args.exam or "log", _threshold(args.threshold))
    inst = load_instance(args.p1, args.p2, exam)
    pol = load_policy(args.policy)
    report = evaluate(inst, pol, args.envy_tol if args.envy_tol is not None else ENVY_TOL)
    row = report.row(args.label or Path(args.policy).stem)
    return _finish([row], [], args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairrecip", description="Fair reciprocal recommendation experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic market as CSV plus meta.txt")
    g.add_argument("--n", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--exam", choices=["log", "inv"])
    g.add_argument("--K", dest="threshold")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="evaluate methods over seeds")
    _add_run_args(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run over the values of one axis")
    _add_run_args(s)
    s.add_argument("--axis", required=True, choices=["lambda", "alpha", "tau", "sigma", "size"])
    s.add_argument("--values", default="", help="comma list; sizes as N or NxM")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("evaluate", help="metrics of a saved .npz policy on a market")
    e.add_argument("--policy", required=True)
    _add_market_args(e, generated=False)
    e.add_argument("--label", help="method column (default: policy file name)")
    e.add_argument("--envy-tol", dest="envy_tol", type=float)
    e.add_argument("--out", default="-")
    e.set_defaults(func=cmd_evaluate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InstanceError, FileNotFoundError, ValueError) as exc:
        print(f"fairrecip: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - last-resort runtime failure
        print(f"fairrecip: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
