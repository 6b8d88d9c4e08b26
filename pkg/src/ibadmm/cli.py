"""Command-line entry point: ``ibadmm {solve,sweep,certificate,ba}``.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from .admm import AdmmConfig, admm_run
from .ba import BaConfig, ba_run
from .bayat import bayat_run
from .certificate import compute_certificate
from .errors import ValidationError
from .harness import (METHODS, SweepSpec, aggregate, parse_beta_grid, plot_data_csv, records_csv,
                      run_sweep, summary_json, write_text)
from .objective import ObjectiveParams
from .prob_core import JointXY, example_joint

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_joint(p):
    p.add_argument("--joint", help="joint-distribution JSON (default: bundled 3x3 example)")
    p.add_argument("--nz", type=int, default=None, help="size of the Z alphabet (default N_x)")


def _add_solver(p):
    p.add_argument("--eps", type=float, default=None, help="interior floor eps (default 1e-4)")
    p.add_argument("--inner-steps", type=int, default=None)
    p.add_argument("--base-step", type=float, default=None)
    p.add_argument("--residual-tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None, help="outer-iteration cap")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ibadmm", description="Discrete information bottleneck solvers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="single run, prints the record as JSON")
    _add_joint(p)
    _add_solver(p)
    p.add_argument("--method", choices=METHODS, default="admm")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--c", type=float, default=32.0)
    p.add_argument("--omega", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write the iteration trace as JSON lines here")
    p.add_argument("--trace-stride", type=int, default=1)
    p.add_argument("--with-state", action="store_true", help="include the final iterate")

    p = sub.add_parser("sweep", help="multi-restart sweep, writes the results CSV")
    _add_joint(p)
    _add_solver(p)
    p.add_argument("--config", help="JSON file with sweep-spec keys; flags override it")
    p.add_argument("--methods")
    p.add_argument("--beta", help="grid start:stop:step, comma list or single value")
    p.add_argument("--c", type=_floats)
    p.add_argument("--omega", type=float)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--plot-data", help="information-plane CSV (method, beta, I_xz, I_yz)")
    p.add_argument("--traces", help="per-run trace archive (JSON lines)")
    p.add_argument("--trace-stride", type=int, default=None)
    p.add_argument("--summary", help="write per-cell aggregates as JSON here")
    p.add_argument("--no-timing", action="store_true",
                   help="write cpu_ms as nan so the CSV is reproducible byte for byte")

    p = sub.add_parser("certificate", help="convergence certificate as JSON")
    _add_joint(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--omega", type=float, default=4.0)
    p.add_argument("--c", type=float, default=32.0)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--alpha-points", type=int, default=101)

    p = sub.add_parser("ba", help="Blahut-Arimoto benchmark over a beta grid")
    _add_joint(p)
    p.add_argument("--beta", default="1:10:0.5")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--out", help="results CSV (default: summary only)")
    p.add_argument("--no-timing", action="store_true")
    return parser


def _joint(args) -> JointXY:
    if args.joint:
        try:
            return JointXY.from_json(args.joint)
        except OSError as exc:
            raise ValidationError(f"cannot read {args.joint}: {exc.strerror}") from None
    return example_joint()


def _solver_overrides(args) -> dict:
    ov = {}
    for flag, key in (("eps", "eps_floor"), ("inner_steps", "inner_steps"), ("base_step", "base_step"),
                      ("residual_tol", "residual_tol"), ("max_iters", "max_outer_iters")):
        v = getattr(args, flag, None)
        if v is not None:
            ov[key] = v
    return ov


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2, allow_nan=False, default=_json_default))


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"not serializable: {type(v).__name__}")


def _clean(doc):
    """NaN -> None, recursively, so the output is strict JSON."""
    if isinstance(doc, float) and math.isnan(doc):
        return None
    if isinstance(doc, dict):
        return {k: _clean(v) for k, v in doc.items()}
    if isinstance(doc, list):
        return [_clean(v) for v in doc]
    return doc


def cmd_solve(args) -> int:
    joint = _joint(args)
    if args.method == "ba":
        ov = {}
        if args.max_iters is not None:
            ov["max_iters"] = args.max_iters
        rec = ba_run(joint, BaConfig(args.beta, **ov), args.seed, args.nz)
        trace = None
    else:
        cfg = AdmmConfig(ObjectiveParams(args.beta, args.c, args.omega), **_solver_overrides(args))
        stride = args.trace_stride if args.trace else 0
        run = admm_run if args.method == "admm" else bayat_run
        rec, trace = run(joint, cfg, args.seed, args.nz, stride)
    if args.trace and trace is not None:
        write_text(args.trace, "".join(line + "\n" for line in
                                       trace.jsonl_lines(method=rec.method, beta=rec.beta, seed=rec.seed)))
    _print_json(_clean(rec.to_json(with_state=args.with_state)))
    return EXIT_OK


def _spec_from_args(args) -> SweepSpec:
    doc = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ValidationError("sweep config must be a JSON object")
    if args.methods is not None:
        doc["methods"] = args.methods
    if args.beta is not None:
        doc["beta_grid"] = parse_beta_grid(args.beta)
    for flag, key in (("c", "c_values"), ("omega", "omega"), ("restarts", "restarts"),
                      ("seed", "base_seed"), ("workers", "workers"), ("nz", "nz"),
                      ("trace_stride", "trace_stride")):
        v = getattr(args, flag)
        if v is not None:
            doc[key] = v
    if args.traces and not doc.get("trace_stride"):
        doc["trace_stride"] = 1
    ov = _solver_overrides(args)
    if ov:
        overrides = {m: dict(v) for m, v in doc.get("overrides", {}).items()}
        for m in ("admm", "bayat"):
            overrides.setdefault(m, {}).update(ov)
        doc["overrides"] = overrides
    return SweepSpec.from_dict(doc)


def cmd_sweep(args) -> int:
    joint = _joint(args)
    spec = _spec_from_args(args)
    result = run_sweep(joint, spec, timing=not args.no_timing)
    write_text(args.out, records_csv(result.records))
    if args.plot_data:
        write_text(args.plot_data, plot_data_csv(result.records))
    if args.traces:
        write_text(args.traces, "".join(line + "\n" for line in result.trace_lines()))
    summary = summary_json(aggregate(result.records))
    if args.summary:
        write_text(args.summary, json.dumps(_clean(summary), indent=2) + "\n")
    for cell in summary:
        print(f"{cell['method']:>5}  beta={cell['beta']:<5g} c={cell['c']:<6g} "
              f"converged={cell['convergence_pct']:5.1f}%  best I_yz={cell['best_I_yz']}")
    failed = sum(r.failed for r in result.records)
    print(f"{len(result.records)} records ({failed} failed) -> {args.out}")
    return EXIT_OK


def cmd_certificate(args) -> int:
    joint = _joint(args)
    if args.alpha_points < 1:
        raise ValidationError("--alpha-points must be >= 1")
    cfg = AdmmConfig(ObjectiveParams(args.beta, args.c, args.omega), eps_floor=args.eps)
    grid = np.linspace(0.005, 0.995, args.alpha_points)
    cert = compute_certificate(joint, cfg, grid)
    doc = cert.to_json()
    doc.update(beta=args.beta, omega=args.omega, c=args.c, eps=args.eps)
    _print_json(doc)
    return EXIT_OK


def cmd_ba(args) -> int:
    joint = _joint(args)
    ov = {}
    if args.tol is not None:
        ov["tol"] = args.tol
    if args.max_iters is not None:
        ov["max_iters"] = args.max_iters
    spec = SweepSpec(methods=("ba",), beta_grid=parse_beta_grid(args.beta), c_values=(1.0,),
                     omega=0.0, restarts=args.restarts, base_seed=args.seed, nz=args.nz,
                     overrides={"ba": ov})
    result = run_sweep(joint, spec, timing=not args.no_timing)
    if args.out:
        write_text(args.out, records_csv(result.records))
    rows = [{"beta": c["beta"], "convergence_pct": c["convergence_pct"],
             "mean_cpu_ms": c["mean_cpu_ms"], "best_I_xz": c["best_I_xz"], "best_I_yz": c["best_I_yz"]}
            for c in summary_json(aggregate(result.records))]
    _print_json(_clean(rows))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "certificate": cmd_certificate, "ba": cmd_ba}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:      # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:      # ValidationError and the numeric error types
        print(f"ibadmm: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
