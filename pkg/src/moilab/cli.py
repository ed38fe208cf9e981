"""Command-line entry point.

Exit codes: 0 success, 1 an identity check failed, 2 usage or I/O error,
3 numerical-domain error (bad symbol, missing derivative, bad config).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MoilabError
from .experiments import (
    ExperimentConfig,
    reevaluate_witness,
    run_experiment,
    sweep_dimensions,
    verify_theorem_ultimate,
)
from .functions import divided_differences, function_from_id
from .linalg import load_matrix, save_matrix
from .moi import apply_moi
from .symbols import symbol_from_id
from .verify import run_sweep

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3

MOI_IDENTITIES = ("amplify", "indicator", "translate", "elementary", "composition")
LEMMAS = ("precrucial", "crucial", "postcrucial", "blocks", "reduce", "consummation")
SCALAR_PROPERTIES = ("symmetry", "recursion")
NORM_PROPERTIES = ("s2-bound", "contraction", "quasi-triangle", "weak<=s1")


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload))
    elif text:
        print(text)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _paths(text: str) -> list[Path]:
    return [Path(v) for v in text.split(",") if v.strip()]


# -- handlers --------------------------------------------------------------


def cmd_ddiff_eval(args) -> int:
    f = function_from_id(args.function, args.n)
    if args.batch:
        rows = json.loads(Path(args.batch).read_text())
        values = [float(divided_differences(f, np.array(r, dtype=float)[None, :], args.classical_zero)[0])
                  for r in rows]
        _emit(args, {"values": values}, "\n".join(repr(v) for v in values))
        return EXIT_OK
    if args.nodes is None:
        raise argparse.ArgumentTypeError("give --nodes or --batch")
    value = float(divided_differences(f, np.array(args.nodes)[None, :], args.classical_zero)[0])
    _emit(args, {"value": value}, repr(value))
    return EXIT_OK


def cmd_moi_apply(args) -> int:
    phi = symbol_from_id(args.symbol)
    As = [load_matrix(p) for p in args.A]
    if len(As) == 1:
        As = As * phi.arity
    xs = [load_matrix(p) for p in args.x]
    out = apply_moi(phi, As, xs)
    if args.out:
        save_matrix(args.out, out)
    _emit(args, {"out": str(args.out) if args.out else None, "frobenius": float(np.linalg.norm(out))},
          f"wrote {args.out}" if args.out else np.array2string(out, precision=12))
    return EXIT_OK


def _report_sweep(args, result, csv_rows: bool) -> int:
    if csv_rows:
        lines = ["trial,residual"] + [f"{i},{r!r}" for i, r in enumerate(result.residuals)]
        if getattr(args, "out", None):
            Path(args.out).write_text("\n".join(lines) + "\n")
        elif args.format != "json":
            print("\n".join(lines))
    payload = {"check": result.name, "trials": result.trials, "max_residual": result.max_residual,
               "tolerance": result.tol, "passed": result.passed}
    text = (f"{result.name}: {result.trials} trials, max residual {result.max_residual:.3e} "
            f"(tol {result.tol:.0e}) {'PASS' if result.passed else 'FAIL'}")
    if args.format == "json":
        print(json.dumps(payload))
    else:
        print(text, file=sys.stderr if csv_rows else sys.stdout)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_moi_verify(args) -> int:
    return _report_sweep(args, run_sweep(args.identity, args.trials, args.seed, n=args.n), csv_rows=False)


def cmd_verify(args) -> int:
    return _report_sweep(args, run_sweep(args.check, args.trials, args.seed, n=args.n), csv_rows=True)


def cmd_experiment_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    witness_out = args.witness_out or Path(str(args.out) + ".witness.json")
    est = run_experiment(cfg, args.out, witness_out)
    worst = 0.0
    if args.check_witnesses:
        data = json.loads(Path(witness_out).read_text())
        for w in data["witnesses"]:
            worst = max(worst, abs(reevaluate_witness(w, data["config"], data["target"]) - w["ratio"]))
    payload = {"out": str(args.out), "witnesses": str(witness_out), "estimate": est.value,
               "trials": est.trials, "per_dim": {str(k): v for k, v in est.per_dim.items()},
               "witness_drift": worst}
    _emit(args, payload, f"empirical lower bound {est.value!r} over {est.trials} trials -> {args.out}")
    return EXIT_FAIL if worst > 1e-9 else EXIT_OK


def cmd_experiment_sweep(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    text = sweep_dimensions(cfg)
    Path(args.out).write_text(text)
    _emit(args, {"out": str(args.out)}, f"wrote {args.out}")
    return EXIT_OK


def cmd_experiment_ultimate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.trials is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "samples": args.trials})
    text = verify_theorem_ultimate(cfg)
    if args.out:
        Path(args.out).write_text(text)
    _emit(args, {"out": str(args.out) if args.out else None, "rows": text.count("\n") - 1},
          f"wrote {args.out}" if args.out else text.rstrip())
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS,
                        help="output format (default: text)")

    parser = argparse.ArgumentParser(prog="moilab", parents=[common],
                                     description="Multiple operator integrals of divided differences.")
    parser.add_argument("--version", action="version", version=f"moilab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def trials(p, default=100):
        p.add_argument("--trials", type=int, default=default)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--n", type=int, default=None, help="fix the order instead of mixing orders")

    ddiff = sub.add_parser("ddiff", help="divided differences").add_subparsers(dest="action", required=True)
    p = ddiff.add_parser("eval", parents=[common], help="evaluate f^[k] at a node tuple")
    p.add_argument("--function", required=True, help="a, b, smoothed or poly:c0,c1,...")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--nodes", type=_floats)
    p.add_argument("--batch", help="JSON file holding a list of node lists")
    p.add_argument("--classical-zero", action="store_true",
                   help="use f^(n)(0)/n! at the all-zero tuple (smooth functions only)")
    p.set_defaults(handler=cmd_ddiff_eval)

    moi = sub.add_parser("moi", help="multiple operator integrals").add_subparsers(dest="action", required=True)
    p = moi.add_parser("apply", parents=[common], help="apply T_phi to matrices stored as JSON")
    p.add_argument("--symbol", required=True, help="ddiff:<f>:<n>, const:<c>:<arity>, orthant:<+|->:<arity>, zero:<arity>")
    p.add_argument("--A", type=_paths, required=True, help="comma-separated operator files (one file = repeat)")
    p.add_argument("--x", type=_paths, required=True, help="comma-separated argument files")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_moi_apply)
    p = moi.add_parser("verify", parents=[common], help="randomised structural identity sweep")
    p.add_argument("--identity", choices=MOI_IDENTITIES, required=True)
    trials(p)
    p.set_defaults(handler=cmd_moi_verify)

    verify = sub.add_parser("verify", help="identity sweeps with CSV residuals").add_subparsers(
        dest="action", required=True)
    for name, choices, flag in (("reduction", LEMMAS, "--lemma"), ("scalar", SCALAR_PROPERTIES, "--property"),
                                ("norms", NORM_PROPERTIES, "--property")):
        p = verify.add_parser(name, parents=[common])
        p.add_argument(flag, dest="check", choices=choices, required=True)
        p.add_argument("--out", help="write the trial,residual CSV here instead of stdout")
        trials(p)
        p.set_defaults(handler=cmd_verify)

    exp = sub.add_parser("experiment", help="empirical bound estimation").add_subparsers(
        dest="action", required=True)
    p = exp.add_parser("run", parents=[common], help="per-trial ratios for one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--witness-out")
    p.add_argument("--check-witnesses", action="store_true", help="re-evaluate stored witnesses")
    p.set_defaults(handler=cmd_experiment_run)
    p = exp.add_parser("sweep", parents=[common], help="per-dimension maxima for weak and S_1 targets")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_experiment_sweep)
    p = exp.add_parser("ultimate", parents=[common], help="M / (sup + L+ + L-) consistency probe")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, help="override samples per dimension")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_experiment_ultimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if not hasattr(args, "format"):
        args.format = "text"
    try:
        return args.handler(args)
    except argparse.ArgumentTypeError as exc:
        print(f"moilab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"moilab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MoilabError, ValueError) as exc:
        print(f"moilab: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
