"""Command-line interface: ``fockprep <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 dimension search without
solution, 4 fatal numeric guard.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .circuit import find_d0
from .dispmat import displacement_closed_form, displacement_recurrent
from .errors import NoSolutionError, NumericGuardError
from .fock import column_norms
from .sweep import (
    DESK_POINTS,
    SweepConfig,
    bin_reduce,
    read_records,
    relative_improvement,
    run_sweep,
)
from .tame import D1Cache, TameConfig, error_matrix, find_dimension, plain_expm_displacement, tame_build

EXIT_OK, EXIT_CONFIG, EXIT_NO_SOLUTION, EXIT_GUARD = 0, 2, 3, 4

log = logging.getLogger("fockprep")


def parse_complex(text: str) -> complex:
    """Accept ``3-2j``, ``3-2i`` or a plain real."""
    try:
        return complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _write_table(rows: list[list], header: list[str], out: str | None) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(["" if v is None else repr(v) if isinstance(v, float) else v for v in row]
                    for row in rows)
    finally:
        if out:
            fh.close()


def _resolve_d1(args) -> int:
    if args.d1 is not None:
        return args.d1
    return find_dimension(args.xi, TameConfig(args.d0, args.epsilon1))


# subcommands -------------------------------------------------------------------


def cmd_find_dim(args) -> int:
    cfg = TameConfig(args.d0, args.epsilon1, args.h)
    if args.cache:
        d1 = D1Cache(args.cache).lookup(args.xi, cfg)
    else:
        d1 = find_dimension(args.xi, cfg)
    print(d1)
    return EXIT_OK


def cmd_find_d0(args) -> int:
    print(find_d0(args.gamma_star, args.xi_star, args.epsilon0, max_dim=args.max_dim))
    return EXIT_OK


def _build(method: str, xi: complex, d0: int, d1: int | None):
    report = None
    if method == "tame":
        G = tame_build(xi, d1, d0)
    elif method == "closed":
        G, report = displacement_closed_form(xi, d0)
    elif method == "recurrent":
        # overflow is expected here and reported through the finiteness guard
        with np.errstate(over="ignore", invalid="ignore"):
            G = displacement_recurrent(xi, d0)
    else:
        G = plain_expm_displacement(xi, d0)
    return G, report


def cmd_build_disp(args) -> int:
    d1 = _resolve_d1(args) if args.method == "tame" else None
    G, report = _build(args.method, args.xi, args.d0, d1)
    if not G.is_finite():
        raise NumericGuardError(f"{args.method} displacement for xi={args.xi} is not finite")
    _, stats = error_matrix(G, args.xi)
    out = Path(args.out)
    np.savez(out, matrix=G.entries, xi=np.complex128(args.xi), method=args.method,
             d1=-1 if d1 is None else d1)
    meta = {
        "xi": [args.xi.real, args.xi.imag],
        "d0": args.d0,
        "d1": d1,
        "method": args.method,
        "guard_report": None if report is None else report.to_dict(),
        "error_stats": stats.to_rows(),
    }
    out.with_name(out.name + ".json").write_text(json.dumps(meta, indent=1) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    data = np.load(args.matrix)
    xi = args.xi if args.xi is not None else complex(data["xi"])
    _, stats = error_matrix(data["matrix"], xi)
    _write_table([[r["column"], r["mean"], r["std"], r["max"]] for r in stats.to_rows()],
                 ["column", "mean_log10", "std_log10", "max_log10"], args.out)
    return EXIT_OK


def cmd_norms(args) -> int:
    d1 = _resolve_d1(args)
    closed, _ = displacement_closed_form(args.xi, args.d0)
    cols = [column_norms(closed), column_norms(tame_build(args.xi, d1, args.d0))]
    with np.errstate(over="ignore", invalid="ignore"):
        cols.append(column_norms(displacement_recurrent(args.xi, args.d0)))
    rows = [[j] + [float(c[j]) for c in cols] for j in range(args.d0)]
    _write_table(rows, ["column", "closed_form", "tame", "recurrent"], args.out)
    return EXIT_OK


def build_sweep_config(args) -> SweepConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    if args.desk:
        data["gamma_range"] = (0.0, 1.0, DESK_POINTS)
        data["xi_range"] = (0.0, 1.0, DESK_POINTS)
    overrides = {
        "gamma_range": args.gamma_range,
        "xi_range": args.xi_range,
        "etas": args.eta,
        "detectors": args.detector,
        "d0": args.d0,
        "epsilon0": args.epsilon0,
        "epsilon1": args.epsilon1,
        "targets": args.targets,
        "bins": args.bins,
        "parallelism": args.jobs,
        "output_path": args.out,
        "cache_path": args.cache,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return SweepConfig.from_dict(data)


def cmd_sweep(args) -> int:
    cfg = build_sweep_config(args)
    records = run_sweep(cfg)
    print(f"wrote {len(records)} records to {cfg.output_path}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    records, meta = read_records(args.records)
    if args.relative:
        rows = relative_improvement(records, args.target, args.relative)
        _write_table([[r.eta, r.tau, r.detector, r.L] for r in rows],
                     ["eta", "tau", "detector", "L"], args.out)
        return EXIT_OK
    metric = "nonlinear_M" if args.metric == "M" else "fidelity"
    bins = args.bins if args.bins is not None else meta.get("config", {}).get("bins", 200)
    rows = bin_reduce(records, metric, bins=bins, target=args.target)
    _write_table([[r.eta, r.detector, r.lo, r.hi, r.max_probability] for r in rows],
                 ["eta", "detector", "lo", "hi", "max_probability"], args.out)
    return EXIT_OK


# parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockprep", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def xi_arg(sp, required=True):
        sp.add_argument("--xi", type=parse_complex, required=required,
                        help="displacement amplitude, e.g. 3-2i")

    sp = sub.add_parser("find-dim", help="working dimension d1 for TAME")
    xi_arg(sp)
    sp.add_argument("--d0", type=int, required=True)
    sp.add_argument("--epsilon1", type=float, default=1e-13)
    sp.add_argument("--h", type=float, default=10)
    sp.add_argument("--cache", help="JSON d1 cache to read and update")
    sp.set_defaults(func=cmd_find_dim)

    sp = sub.add_parser("find-d0", help="target dimension from the displaced-TMSV cutoff error")
    sp.add_argument("--gamma-star", type=float, default=1.0)
    sp.add_argument("--xi-star", type=parse_complex, default=1.0)
    sp.add_argument("--epsilon0", type=float, default=1e-13)
    sp.add_argument("--max-dim", type=int, default=150)
    sp.set_defaults(func=cmd_find_d0)

    sp = sub.add_parser("build-disp", help="write a displacement matrix and its diagnostics")
    xi_arg(sp)
    sp.add_argument("--d0", type=int, required=True)
    sp.add_argument("--d1", type=int, help="TAME working dimension (searched if omitted)")
    sp.add_argument("--epsilon1", type=float, default=1e-13)
    sp.add_argument("--method", choices=("tame", "closed", "recurrent", "expm"), default="tame")
    sp.add_argument("--out", required=True, help="output .npz; a .json report is written beside it")
    sp.set_defaults(func=cmd_build_disp)

    sp = sub.add_parser("verify", help="error-matrix statistics of a stored matrix")
    sp.add_argument("matrix", help=".npz written by build-disp")
    xi_arg(sp, required=False)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("norms", help="column norms of the three builders")
    xi_arg(sp)
    sp.add_argument("--d0", type=int, required=True)
    sp.add_argument("--d1", type=int)
    sp.add_argument("--epsilon1", type=float, default=1e-13)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_norms)

    sp = sub.add_parser("sweep", help="grid sweep over squeezing and displacement")
    sp.add_argument("--config", help="JSON file with SweepConfig fields")
    sp.add_argument("--desk", action="store_true", help="101 x 101 grid preset")
    sp.add_argument("--gamma-range", type=float, nargs=3, metavar=("LO", "HI", "N"))
    sp.add_argument("--xi-range", type=float, nargs=3, metavar=("LO", "HI", "N"))
    sp.add_argument("--eta", type=float, action="append")
    sp.add_argument("--detector", action="append", help="fock:F, apd or cascade:M:N")
    sp.add_argument("--d0", type=int)
    sp.add_argument("--epsilon0", type=float)
    sp.add_argument("--epsilon1", type=float)
    sp.add_argument("--targets", type=float, nargs="+", help="qubit angles for fidelity")
    sp.add_argument("--bins", type=int)
    sp.add_argument("--jobs", type=int)
    sp.add_argument("--cache", help="JSON d1 cache")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("reduce", help="bin reduction or relative improvement of sweep records")
    sp.add_argument("records")
    sp.add_argument("--metric", choices=("M", "fidelity"), default="M")
    sp.add_argument("--target", type=int, default=0, help="fidelity target column index")
    sp.add_argument("--bins", type=int)
    sp.add_argument("--relative", metavar="BASELINE", help="emit L against this detector")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_reduce)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except NoSolutionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except NumericGuardError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, TypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
