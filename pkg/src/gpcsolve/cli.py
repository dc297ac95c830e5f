"""
Command-line interface.

    gpcsolve scan   --rmin 0.6 --rmax 3.0 --step 0.2 --mode exact
    gpcsolve single --r 1.34 --mode noisy --calib ibmqx4 --date 1 --seed 7
    gpcsolve fci    --rmin 0.6 --rmax 3.0 --step 0.1

Exit codes: 0 success, 1 solver non-convergence (results still written),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import svgplot
from .hamiltonian import build_reduced_hamiltonian
from .integrals import Geometry, build_integrals
from .qdevice import CalibrationSchemaError, DEFAULT_SHOTS, load_calibration
from .reference import fci, rohf
from .solver import SolverConfig, macro_loop, scan

SCAN_COLUMNS = ("R_angstrom", "E_hybrid", "E_fci", "E_rohf", "error_mH", "tau_hybrid", "tau_fci",
                "tau_hf", "n4", "n5", "n6", "macro_iters", "converged")
FCI_COLUMNS = ("R_angstrom", "E_fci", "E_rohf", "n1", "n2", "n3", "n4", "n5", "n6", "pinning_defect")
R_MIN = 0.3


class UsageError(Exception):
    pass


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


def write_csv(path: Path, columns, rows) -> None:
    lines = [",".join(columns)] + [",".join(_cell(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_dat(path: Path, columns, rows) -> None:
    lines = ["# " + " ".join(columns)] + [" ".join(_cell(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def r_values(args) -> list:
    if args.r is not None:
        values = list(args.r)
    else:
        if args.step <= 0 or args.rmax < args.rmin:
            raise UsageError("need --step > 0 and --rmax >= --rmin")
        n = int(math.floor((args.rmax - args.rmin) / args.step + 1e-9)) + 1
        values = [round(args.rmin + k * args.step, 10) for k in range(n)]
    if any(r <= R_MIN for r in values):
        raise UsageError("R must exceed 0.3 Å")
    return values


def build_config(args) -> SolverConfig:
    noise = None
    if args.mode == "noisy":
        if not args.calib:
            raise UsageError("--mode noisy requires --calib (a CSV path or 'ibmqx4')")
        try:
            noise = load_calibration(args.calib, args.date)
        except (OSError, CalibrationSchemaError) as exc:
            raise UsageError(f"cannot load calibration: {exc}") from exc
    if args.shots is not None and args.shots < 1:
        raise UsageError("--shots must be positive")
    if args.grid_order < 1:
        raise UsageError("--grid-order must be at least 1")
    return SolverConfig(mode=args.mode, shots=args.shots, noise=noise, seed=args.seed,
                        grid_order=args.grid_order, mitigation=not args.no_mitigation)


def _outdir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _scan_rows(records):
    return [(r.R, r.E_hybrid, r.E_fci, r.E_rohf, r.error_mH, r.tau_hybrid, r.tau_fci, r.tau_hf,
             r.n4, r.n5, r.n6, r.macro_iters, r.converged) for r in records]


def plot_dissociation(records) -> str:
    R = [r.R for r in records]
    main = svgplot.Axes([
        svgplot.Series(R, [r.E_fci for r in records], "FCI"),
        svgplot.Series(R, [r.E_rohf for r in records], "ROHF", dashed=True),
        svgplot.Series(R, [r.E_hybrid for r in records], "hybrid", markers=True, line=False),
    ], "R (Å)", "Energy (hartree)", "H3 dissociation")
    inset = svgplot.Axes([svgplot.Series(R, [r.error_mH for r in records], "error", markers=True)],
                         "R (Å)", "error (mH)")
    return svgplot.render(main, inset)


def plot_mott(records) -> str:
    R = [r.R for r in records]
    return svgplot.render(svgplot.Axes([
        svgplot.Series(R, [r.tau_fci for r in records], "FCI"),
        svgplot.Series(R, [r.tau_hf for r in records], "HF", dashed=True),
        svgplot.Series(R, [r.tau_hybrid for r in records], "hybrid", markers=True, line=False),
        svgplot.Series(R, [0.0 for _ in records], "dissociated", color="#777777", dashed=True),
    ], "R (Å)", "tau", "Off-diagonal order in the Loewdin basis"))


def convergence_rows(trace: dict, e_fci: float):
    rows, best = [], math.inf
    quantum = [ev for ev in trace["evaluations"] if ev["stage"] == "quantum"]
    for k, ev in enumerate(quantum, start=1):
        err = (ev["energy"] - e_fci) * 1e3
        best = min(best, err)
        rows.append((k, ev["macro"], err, best))
    return rows


def plot_convergence(rows) -> str:
    n = [r[0] for r in rows]
    return svgplot.render(svgplot.Axes([
        svgplot.Series(n, [r[2] for r in rows], "evaluation", markers=True, line=False),
        svgplot.Series(n, [r[3] for r in rows], "best point"),
    ], "evaluation", "error (mH)", "Quantum-stage convergence", logy=True))


def cmd_scan(args) -> int:
    config = build_config(args)
    Rs = r_values(args)
    out = _outdir(args)
    records = scan(config, Rs, keep_trace=True)
    rows = _scan_rows(records)
    write_csv(out / "scan.csv", SCAN_COLUMNS, rows)
    (out / "scan.json").write_text(json.dumps([asdict(r) for r in records], indent=1) + "\n")
    if not args.no_plots:
        write_dat(out / "dissociation.dat", ("R_angstrom", "E_hybrid", "E_fci", "E_rohf", "error_mH"),
                  [row[:5] for row in rows])
        write_dat(out / "mott.dat", ("R_angstrom", "tau_hybrid", "tau_fci", "tau_hf"),
                  [(r.R, r.tau_hybrid, r.tau_fci, r.tau_hf) for r in records])
        (out / "dissociation.svg").write_text(plot_dissociation(records))
        (out / "mott.svg").write_text(plot_mott(records))
    for r in records:
        status = r.error or ("converged" if r.converged else "not converged")
        print(f"R={r.R:.3f}  E={r.E_hybrid:.10f}  error={r.error_mH:.4f} mH  tau={r.tau_hybrid:.4f}  {status}")
    return 0 if all(r.converged and r.error is None for r in records) else 1


def cmd_single(args) -> int:
    config = build_config(args)
    if args.r is None or len(args.r) != 1:
        raise UsageError("single needs exactly one --r")
    (R,) = r_values(args)
    out = _outdir(args)
    integrals = build_integrals(Geometry.linear_h3(R))
    mos, e_rohf = rohf(integrals)
    ref = fci(build_reduced_hamiltonian(integrals, mos))
    res = macro_loop(config, integrals=integrals, mos=mos)
    trace = res.trace.to_dict()
    err = (res.energy - ref.energy) * 1e3
    print(f"R = {R} Å  mode = {config.mode}")
    print(f"E_hybrid = {res.energy:.10f}  E_fci = {ref.energy:.10f}  E_rohf = {e_rohf:.10f}")
    print(f"error = {err:.4f} mH  macro iterations = {res.macro_iterations}  converged = {res.converged}")
    print("occupations n1..n6 = " + " ".join(f"{v:.6f}" for v in res.occupations.n))
    (out / "single.json").write_text(json.dumps({
        "R_angstrom": R, "E_hybrid": res.energy, "E_fci": ref.energy, "E_rohf": e_rohf, "error_mH": err,
        "occupations": res.occupations.n.tolist(), "theta": res.theta.tolist(),
        "macro_iters": res.macro_iterations, "converged": res.converged, "trace": trace,
    }, indent=1) + "\n")
    if not args.no_plots:
        rows = convergence_rows(trace, ref.energy)
        write_dat(out / "convergence.dat", ("evaluation", "macro", "error_mH", "best_error_mH"), rows)
        (out / "convergence.svg").write_text(plot_convergence(rows))
    return 0 if res.converged else 1


def cmd_fci(args) -> int:
    Rs = r_values(args)
    out = _outdir(args)
    rows = []
    for R in Rs:
        integrals = build_integrals(Geometry.linear_h3(R))
        mos, e_rohf = rohf(integrals)
        ref = fci(build_reduced_hamiltonian(integrals, mos))
        rows.append((R, ref.energy, e_rohf, *ref.natural_occupations, ref.pinning_defect))
        print(f"R={R:.3f}  E_fci={ref.energy:.10f}  E_rohf={e_rohf:.10f}  defect={ref.pinning_defect:.3e}")
    write_csv(out / "fci.csv", FCI_COLUMNS, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--rmin", type=float, default=0.6, help="first R in Å (default 0.6)")
    common.add_argument("--rmax", type=float, default=3.0, help="last R in Å (default 3.0)")
    common.add_argument("--step", type=float, default=0.2, help="R step in Å (default 0.2)")
    common.add_argument("--r", type=float, nargs="+", help="explicit R values in Å")
    common.add_argument("--mode", choices=("exact", "sampled", "noisy"), default="exact")
    common.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--calib", help="calibration CSV path, or 'ibmqx4' for the bundled table")
    common.add_argument("--date", default="1", help="calibration date column (default 1)")
    common.add_argument("--grid-order", type=int, default=2, help="mitigation calibration grid order")
    common.add_argument("--no-mitigation", action="store_true", help="skip the calibrated correction")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--no-plots", action="store_true", help="skip SVG/.dat figure output")

    parser = argparse.ArgumentParser(prog="gpcsolve", description="Hybrid pinned-2-RDM solver for linear H3.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="dissociation scan").set_defaults(func=cmd_scan)
    sub.add_parser("single", parents=[common], help="one geometry with a convergence trace").set_defaults(func=cmd_single)
    sub.add_parser("fci", parents=[common], help="classical FCI/ROHF reference table").set_defaults(func=cmd_fci)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"gpcsolve: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
