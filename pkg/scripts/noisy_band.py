"""Seed statistics of the noisy solver at one bond length.

Runs the hybrid loop under the bundled calibration for a range of seeds,
with and without the calibrated correction, and prints median and spread of
the final error together with the macro-iteration counts.

    python3 scripts/noisy_band.py --r 1.34 --seeds 20 --date 1
"""

import argparse

import numpy as np

from gpcsolve.hamiltonian import build_reduced_hamiltonian
from gpcsolve.integrals import Geometry, build_integrals
from gpcsolve.qdevice import load_calibration
from gpcsolve.reference import fci, rohf
from gpcsolve.solver import SolverConfig, macro_loop


def run(R, seeds, date, shots, mitigation):
    ints = build_integrals(Geometry.linear_h3(R))
    mos, _ = rohf(ints)
    e_fci = fci(build_reduced_hamiltonian(ints, mos)).energy
    noise = load_calibration("ibmqx4", date)
    errors, macros = [], []
    for seed in range(seeds):
        cfg = SolverConfig("noisy", noise=noise, shots=shots, seed=seed, mitigation=mitigation)
        res = macro_loop(cfg, integrals=ints, mos=mos)
        errors.append((res.energy - e_fci) * 1e3)
        macros.append(res.macro_iterations)
    return np.array(errors), np.array(macros)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--r", type=float, default=1.34)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--date", default="1")
    ap.add_argument("--shots", type=int, default=2048)
    args = ap.parse_args()
    print(f"R = {args.r} A, date {args.date}, {args.shots} shots, {args.seeds} seeds")
    for label, flag in (("mitigation on ", True), ("mitigation off", False)):
        err, mac = run(args.r, args.seeds, args.date, args.shots, flag)
        q1, med, q3 = np.percentile(err, [25, 50, 75])
        print(f"{label}: median {med:.4f} mH (IQR {q1:.4f} to {q3:.4f}, max {err.max():.4f}), "
              f"median macro iterations {np.median(mac):g}")


if __name__ == "__main__":
    main()
