"""Analytic and Monte Carlo fringe sweeps, power curves and a fit, written to an output directory.

    python3 scripts/reproduce_fringes.py --out runs/fringes [--plot]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from spfl.config import RunConfig
from spfl.detection import power_sweep, routing_at, sweep_experiment
from spfl.spectral import analytic_sweep, contrast_ratio, fit_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="setup")
    ap.add_argument("--out", default="runs/fringes")
    ap.add_argument("--n-gates", type=int, default=5_000_000)
    ap.add_argument("--plot", action="store_true", help="needs matplotlib")
    args = ap.parse_args()

    cfg = RunConfig.load(args.config)
    spec, grid = cfg.spectral(), cfg.grid()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    analytic_sweep(spec, grid, averaged=False).to_csv(out / "analytic.csv")
    analytic_sweep(spec, grid, averaged=True).to_csv(out / "analytic_averaged.csv")
    mc = sweep_experiment(spec, cfg.source(), cfg.detectors(), grid, args.n_gates,
                          cfg["run.seed"], averaged=True)
    mc.to_csv(out / "montecarlo.csv")

    fit = fit_sweep(mc, (spec.xi_same, spec.xi_diff, spec.alpha), spec.lambda_p0, weighted=True)
    print(f"fit: xi_same={fit.xi_same:.4g} xi_diff={fit.xi_diff:.4g} alpha={fit.alpha:.5f} ps^2 "
          f"(converged={fit.converged}, {fit.iterations} it)")
    for dl in (10.75, 15.2):
        print(f"averaged contrast at {dl} nm: {contrast_ratio(spec, dl):.0f}:1")

    powers = np.geomspace(0.04, 0.4, 6)
    with open(out / "power.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_lambda_nm", "power_mw", "ct_same", "ct_diff", "err_same", "err_diff"])
        for dl in (10.75, 15.2):
            for p in power_sweep(cfg.source(), cfg.detectors(), routing_at(spec, dl, True),
                                 powers, args.n_gates, cfg["run.seed"]):
                w.writerow([dl, p.power_mw, p.ct_same, p.ct_diff, p.err_same, p.err_diff])

    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 4))
        fine = analytic_sweep(spec, np.linspace(grid[0], grid[-1], 400), averaged=True)
        ax.plot(fine.delta_lambda, fine.c_t_same, label="same (model)")
        ax.plot(fine.delta_lambda, fine.c_t_diff, label="diff (model)")
        ax.errorbar(mc.delta_lambda, mc.c_t_same, mc.err_same, fmt="o", ms=3, label="same (MC)")
        ax.errorbar(mc.delta_lambda, mc.c_t_diff, mc.err_diff, fmt="s", ms=3, label="diff (MC)")
        ax.set_xlabel("detuning (nm)")
        ax.set_ylabel("true coincidences (1/s)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "fringes.png", dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
