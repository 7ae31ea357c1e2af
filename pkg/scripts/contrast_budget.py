"""Averaged contrast versus filter bandwidth at the pi and 2pi roots.

    python3 scripts/contrast_budget.py
"""
import argparse
import dataclasses

from spfl.config import RunConfig
from spfl.spectral import contrast_ratio, fringe_root


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="setup")
    ap.add_argument("--scales", default="0.25,0.5,1,1.5,2")
    args = ap.parse_args()

    spec = RunConfig.load(args.config).spectral()
    roots = [fringe_root(spec, t, b) for t, b in ((3.141592653589793, (5, 14)),
                                                   (6.283185307179586, (12, 20)))]
    print(f"roots: {roots[0]:.4f} nm (split), {roots[1]:.4f} nm (same)")
    print(f"{'scale':>6} {'contrast@pi':>12} {'contrast@2pi':>13}")
    for k in (float(s) for s in args.scales.split(",")):
        def scaled(f):
            return None if f is None else dataclasses.replace(f, fwhm=f.fwhm * k)
        cfg = dataclasses.replace(spec, signal_filter=scaled(spec.signal_filter),
                                  idler_filter=scaled(spec.idler_filter),
                                  port_b_filter=scaled(spec.port_b_filter))
        print(f"{k:6.2f} {contrast_ratio(cfg, roots[0]):12.1f} {contrast_ratio(cfg, roots[1]):13.1f}")


if __name__ == "__main__":
    main()
