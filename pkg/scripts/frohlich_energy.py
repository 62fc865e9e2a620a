"""E0(u) for the Frohlich-type model at a few weak couplings, with concavity verdicts."""
import argparse

import numpy as np

from polaron_series.errors import TruncationError
from polaron_series.model import ModelSpec, essential_spectrum
from polaron_series.series import SeriesSettings, concavity_check, energy_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="0.01,0.03,0.05")
    ap.add_argument("--nmax", type=int, default=2)
    ap.add_argument("--mc", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    u = np.linspace(0, 0.75, 7)
    st = SeriesSettings(mc_count=args.mc, seed=args.seed, concentration=0.5)
    print("alpha,u,E0,std_error,fit_residual")
    for alpha in map(float, args.alphas.split(",")):
        m = ModelSpec.frohlich(alpha)
        try:
            curve = energy_curve(m, u, nmax=args.nmax, settings=st)
        except TruncationError as exc:
            print(f"# alpha={alpha}: {exc}")
            continue
        for row in zip(curve.u, curve.E0, curve.std_error, curve.fit_residual):
            print(f"{alpha}," + ",".join(repr(float(x)) for x in row))
        cc = concavity_check(curve)
        ess = essential_spectrum(curve, m)(0.0)
        print(f"# alpha={alpha}: concave={cc.passed} max d2={cc.second_differences.max():.3e} "
              f"E0(0)={curve.E0[0]:.6f} (weak-coupling -alpha) E_ess={ess:.6f}")


if __name__ == "__main__":
    main()
