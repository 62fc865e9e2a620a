"""Series-vs-Fock discrepancy against coupling for the single-mode model."""
import argparse

import numpy as np

from polaron_series.fock_oracle import fock_truncation, oracle_series_match, single_mode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmax", type=int, default=3)
    ap.add_argument("--fock-nmax", type=int, default=8)
    ap.add_argument("--t", type=float, default=2.0)
    ap.add_argument("--u", type=float, default=1.0)
    args = ap.parse_args()
    gs = np.geomspace(0.05, 0.5, 8)
    trunc = fock_truncation(1, args.fock_nmax)
    diffs = []
    print("g,series,oracle,difference,budget")
    for g in gs:
        r = oracle_series_match(single_mode(g=g), trunc, args.u, args.t, args.nmax)
        diffs.append(r.difference)
        print(f"{float(g)!r},{r.series!r},{r.oracle!r},{r.difference:.3e},{r.budget:.3e}")
    ok = np.array(diffs) > 1e-13  # below this the difference is roundoff
    slope = np.polyfit(np.log(gs[ok]), np.log(np.array(diffs)[ok]), 1)[0]
    print(f"# log-log slope {slope:.3f}, expected {2 * (args.nmax + 1)}")


if __name__ == "__main__":
    main()
