"""Sweep ||C|| and t on random matrix models; print the worst contour/simplex gap and bound ratios."""
import argparse

import numpy as np

from polaron_series.dyson import (
    ContourSpec, contour_term, dyson_bound, random_instance, simplex_term, weighted_bound,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--nmax", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print("cnorm,t,worst_rel_gap,max_norm_ratio,max_weighted_ratio")
    for c in (0.1, 0.5, 0.9):
        for t in (0.1, 1.0, 10.0):
            gap = ratio = wratio = 0.0
            for _ in range(args.trials):
                model = random_instance(rng, args.dim, c)
                r = np.sqrt(model.a)
                for n in range(1, args.nmax + 1):
                    D, _ = contour_term(model, n, t, ContourSpec())
                    S = simplex_term(model, n, t)
                    gap = max(gap, np.linalg.norm(D - S) / np.linalg.norm(S))
                    ratio = max(ratio, np.linalg.norm(D, 2) / dyson_bound(n, c))
                    W = r[:, None] * D * r[None, :]
                    wratio = max(wratio, np.linalg.norm(W, 2) / weighted_bound(n, c, t))
            print(f"{c},{t},{gap:.3e},{ratio:.4f},{wratio:.4f}")


if __name__ == "__main__":
    main()
