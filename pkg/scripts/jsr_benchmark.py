"""Joint spectral radius bounds on random stable matrix pairs, with and without preconditioning."""

import argparse
import time

import numpy as np

from gstvar.stationarity import jsr_bounds, spectral_radius


def random_pair(rng, n):
    r = rng.uniform(0.5, 0.95)
    out = []
    for _ in range(2):
        a = rng.normal(size=(n, n))
        out.append(a * r / spectral_radius(a))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--pairs", type=int, default=20)
    ap.add_argument("--tol", type=float, default=1e-2)
    ap.add_argument("--max-products", type=int, default=10**5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print("pair,precondition,lower,upper,converged,products,seconds")
    for k in range(args.pairs):
        mats = random_pair(rng, args.n)
        for pre in (False, True):
            t0 = time.time()
            c = jsr_bounds(mats, args.tol, args.max_products, precondition=pre)
            print(f"{k},{pre},{c.lower:.6f},{c.upper:.6f},{c.converged},{c.products_explored},"
                  f"{time.time() - t0:.2f}")


if __name__ == "__main__":
    main()
