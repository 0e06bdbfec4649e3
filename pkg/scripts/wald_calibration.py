"""Size and power of the Wald constancy test.

Size: data from a one-regime VAR (regime 1 of benchmark model 1), fitted with
two regimes. Power: data from benchmark model 2. Prints the p-value of every
replication and a summary line.
"""

import argparse

import numpy as np

from gstvar.errors import GstvarError
from gstvar.estimation import EstimationConfig, fit, wald_constancy_test
from gstvar.model import simulate
from gstvar.montecarlo import benchmark_model
from gstvar.params import ModelOrder, ParameterVector


def one_regime_truth():
    r = benchmark_model(1).regimes[0]
    return ParameterVector.from_arrays([r.phi0], [list(r.ar_mats)], [r.omega], [])


def pvalues(truth, T, reps, rounds, seed, restriction):
    out = []
    for rep in range(reps):
        y = simulate(truth, T, init=0, seed=np.random.SeedSequence([seed, rep])).values
        try:
            f = fit(y, ModelOrder(truth.order.d, truth.order.p, 2),
                    EstimationConfig(rounds=rounds, seed=rep, compute_hessian=True))
            p = wald_constancy_test(f, y, restriction).p_value
        except GstvarError as exc:
            print(f"{rep}: failed ({type(exc).__name__})", flush=True)
            continue
        print(f"{rep}: p={p:.4g}", flush=True)
        out.append(p)
    return np.array(out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--which", choices=("size", "power"), default="size")
    ap.add_argument("--T", type=int, default=500)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--rounds", type=int, default=4)
    ap.add_argument("--seed", type=int, default=707)
    ap.add_argument("--restriction", default="intercepts_and_ar",
                    choices=("intercepts_and_ar", "ar_only"))
    args = ap.parse_args(argv)
    truth = one_regime_truth() if args.which == "size" else benchmark_model(2)
    p = pvalues(truth, args.T, args.reps, args.rounds, args.seed, args.restriction)
    if p.size:
        print(f"{p.size} tests, {np.sum(p < 0.05)} rejections at 5%, {np.sum(p < 0.01)} at 1%, "
              f"median p {np.median(p):.3f}")


if __name__ == "__main__":
    main()
