"""Estimator study on a benchmark model.

Example::

    python scripts/run_montecarlo.py --model 1 --reps 50 --sizes 500,2000 --rounds 4 --out study.csv
"""

import argparse
import sys
import time

from gstvar.montecarlo import StudySpec, run_study


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", type=int, choices=(1, 2), default=1)
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--sizes", default="500,2000")
    ap.add_argument("--rounds", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args(argv)
    spec = StudySpec(model=args.model, sample_sizes=tuple(int(s) for s in args.sizes.split(",")),
                     replications=args.reps, rounds_per_fit=args.rounds, seed=args.seed,
                     threads=args.threads)
    t0 = time.time()
    res = run_study(spec)
    text = res.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    print(f"# {time.time() - t0:.0f} s, failures per size: {res.failures.tolist()}", file=sys.stderr)


if __name__ == "__main__":
    main()
