"""Command-line front end.

Exit codes: 0 success (or certified stationary), 1 invalid input, 2 no adequate
estimate, 3 stationarity inconclusive, 4 necessary stationarity condition violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import (
    AllRoundsFailed,
    EmptyHistorySet,
    GstvarError,
    InvalidData,
    NoAdequateSolution,
    ScaleDegenerate,
    SingularHessian,
)
from .estimation import (
    EstimationConfig,
    FittedModel,
    fit,
    information_criteria,
    numerical_hessian,
    wald_constancy_test,
)
from .io import (
    atomic_write,
    read_data_csv,
    read_model,
    write_data_csv,
    write_model,
    write_rows_csv,
)
from .model import log_likelihood, simulate
from .montecarlo import StudySpec, run_study
from .params import ModelOrder
from .stationarity import check_necessary, check_sufficient

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_SOLUTION = 2
EXIT_INCONCLUSIVE = 3
EXIT_NECESSARY_VIOLATED = 4


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return int(args.threads)
    env = os.environ.get("GSTVAR_THREADS")
    return int(env) if env else 1


def _names(doc: dict, d: int):
    names = doc.get("variables")
    return list(names) if names else [f"y{i + 1}" for i in range(d)]


def _fitted_from_file(params, doc, data) -> FittedModel:
    ll = log_likelihood(params, data)
    return FittedModel(params, ll, data.T_total - params.order.p)


def cmd_fit(args) -> int:
    data = read_data_csv(args.data)
    order = ModelOrder(data.d, args.p, args.M)
    cfg = EstimationConfig(
        rounds=args.rounds,
        ga_generations=args.ga_generations,
        stationarity_margin=args.margin,
        min_regime_obs_fraction=args.min_regime_frac,
        seed=args.seed,
        threads=_threads(args),
        compute_hessian=args.hessian,
    )
    try:
        res = fit(data, order, cfg, progress=sys.stderr)
    except (NoAdequateSolution, AllRoundsFailed) as exc:
        _err(f"error: {exc}")
        return EXIT_NO_SOLUTION
    write_model(args.out, res.params, res, names=data.names)
    ic = information_criteria(res)
    print(f"loglik: {res.loglik:.10g}")
    print(f"T: {res.data_T}")
    print("criteria (divided by T): " + ", ".join(f"{k}={v:.10g}" for k, v in ic.items()))
    if res.jsr is not None:
        verdict = "certified" if res.jsr.certifies_stationarity else "not certified"
        print(f"JSR bounds: [{res.jsr.lower:.6f}, {res.jsr.upper:.6f}] "
              f"converged={res.jsr.converged} ({verdict})")
    for i, ll, status in res.rounds_summary:
        print(f"round {i}: loglik={ll:.10g} status={status}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.T < 1:
        _err("error: --T must be at least 1")
        return EXIT_INPUT
    params, doc = read_model(args.model)
    if not 1 <= args.init_regime <= params.order.M:
        _err("error: --init-regime out of range")
        return EXIT_INPUT
    y = simulate(params, args.T, init=args.init_regime - 1, seed=args.seed)
    write_data_csv(args.out, y.values, _names(doc, params.order.d))
    return EXIT_OK


def _parse_mode(mode: str):
    if mode == "data":
        return "data"
    if mode.startswith("delta="):
        return float(mode.split("=", 1)[1])
    raise ValueError(f"--mode must be 'data' or 'delta=<x>', got {mode!r}")


def _select_histories(args, params, data):
    from .structural import data_histories, regime_histories

    if getattr(args, "all_histories", False) or args.regime is None:
        return data_histories(params, data)
    return regime_histories(params, data, args.regime - 1, args.threshold)


def cmd_girf(args) -> int:
    from .structural import girf_collection

    params, doc = read_model(args.model)
    data = read_data_csv(args.data)
    names = _names(doc, params.order.d)
    try:
        mode = _parse_mode(args.mode)
    except ValueError as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    scale = None
    if args.scale_to is not None:
        if args.scale_to == 0:
            _err("error: --scale-to must be non-zero")
            return EXIT_INPUT
        scale = ((args.scale_var or args.shock) - 1, args.scale_to)
    if not 1 <= args.shock <= params.order.d:
        _err("error: --shock out of range")
        return EXIT_INPUT
    try:
        hs = _select_histories(args, params, data)
        coll = girf_collection(params, hs, args.shock - 1, args.H, args.R1, seed=args.seed,
                               mode=mode, scale=scale)
    except (EmptyHistorySet, ScaleDegenerate) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    series = names + [f"alpha{m + 1}" for m in range(params.order.M)]
    rows = []
    for res in coll.results:
        paths = np.hstack([res.variable_paths, res.weight_paths])
        for h in range(paths.shape[0]):
            for k, name in enumerate(series):
                rows.append([res.origin_index, h, name, repr(float(paths[h, k]))])
    write_rows_csv(args.out, ["history_id", "horizon", "series_name", "value"], rows)
    _err(f"{len(coll.results)} histories, {len(coll.excluded)} excluded as scale-degenerate")
    return EXIT_OK


def cmd_gfevd(args) -> int:
    from .structural import gfevd

    params, doc = read_model(args.model)
    data = read_data_csv(args.data)
    names = _names(doc, params.order.d)
    try:
        hs = _select_histories(args, params, data)
    except EmptyHistorySet as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    res = gfevd(params, hs, args.H, args.R1, seed=args.seed, delta=args.delta)
    series = names + [f"alpha{m + 1}" for m in range(params.order.M)]
    header = ["variable", "horizon"] + [f"shock_{n}" for n in names]
    rows = []
    for v, name in enumerate(series):
        for h in res.horizons:
            vals = res.contributions[v, h]
            rows.append([name, int(h)] + ["" if not np.isfinite(x) else repr(float(x)) for x in vals])
    write_rows_csv(args.out, header, rows)
    _err(f"{res.n_histories} histories")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from .diagnostics import (
        acf_ccf,
        correlation_table,
        pacf,
        qq_points,
        residuals,
        squared_std_residual_acf,
    )

    params, doc = read_model(args.model)
    data = read_data_csv(args.data)
    names = _names(doc, params.order.d)
    out = Path(args.out_dir)
    res = residuals(params, data)
    T = res.standardized.shape[0]
    max_lag = min(args.max_lag, T - 1)
    header = ["lag", "i", "j", "value", "band"]

    def table(acf, band):
        return [[r["lag"], r["i"], r["j"], repr(r["value"]), repr(r["band"])]
                for r in correlation_table(acf, band, names)]

    write_rows_csv(out / "residual_acf.csv", header, table(*acf_ccf(res.standardized, max_lag)))
    write_rows_csv(out / "squared_std_residual_acf.csv", header,
                   table(*squared_std_residual_acf(res, max_lag)))
    qq_rows = []
    for k, name in enumerate(names):
        for q, x in qq_points(res.standardized[:, k]):
            qq_rows.append([name, repr(float(q)), repr(float(x))])
    write_rows_csv(out / "qq.csv", ["series", "theoretical", "sample"], qq_rows)
    pacf_rows = []
    y = data.values
    pl = min(args.max_lag, (y.shape[0] - 1) // 2)
    band = 1.96 / np.sqrt(y.shape[0])
    for k, name in enumerate(names):
        for lag, v in enumerate(pacf(y[:, k], pl), start=1):
            pacf_rows.append([name, lag, repr(float(v)), repr(float(band))])
    write_rows_csv(out / "pacf.csv", ["series", "lag", "value", "band"], pacf_rows)

    wald = {}
    if params.order.M >= 2:
        fitted = _fitted_from_file(params, doc, data)
        fitted = FittedModel(fitted.params, fitted.loglik, fitted.data_T,
                             hessian=numerical_hessian(params, data))
        for restriction in ("intercepts_and_ar", "ar_only"):
            try:
                w = wald_constancy_test(fitted, data, restriction)
                wald[restriction] = {"statistic": w.statistic, "df": w.df, "p_value": w.p_value}
            except SingularHessian as exc:
                wald[restriction] = {"error": str(exc)}
    else:
        wald["note"] = "Wald constancy tests need at least two regimes"
    with atomic_write(out / "wald.json") as fh:
        fh.write(json.dumps(wald, indent=2) + "\n")
    return EXIT_OK


def cmd_check_stationarity(args) -> int:
    params, _ = read_model(args.model)
    ok, radii = check_necessary(params)
    print("regime spectral radii: " + ", ".join(f"{r:.6f}" for r in radii))
    if not ok:
        print("necessary condition violated: some regime is not stable")
        return EXIT_NECESSARY_VIOLATED
    cert = check_sufficient(params, args.tol, args.max_products)
    print(f"JSR lower bound: {cert.lower:.6f}")
    print(f"JSR upper bound: {cert.upper:.6f}")
    print(f"tolerance: {cert.tolerance_requested}  converged: {cert.converged}  "
          f"products explored: {cert.products_explored}")
    if cert.certifies_stationarity:
        print("certified: joint spectral radius < 1")
        return EXIT_OK
    print("inconclusive: the sufficient condition could not be verified")
    return EXIT_INCONCLUSIVE


def cmd_montecarlo(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(","))
    spec = StudySpec(model=args.model, sample_sizes=sizes, replications=args.reps,
                     rounds_per_fit=args.rounds, seed=args.seed, threads=_threads(args))
    res = run_study(spec)
    with atomic_write(args.out) as fh:
        fh.write(res.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gstvar", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="estimate a model by maximum likelihood")
    p.add_argument("data")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--rounds", type=int, default=16)
    p.add_argument("--ga-generations", type=int, default=60)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--margin", type=float, default=0.02)
    p.add_argument("--min-regime-frac", type=float, default=0.01)
    p.add_argument("--hessian", action="store_true")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="simulate data from a model file")
    p.add_argument("model")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--init-regime", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    for name, func in (("girf", cmd_girf), ("gfevd", cmd_gfevd)):
        p = sub.add_parser(name)
        p.add_argument("model")
        p.add_argument("data")
        p.add_argument("--H", type=int, default=36)
        p.add_argument("--R1", type=int, default=2500)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--regime", type=int)
        p.add_argument("--threshold", type=float, default=0.75)
        p.add_argument("--threads", type=int)
        if name == "girf":
            p.add_argument("--all-histories", action="store_true")
            p.add_argument("--shock", type=int, required=True)
            p.add_argument("--scale-var", type=int)
            p.add_argument("--scale-to", type=float)
            p.add_argument("--mode", default="data")
        else:
            p.add_argument("--all", dest="all_histories", action="store_true")
            p.add_argument("--delta", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("diagnose", help="residual diagnostics and Wald constancy tests")
    p.add_argument("model")
    p.add_argument("data")
    p.add_argument("--max-lag", type=int, default=24)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("check-stationarity", help="bound the joint spectral radius")
    p.add_argument("model")
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-products", type=int, default=10**6)
    p.set_defaults(func=cmd_check_stationarity)

    p = sub.add_parser("montecarlo", help="estimator study on the benchmark models")
    p.add_argument("--model", type=int, choices=(1, 2), default=1)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--sizes", default="500,2000")
    p.add_argument("--rounds", type=int, default=8)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_montecarlo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidData, ValueError) as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT
    except GstvarError as exc:
        _err(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
