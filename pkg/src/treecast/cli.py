"""Command-line front end.

Machine-readable output (JSON, CSV, tree text) goes to stdout or ``--out``;
log lines go to stderr.  Exit codes: 0 success, 2 invalid parameters,
1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .broadcast import simulate_broadcast
from .experiments import (
    ExperimentConfig,
    diagnostics_rows,
    sweep,
    write_diagnostics_csv,
)
from .models import (
    InvariantError,
    ModelParams,
    ParamError,
    grow,
    tree_to_parent_text,
    validate_params,
)
from .oracle import exact_delta_distribution, exact_rmaj
from .urn import (
    classify_regime,
    critical_q,
    critical_q_reachable,
    simulate_urn,
    spectrum_report,
)
from .walk import run_walk, write_trajectory_csv


def _sanitize(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(_sanitize(payload)) + "\n")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _params_from(args) -> ModelParams:
    return validate_params(args.family, alpha=args.alpha, neg_d=args.alpha_neg_d)


def _rng_from(args) -> np.random.Generator:
    _log(f"seed: {args.seed}")
    return np.random.default_rng(args.seed)


def cmd_grow(args) -> int:
    params = _params_from(args)
    tree = grow(params, args.n, _rng_from(args))
    text = tree_to_parent_text(tree)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_broadcast(args) -> int:
    params = _params_from(args)
    result = simulate_broadcast(params, args.q, args.n, _rng_from(args))
    _emit({"seed": args.seed, **result.to_json_dict()})
    return 0


def cmd_walk(args) -> int:
    params = _params_from(args)
    result = run_walk(
        params,
        args.q,
        args.n,
        _rng_from(args),
        record_trajectory=args.trajectory is not None,
        stride=args.stride,
    )
    if args.trajectory:
        write_trajectory_csv(result, params, args.trajectory)
    final = result.final
    _emit(
        {
            "seed": args.seed,
            "N": final.n,
            "delta1": final.d1,
            "delta2": final.d2,
            "combined": params.combined(final.d1, final.d2),
        }
    )
    return 0


def cmd_urn(args) -> int:
    params = _params_from(args)
    st = simulate_urn(params, args.q, args.n, _rng_from(args))
    x1, x2 = st.weight_masses(params)
    _emit(
        {
            "seed": args.seed,
            "family": params.label,
            "alpha": params.alpha,
            "q": args.q,
            "N": st.n,
            "n_red": st.n_red,
            "n_blue": st.n_blue,
            "s_red": st.s_red,
            "s_blue": st.s_blue,
            "x1": x1,
            "x2": x2,
            "delta1": st.delta1,
            "delta2": st.delta2,
        }
    )
    return 0


def cmd_spectrum(args) -> int:
    _emit(spectrum_report(_params_from(args), args.q))
    return 0


def cmd_regime(args) -> int:
    params = _params_from(args)
    _emit(
        {
            "family": params.label,
            "alpha": params.alpha,
            "q": args.q,
            "f_alpha": critical_q(params),
            "f_alpha_reachable": critical_q_reachable(params),
            "regime": classify_regime(params, args.q).value,
        }
    )
    return 0


def cmd_oracle(args) -> int:
    params = _params_from(args)
    if args.rmaj:
        value = exact_rmaj(params, args.q, args.n, method=args.method)
        _emit(
            {
                "family": params.label,
                "alpha": params.alpha,
                "q": args.q,
                "N": args.n,
                "method": args.method,
                "rmaj": value,
            }
        )
        return 0
    if not args.out:
        raise ParamError("distribution output needs --out (or pass --rmaj)")
    dist = exact_delta_distribution(params, args.q, args.n)
    dist.to_csv(args.out)
    return 0


def _experiment_config(args, q_grid) -> ExperimentConfig:
    return ExperimentConfig(
        params=_params_from(args),
        q_grid=tuple(q_grid),
        n_vertices=args.n,
        replicates=args.reps,
        seed=args.seed,
        gamma=getattr(args, "gamma", 0.25),
        c_tilde=getattr(args, "c_tilde", None),
        trajectory_replicates=getattr(args, "traj_reps", None) or args.reps,
        workers=args.workers,
    )


def cmd_rmaj(args) -> int:
    config = _experiment_config(args, [args.q])
    _log(f"seed: {args.seed}")
    row = sweep(config)[0]
    row["seed"] = args.seed
    _emit(row)
    return 0


def _q_grid(start: float, end: float, step: float) -> list[float]:
    if step <= 0:
        raise ParamError("q-step must be positive")
    count = int(round((end - start) / step))
    grid = [start + i * step for i in range(count + 1)]
    return [q for q in grid if q <= end + 1e-12]


def cmd_sweep(args) -> int:
    grid = _q_grid(args.q_start, args.q_end, args.q_step)
    config = _experiment_config(args, grid)
    _log(f"seed: {args.seed}")
    rows = sweep(config, out_csv=args.out)
    if not args.out:
        _emit({"seed": args.seed, "rows": rows})
    return 0


def cmd_diagnostics(args) -> int:
    if not args.q:
        raise ParamError("pass at least one --q")
    config = _experiment_config(args, args.q)
    _log(f"seed: {args.seed}")
    rows = diagnostics_rows(config, include_event_a=args.event_a or None)
    if args.out:
        write_diagnostics_csv(rows, args.out)
    else:
        _emit({"seed": args.seed, "rows": rows})
    return 0


def _add_family(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", required=True, choices=["vsi", "se"])
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--alpha", type=float, help="nonnegative weight slope")
    group.add_argument(
        "--alpha-neg-d",
        type=int,
        metavar="D",
        help="negative family alpha = -1/D, kept exact",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecast",
        description="Broadcasting and majority root-color estimation on "
        "growing random recursive trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, *, seed=False, q=False, n=None, out=False):
        p = sub.add_parser(name)
        _add_family(p)
        if q:
            p.add_argument("--q", type=float, required=True)
        if n:
            p.add_argument("--N", dest="n", type=int, required=True, help=n)
        if seed:
            p.add_argument("--seed", type=int, required=True)
        if out:
            p.add_argument("--out", help="write output to a file instead of stdout")
        p.set_defaults(func=fn)
        return p

    add("grow", cmd_grow, seed=True, n="number of vertices", out=True)
    add("broadcast", cmd_broadcast, seed=True, q=True, n="number of vertices")
    p = add("walk", cmd_walk, seed=True, q=True, n="number of vertices")
    p.add_argument("--trajectory", help="write the trajectory CSV here")
    p.add_argument("--stride", type=int, default=1)
    add("urn", cmd_urn, seed=True, q=True, n="number of vertices")
    add("spectrum", cmd_spectrum, q=True)
    add("regime", cmd_regime, q=True)
    p = add("oracle", cmd_oracle, q=True, n="horizon for the exact law", out=True)
    p.add_argument("--rmaj", action="store_true", help="print the exact error rate")
    p.add_argument("--method", choices=["float64", "rational"], default="float64")
    p = add("rmaj", cmd_rmaj, seed=True, q=True, n="walk length")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p = add("sweep", cmd_sweep, seed=True, n="walk length", out=True)
    p.add_argument("--q-start", type=float, required=True)
    p.add_argument("--q-end", type=float, required=True)
    p.add_argument("--q-step", type=float, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--workers", type=int, default=1)
    p = add("diagnostics", cmd_diagnostics, seed=True, n="walk length", out=True)
    p.add_argument("--q", type=float, action="append", help="repeatable grid point")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--traj-reps", type=int, help="trajectory budget (default: --reps)")
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--c-tilde", dest="c_tilde", type=float)
    p.add_argument("--event-a", action="store_true", help="force the pair-count event")
    p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParamError as exc:
        _log(f"error: {exc}")
        return 2
    except (InvariantError, ArithmeticError, OSError) as exc:
        _log(f"runtime error: {exc}")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
