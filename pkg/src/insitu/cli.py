"""Command-line front end: ``insitu <subcommand> [flags]``.

Every artifact starts with a metadata record (version, subcommand, config,
seed).  ``--threads`` only caps worker threads and is not recorded, since it
never changes results.  Defaults can be overridden through environment
variables named ``INSITU_<FLAG>``, e.g. ``INSITU_SEED=7``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict

import numpy as np

from . import __version__
from .errors import InsituError

ENV_PREFIX = "INSITU_"
DEFAULT_SEED = 12345

FORMATS = {
    "dist": ("json", "csv"),
    "moments": ("csv", "json"),
    "algo": ("json", "lines"),
    "brute": ("lines", "json"),
    "limit": ("json", "lines", "binary"),
    "rate": ("csv", "json"),
    "sample": ("lines", "csv"),
    "yn": ("lines", "binary"),
}


class CheckFailed(Exception):
    """A cross-check subcommand produced a FAIL verdict."""


def _grid(text: str) -> list:
    from .metrics import log_grid

    try:
        lo, hi, steps = (int(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be a:b:steps, got {text!r}") from None
    try:
        return log_grid(lo, hi, steps)
    except InsituError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonnegative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="insitu",
        description="Cost analysis of the in-situ permutation algorithm.",
    )
    parser.add_argument("--version", action="version", version=f"insitu {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, **flags):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--format", choices=FORMATS[name], default=FORMATS[name][0])
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--threads", type=_positive, default=None, help="cap worker threads")
        for flag, kwargs in flags.items():
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, **kwargs)
        return p

    seed = dict(type=_nonnegative, default=DEFAULT_SEED)
    add("dist", "exact law of X_n", n=dict(type=_positive, required=True))
    add(
        "moments",
        "moment table and asymptotic residuals",
        nmax=dict(type=_positive, default=1000),
        grid=dict(type=_grid, default=None, help="rows to emit, a:b:steps (log spaced)"),
        mode=dict(choices=("float", "rational"), default="float"),
        m3=dict(type=float, default=None, help="override the limit constant M3"),
    )
    add(
        "algo",
        "run the in-situ permutation on an input permutation",
        perm_file=dict(default=None, help="1-based indices; stdin if omitted"),
        values_file=dict(default=None, help="values to permute; default 1..n"),
    )
    add("brute", "brute-force cost law vs recurrence", n=dict(type=_positive, required=True))
    add(
        "limit",
        "limit constants and pool simulation",
        tol=dict(type=float, default=1e-10),
        pool=dict(type=_positive, default=100_000),
        generations=dict(type=_nonnegative, default=50),
        seed=seed,
    )
    add(
        "rate",
        "zeta_3 rate series and constant fit",
        grid=dict(type=_grid, default="1000:30000:12"),
        trials=dict(type=_nonnegative, default=0, help="Monte Carlo sample size (0 = off)"),
        generations=dict(type=_nonnegative, default=50),
        tol=dict(type=float, default=1e-10),
        seed=seed,
    )
    add(
        "sample",
        "major cost of random permutations",
        n=dict(type=_positive, required=True),
        trials=dict(type=_positive, default=1000),
        seed=seed,
    )
    add(
        "yn",
        "samples of the normalized cost Y_n",
        n=dict(type=_positive, required=True),
        trials=dict(type=_positive, default=1000),
        seed=seed,
    )
    _apply_env_defaults(sub)
    return parser


def _apply_env_defaults(sub) -> None:
    for subparser in sub.choices.values():
        overrides = {}
        for action in subparser._actions:
            if not action.option_strings or action.dest in ("help", "out"):
                continue
            env = ENV_PREFIX + action.dest.upper()
            if env in os.environ:
                raw = os.environ[env]
                overrides[action.dest] = action.type(raw) if action.type else raw
                action.required = False
        subparser.set_defaults(**overrides)


# ---------------------------------------------------------------------------
# output


def _config(args) -> dict:
    skip = {"subcommand", "out", "threads"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _meta(args) -> dict:
    return {
        "version": __version__,
        "subcommand": args.subcommand,
        "config": _config(args),
        "seed": getattr(args, "seed", None),
    }


def _header(args) -> str:
    return "# meta: " + json.dumps(_meta(args), sort_keys=True) + "\n"


def _json(args, payload: dict) -> bytes:
    payload = dict(payload)
    payload["meta"] = _meta(args)
    return (json.dumps(payload, sort_keys=False) + "\n").encode()


def _lines(args, values, comments=()) -> bytes:
    body = [_header(args)]
    body += [f"# {c}\n" for c in comments]
    body += [f"{v}\n" for v in values]
    return "".join(body).encode()


def _binary(args, values: np.ndarray) -> bytes:
    head = json.dumps(_meta(args), sort_keys=True).encode() + b"\n"
    return head + np.asarray(values, dtype="<f8").tobytes()


def _emit(data: bytes, out: str | None) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".insitu-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# subcommands


def _cmd_dist(args) -> bytes:
    from .recurrence import exact_distribution

    dist = exact_distribution(args.n)
    if args.format == "json":
        return _json(args, dist.to_dict())
    rows = [f"{k},{p.numerator}/{p.denominator}" for k, p in sorted(dist.probabilities.items())]
    return _lines(args, ["cost,probability", *rows])


def _cmd_moments(args) -> bytes:
    from .limit import limit_constants
    from .recurrence import asymptotic_residuals, moments_exact

    table = moments_exact(args.nmax, mode=args.mode)
    rows = [n for n in (args.grid or range(1, args.nmax + 1)) if n <= args.nmax]
    m3 = args.m3 if args.m3 is not None else limit_constants().M3
    residuals = asymptotic_residuals(table, rows, m3=m3)
    if args.format == "json":
        records = []
        for res in residuals:
            n, mean, var, k3, s2 = table.row(res.n)
            records.append(
                {
                    "n": n,
                    "mean": float(mean),
                    "variance": float(var),
                    "kappa3": float(k3),
                    "sigma2_n": float(s2),
                    "mean_residual": res.mean_residual,
                    "variance_residual": res.variance_residual,
                    "cumulant_residual": res.cumulant_residual,
                }
            )
        return _json(args, {"M3": m3, "rows": records})
    lines = ["n,mean,variance,kappa3,sigma2_n,mean_residual,variance_residual,cumulant_residual"]
    for res in residuals:
        n, *vals = table.row(res.n)
        vals = [float(v) for v in vals] + [res.mean_residual, res.variance_residual, res.cumulant_residual]
        lines.append(",".join([str(n), *(repr(v) for v in vals)]))
    return _lines(args, lines)


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _cmd_algo(args) -> bytes:
    from .algorithm import Permutation, permute_in_place
    from .errors import ValidationError

    perm = Permutation.parse(_read_text(args.perm_file))
    if args.values_file is not None:
        values = _read_text(args.values_file).split()
    else:
        values = [str(i) for i in range(1, len(perm) + 1)]
    if len(values) != len(perm):
        raise ValidationError(f"{len(values)} values for a permutation of length {len(perm)}")
    record = permute_in_place(values, perm)
    if args.format == "json":
        return _json(
            args,
            {
                "output": values,
                "search_steps": record.search_steps,
                "value_writes": record.value_writes,
                "cycle_leaders": record.cycle_leaders,
            },
        )
    comments = [
        f"search_steps={record.search_steps}",
        f"value_writes={record.value_writes}",
        f"cycle_leaders={record.cycle_leaders}",
    ]
    return _lines(args, values, comments)


def _cmd_brute(args) -> bytes:
    from .algorithm import cost_distribution_bruteforce
    from .recurrence import exact_distribution

    brute = cost_distribution_bruteforce(args.n)
    exact = exact_distribution(args.n)
    lo, hi = exact.support
    ok = brute == exact
    verdict = (
        f"PASS: brute-force law equals recurrence law (support {lo}..{hi})"
        if ok
        else f"FAIL: brute-force law differs from recurrence law at n={args.n}"
    )
    if args.format == "json":
        data = _json(args, {"n": args.n, "verdict": "PASS" if ok else "FAIL", "support": [lo, hi]})
    else:
        data = _lines(args, [verdict])
    if not ok:
        raise CheckFailed(verdict, data)
    return data


def _cmd_limit(args) -> bytes:
    from .limit import limit_constants, simulate_limit

    constants = limit_constants(args.tol)
    pool = simulate_limit(args.pool, args.generations, args.seed, threads=args.threads)
    if args.format == "lines":
        return _lines(args, (repr(float(v)) for v in pool.values))
    if args.format == "binary":
        return _binary(args, pool.values)
    return _json(
        args,
        {
            "constants": constants.to_dict(),
            "identities": {
                "integral_C": constants.integral_C,
                "three_integral_C2": constants.three_integral_C2,
            },
            "rate_constant": constants.rate_constant,
            "pool": pool.summary(),
        },
    )


def _cmd_rate(args) -> bytes:
    from .limit import limit_constants
    from .metrics import MonteCarloConfig, doubling_ratio, fit_rate_constant, rate_csv, rate_series
    from .recurrence import moments_exact

    grid = args.grid
    constants = limit_constants(args.tol)
    table = moments_exact(max(grid))
    mc = None
    if args.trials:
        mc = MonteCarloConfig(
            samples=args.trials, generations=args.generations, seed=args.seed, threads=args.threads
        )
    points = rate_series(grid, table, constants, mc)
    fit = fit_rate_constant(points, constants.rate_constant) if len(points) >= 2 else None
    report = {}
    if fit is not None:
        report = {
            "intercept": fit.intercept,
            "slope": fit.slope,
            "target": fit.target,
            "relative_error": fit.relative_error,
        }
    if args.format == "json":
        return _json(
            args,
            {
                "points": [asdict(p) for p in points],
                "fit": report,
            },
        )
    comments = [f"fit {k}={v!r}" for k, v in report.items()]
    mid = [n for n in grid if 2 * n <= max(grid)]
    if mid:
        ratio, expected = doubling_ratio(table, constants, mid[-1])
        comments.append(f"doubling n={mid[-1]} ratio={ratio!r} expected={expected!r}")
    text = _header(args) + rate_csv(points) + "".join(f"# {c}\n" for c in comments)
    return text.encode()


def _cmd_sample(args) -> bytes:
    from .algorithm import cost_sample

    costs = cost_sample(args.n, args.trials, args.seed, threads=args.threads)
    if args.format == "csv":
        return _lines(args, ["trial,search_steps", *(f"{i},{c}" for i, c in enumerate(costs))])
    return _lines(args, (int(c) for c in costs))


def _cmd_yn(args) -> bytes:
    from .limit import simulate_Yn
    from .recurrence import FLOAT_MOMENT_CAP, moments_exact

    if args.n > FLOAT_MOMENT_CAP:
        from .errors import SizeError

        raise SizeError(f"n must be <= {FLOAT_MOMENT_CAP} for exact centering")
    table = moments_exact(args.n)
    y = simulate_Yn(args.n, args.trials, table, args.seed, threads=args.threads)
    if args.format == "binary":
        return _binary(args, y)
    return _lines(args, (repr(float(v)) for v in y))


COMMANDS = {
    "dist": _cmd_dist,
    "moments": _cmd_moments,
    "algo": _cmd_algo,
    "brute": _cmd_brute,
    "limit": _cmd_limit,
    "rate": _cmd_rate,
    "sample": _cmd_sample,
    "yn": _cmd_yn,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        from ._streams import set_threads

        set_threads(args.threads)
    try:
        data = COMMANDS[args.subcommand](args)
    except CheckFailed as exc:
        _, data = exc.args
        _emit(data, args.out)
        print(exc.args[0], file=sys.stderr)
        return 1
    except (InsituError, OSError) as exc:
        print(f"insitu {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    try:
        _emit(data, args.out)
    except OSError as exc:
        print(f"insitu {args.subcommand}: error: cannot write output: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
