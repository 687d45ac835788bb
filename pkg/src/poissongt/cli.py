"""Command-line entry point; every subcommand is a thin wrapper over the library.

Exit codes: 0 success, 1 domain/precondition error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings

from . import bounds as B
from .channel import ErrorMode
from .design import BudgetExceededError, is_disjunct, is_error_tolerant_disjunct, read_matrix
from .dist import RegimeError, RegimeWarning, TruncatedPoissonModel, parse_regime
from .harness import ExperimentConfig, Scheme, run, write_csv, write_trace


def _ranged(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def convert(text):
        try:
            x = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {kind.__name__}, got {text!r}") from None
        if lo is not None and (x < lo or (lo_open and x == lo)):
            raise argparse.ArgumentTypeError(f"{text} is below the allowed range")
        if hi is not None and (x > hi or (hi_open and x == hi)):
            raise argparse.ArgumentTypeError(f"{text} is above the allowed range")
        return x

    convert.__name__ = kind.__name__
    return convert


positive = _ranged(float, 0, lo_open=True)
pos_int = _ranged(int, 1)
nonneg_int = _ranged(int, 0)
unit_open = _ranged(float, 0, 1, lo_open=True, hi_open=True)
unit_closed = _ranged(float, 0, 1)


def _regime(text):
    try:
        return parse_regime(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


SIM_DEFAULTS = {
    "scheme": "method1",
    "regime": "unbounded:0.1",
    "v": 0,
    "m": None,
    "error_mode": "exact",
    "fixed_matrix": False,
    "workers": 1,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poissongt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p, with_config=True):
        p.add_argument("--lambda", dest="lam", type=positive, help="Poisson parameter")
        p.add_argument("--n", type=pos_int, help="population size")
        if with_config:
            p.add_argument("--config", help="JSON file with flag values (flags win)")

    sn = sub.add_parser("simulate-nonadaptive", help="Monte Carlo over a nonadaptive design")
    model_flags(sn)
    sn.add_argument("--scheme", choices=[s.value for s in Scheme if s is not Scheme.SEMIADAPTIVE])
    sn.add_argument("--regime", type=_regime, help="unbounded:EPS or bounded:K")
    sn.add_argument("--v", type=nonneg_int, help="outcome errors (method1-noisy)")
    sn.add_argument("--m", type=pos_int, help="override the designed test count")
    sn.add_argument("--error-mode", choices=[e.value for e in ErrorMode])
    sn.add_argument("--fixed-matrix", action="store_true", default=None)
    _sim_common(sn)

    ss = sub.add_parser("simulate-semiadaptive", help="Monte Carlo over the staged algorithm")
    model_flags(ss)
    _sim_common(ss)

    bd = sub.add_parser("bounds", help="CSV of every bound at (lambda, n)")
    model_flags(bd, with_config=False)
    bd.add_argument("--regime", type=_regime, default=parse_regime("unbounded:0.1"))
    bd.add_argument("--v", type=nonneg_int, default=0)
    bd.add_argument("--epsilon", type=unit_open, default=0.1, help="Fano slack")

    cd = sub.add_parser("check-disjunct", help="exhaustive disjunctness check of a matrix file")
    cd.add_argument("--matrix", required=True)
    cd.add_argument("--delta", type=nonneg_int, required=True)
    cd.add_argument("--v", type=nonneg_int, default=0)

    hf = sub.add_parser("huffman", help="source entropy and Huffman expected length")
    model_flags(hf, with_config=False)

    ex = sub.add_parser("exponent", help="error exponent, mutual information, ML bound")
    ex.add_argument("--rho", type=unit_closed, required=True)
    ex.add_argument("--i", type=pos_int, required=True)
    ex.add_argument("--d", type=pos_int, required=True)
    ex.add_argument("--p", type=unit_open, required=True)
    ex.add_argument("--m", type=pos_int)
    ex.add_argument("--n", type=pos_int)
    return parser


def _sim_common(p):
    p.add_argument("--trials", type=pos_int)
    p.add_argument("--seed", type=nonneg_int)
    p.add_argument("--workers", type=pos_int)
    p.add_argument("--trace", help="write per-trial JSON lines here")


def _merge_config(args, parser, sub_name):
    """Fill unset flags from --config, then from defaults."""
    cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        allowed = set(vars(args)) - {"command", "config"}
        bad = set(cfg) - allowed
        if bad:
            parser.error(f"{sub_name}: unknown config keys {sorted(bad)}")
    for key, default in SIM_DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, cfg.get(key, default))
    for key in ("lam", "n", "trials", "seed", "trace"):
        if getattr(args, key, None) is None and key in cfg:
            setattr(args, key, cfg[key])
    for key, flag in (("lam", "--lambda"), ("n", "--n"), ("trials", "--trials"), ("seed", "--seed")):
        if getattr(args, key) is None:
            parser.error(f"{sub_name}: {flag} is required")
    if isinstance(getattr(args, "regime", None), str):
        args.regime = parse_regime(args.regime)


def _simulate(args, parser, out) -> None:
    _merge_config(args, parser, args.command)
    if args.command == "simulate-semiadaptive":
        config = ExperimentConfig(args.lam, args.n, Scheme.SEMIADAPTIVE, args.trials, args.seed)
    else:
        config = ExperimentConfig(
            lam=args.lam, n=args.n, scheme=args.scheme, trials=args.trials, seed=args.seed,
            regime=args.regime, v=args.v, m_override=args.m,
            error_mode=args.error_mode, fixed_matrix=bool(args.fixed_matrix),
        )
    agg = run(config, workers=args.workers)
    write_csv([agg], out)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            write_trace([agg], fh)


def bound_rows(lam, n, regime, v=0, epsilon=0.1) -> list[B.BoundReport]:
    """Every bound applicable at (lam, n); rows whose preconditions fail are skipped."""
    model = TruncatedPoissonModel(lam, n)
    rows = []
    attempts = [
        lambda: B.fano_lower_bound(lam, n, epsilon),
        lambda: B.constructive_upper_bounds(model, regime, v),
        lambda: [B.adaptive_lower_bound(lam, n)],
        lambda: [B.semiadaptive_upper_bound(model.mean(), n)],
        lambda: [B.source_entropy(model)],
        lambda: [B.huffman_expected_length(model)] if n <= B.HUFFMAN_MAX_N else [],
    ]
    for make in attempts:
        try:
            rows.extend(make())
        except (ValueError, RegimeError):
            continue
    return rows


def _bounds(args, out) -> None:
    if args.lam is None or args.n is None:
        raise _Usage("bounds: --lambda and --n are required")
    rows = bound_rows(args.lam, args.n, args.regime, args.v, args.epsilon)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["name", "value", "unit", "assumptions"])
    for r in rows:
        writer.writerow([r.name, repr(float(r.value)), r.unit, "; ".join(r.assumptions)])


def _check(args, out) -> None:
    matrix = read_matrix(args.matrix)
    if args.v:
        verdict = is_error_tolerant_disjunct(matrix, args.delta, args.v)
    else:
        verdict = is_disjunct(matrix, args.delta)
    out.write(("true" if verdict else "false") + "\n")


def _huffman(args, out) -> None:
    if args.lam is None or args.n is None:
        raise _Usage("huffman: --lambda and --n are required")
    model = TruncatedPoissonModel(args.lam, args.n)
    reports = (B.source_entropy(model), B.huffman_expected_length(model))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["name", "value", "unit"])
    for r in reports:
        writer.writerow([r.name, repr(float(r.value)), r.unit])


def _exponent(args, out) -> None:
    rows = [
        ["error_exponent", repr(B.error_exponent(args.rho, args.i, args.d, args.p).value), "nats"],
        ["mutual_info_t1", repr(B.mutual_info_t1(args.i, args.d, args.p)), "nats"],
    ]
    if args.m is not None and args.n is not None:
        bound = B.ml_error_bound(args.m, args.rho, args.i, args.d, args.n, args.p)
        rows.append(["ml_error_bound", repr(bound), "probability"])
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["name", "value", "unit"])
    writer.writerows(rows)


class _Usage(Exception):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = sys.stdout
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default", RegimeWarning)
            if args.command.startswith("simulate"):
                _simulate(args, parser, out)
            elif args.command == "bounds":
                _bounds(args, out)
            elif args.command == "check-disjunct":
                _check(args, out)
            elif args.command == "huffman":
                _huffman(args, out)
            else:
                _exponent(args, out)
    except SystemExit as exc:
        return int(exc.code or 0)
    except _Usage as exc:
        print(f"poissongt: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RegimeError, BudgetExceededError, OSError, RuntimeError) as exc:
        print(f"poissongt: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
