"""Command-line entry point: ``ewens-pitman`` or ``python3 -m ewens_pitman``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .asymptotics import build_cov_model
from .audit import audit_formulas
from .errors import ConfigurationError, DomainError, ResourceError
from .exact_moments import build_moment_table, central_moment
from .harness import ExperimentConfig, report_header, run_batch
from .martingale import run_martingale
from .partition import FixedTheta, LinearTheta, ModelParams, SeedSpec
from .verify import DEFAULT_SEED, verify_clt, verify_lln, verify_martingale, verify_moments


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _model_args(p: argparse.ArgumentParser, need_n: bool = True) -> None:
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    if need_n:
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--regime", choices=("linear", "fixed"), default="linear")
    p.add_argument("--theta", type=float, help="theta for --regime fixed")


def _params(args) -> ModelParams:
    if args.regime == "fixed":
        if args.theta is None:
            raise ConfigurationError("--regime fixed needs --theta")
        regime = FixedTheta(args.theta)
    else:
        regime = LinearTheta(args.lam)
    return ModelParams(args.alpha, regime, args.n, args.d)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _csv_header(head: dict) -> str:
    return "".join(f"# {line}\n" for line in json.dumps(head, sort_keys=True).splitlines())


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig(_params(args), args.replicates, args.seed, _floats(args.checkpoints),
                           args.format, sampler=args.sampler, workers=args.workers)
    batch = run_batch(cfg)
    if args.format == "csv":
        _emit(_csv_header(report_header(cfg)) + batch.to_csv(), args.out)
    else:
        out = batch.to_dict()
        out["counts"] = batch.counts.tolist()
        _emit(json.dumps(out, indent=2), args.out)
    return 0


def cmd_exact(args) -> int:
    params = _params(args)
    table = build_moment_table(params, orders=tuple(range(1, args.s + 1)))
    head = report_header(params=params.describe())
    if args.format == "csv":
        _emit(_csv_header(head) + table.to_csv(), args.out)
        return 0
    out = {"header": head, "moments": list(table.rows())}
    if args.central:
        out["variance"] = [central_moment(r, 2, params.n, params) for r in range(params.d + 1)]
    _emit(json.dumps(out, indent=2), args.out)
    return 0


def cmd_asympt(args) -> int:
    model = build_cov_model(args.d, args.alpha, args.lam)
    model.check()
    out = {"header": report_header(alpha=args.alpha, **{"lambda": args.lam}, d=args.d), **model.to_dict()}
    _emit(json.dumps(out, indent=2), args.out)
    return 0


def cmd_audit(args) -> int:
    rep = audit_formulas(args.d, args.alpha, args.lam)
    if args.format == "json":
        _emit(json.dumps({"header": report_header(), **rep.to_dict()}, indent=2), args.out)
    else:
        _emit(rep.to_text(), args.out)
    return 0


def cmd_verify(args) -> int:
    what = args.what
    if what == "moments":
        rep = verify_moments()
    elif what == "lln":
        rep = verify_lln(_floats(args.alphas), args.lam, args.n or 10**6, args.d or 2, args.seed)
    elif what == "clt":
        rep = verify_clt(_floats(args.alphas), args.lam, args.n or 10**4, args.replicates,
                         args.d or 1, args.seed, args.sigma)
    else:
        alpha = _floats(args.alphas)[0]
        rep = verify_martingale(alpha, args.lam, args.n or 10**6, args.d or 2, args.seeds,
                                master_seed=args.seed)
        if args.csv:
            params = ModelParams.linear(alpha, args.lam, args.n or 10**6, args.d or 2)
            run = run_martingale(params, SeedSpec(args.seed, 0), tuple(np.linspace(0.05, 1.0, 20)))
            with open(args.csv, "w") as fh:
                fh.write(_csv_header(report_header(master_seed=args.seed, params=params.describe())))
                fh.write(run.to_csv())
    _emit(rep.to_json() if args.format == "json" else rep.to_text(), args.out)
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ewens-pitman",
                                 description="Ewens-Pitman partitions with theta = lambda * n.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate replicates of the block-count vector")
    _model_args(p)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--checkpoints", default="1.0", help="comma-separated x values in (0, 1]")
    p.add_argument("--sampler", choices=("fenwick", "scan"), default="fenwick")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exact", help="exact falling-factorial moments at h = n")
    _model_args(p)
    p.add_argument("--s", type=int, choices=(1, 2, 3, 4), default=4, help="highest order")
    p.add_argument("--central", action="store_true", help="also report exact variances")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("asympt", help="limit mean, Gamma and Sigma")
    _model_args(p, need_n=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_asympt)

    p = sub.add_parser("audit", help="compare closed forms with independent references")
    _model_args(p, need_n=False)
    p.add_argument("--out")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("verify", help="run a named check; exit code 0 iff it passes")
    p.add_argument("what", choices=("lln", "clt", "martingale", "moments"))
    p.add_argument("--alphas", default="0,0.5", help="comma-separated alphas (martingale uses the first)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--replicates", type=int, default=2000)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--sigma", choices=("conjugated", "linear_response"), default="conjugated")
    p.add_argument("--csv", help="martingale: write (h, entry, value) triples here")
    p.add_argument("--out")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
