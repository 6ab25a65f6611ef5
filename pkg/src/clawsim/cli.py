"""``clawsim`` command line.

Every subcommand accepts ``--seed``, ``--mode``, ``--backend`` and ``--out``.
Results go to stdout unless ``--out`` names a file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from fractions import Fraction

from clawsim import detect, harness, johnson
from clawsim.errors import ClawsimError
from clawsim.instances import (
    COMPARISON,
    STANDARD,
    OracleSession,
    load_instance,
    make_planted_instance,
    make_rng,
    serialize_instance,
)
from clawsim.search import SearchConfig, claw_search, k_claw_search

REGIMES = {
    "balanced": harness.BALANCED_GRID,
    "unbalanced": harness.UNBALANCED_GRID,
    "k3": harness.K3_GRID,
}


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    def default(o):
        if isinstance(o, Fraction):
            return float(o)
        raise TypeError(type(o).__name__)

    return json.dumps(obj, default=default, sort_keys=True) + "\n"


def _sizes(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace("x", ",").split(",") if x)


def _grid(text: str) -> tuple[tuple[int, ...], ...]:
    return tuple(_sizes(pt) for pt in text.split(";") if pt.strip())


def cmd_spectra(args) -> None:
    _emit(johnson.spectrum_csv(args.n, args.k), args.out)


def cmd_generate(args) -> None:
    sizes = _sizes(args.sizes)
    inst = make_planted_instance(len(sizes), sizes, args.claws, args.range_size, seed=make_rng(args.seed))
    _emit(serialize_instance(inst), args.out)


def _params_for(inst, args) -> detect.DetectParams:
    if args.subset_sizes:
        return detect.make_params(inst.domain_sizes, _sizes(args.subset_sizes), args.c)
    return detect.choose_params(inst.domain_sizes, args.c)


def cmd_walk_probe(args) -> None:
    inst = load_instance(args.instance)
    full = [(1, n) for n in inst.domain_sizes]
    base = _params_for(inst, args)
    t_max = args.t_max or base.T
    params = dataclasses.replace(base, T=t_max)
    profile = detect.claw_detect_profile(inst, full, params)
    lines = ["T,success_probability"]
    running = 0.0
    for T, p in enumerate(profile, start=1):
        running += float(p)
        lines.append(f"{T},{running / T!r}")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_detect(args) -> None:
    inst = load_instance(args.instance)
    session = OracleSession(inst, args.mode)
    full = [(1, n) for n in inst.domain_sizes]
    params = _params_for(inst, args)
    out = detect.claw_detect(
        session, full, params, backend=args.backend, rng=make_rng(args.seed), p_err=args.p_err
    )
    _emit(_json({"verdict": out.verdict, "queries": out.queries_used, "backend": out.backend, "T": params.T}), args.out)


def cmd_search(args) -> None:
    inst = load_instance(args.instance)
    session = OracleSession(inst, args.mode)
    cfg = SearchConfig(backend=args.backend, c_final=args.c_final, p_err=args.p_err, c=args.c, seed=args.seed)
    result = (claw_search if inst.k == 2 else k_claw_search)(session, cfg)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(result.trace_jsonl())
    record = {
        "claw": list(result.claw.indices),
        "found": result.found,
        "verified": result.claw.verify(inst) if result.found else None,
        "total_queries": result.total_queries,
    }
    _emit(_json(record), args.out)


def _experiment(args, grid) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(
        grid=grid,
        trials=args.trials,
        seed=args.seed,
        backend=args.backend,
        mode=args.mode,
        p_err=args.p_err,
        c=args.c,
        c_final=args.c_final,
        num_claws=args.claws,
        workers=args.workers,
    )


def cmd_scaling(args) -> None:
    grid = _grid(args.grid) if args.grid else REGIMES[args.regime]
    rows = harness.run_scaling_experiment(_experiment(args, grid))
    text = harness.rows_to_csv(rows, timing=args.timing)
    if args.fit:
        against = "largest" if args.regime == "unbalanced" and not args.grid else "product"
        fit = harness.fit_exponent(rows, against=against, mode=args.mode)
        text += f"# slope vs {against}: {fit.slope!r} intercept: {fit.intercept!r}\n"
    _emit(text, args.out)


def cmd_errors(args) -> None:
    grid = (_sizes(args.sizes),)
    st = harness.estimate_error_rate(_experiment(args, grid), confidence=args.confidence)
    _emit(_json(dataclasses.asdict(st)), args.out)


def cmd_calibrate(args) -> None:
    family = detect.tiny_family(seed=args.seed)
    curve = detect.calibration_curve(family)
    try:
        c = detect.calibrate_constant(family)
    except ClawsimError:
        c = None
    _emit(_json({"c": c, "curve": {str(k): v for k, v in curve.items()}, "target": detect.CALIBRATION_TARGET}), args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--mode", choices=(STANDARD, COMPARISON), default=STANDARD)
    common.add_argument("--backend", choices=detect.BACKENDS, default=detect.COST_MODEL)
    common.add_argument("--out", default=None, help="write output here instead of stdout")

    walk_opts = argparse.ArgumentParser(add_help=False)
    walk_opts.add_argument("--c", type=float, default=detect.DEFAULT_C, help="walk-length constant")
    walk_opts.add_argument("--p-err", type=float, default=detect.DEFAULT_P_ERR)

    search_opts = argparse.ArgumentParser(add_help=False)
    search_opts.add_argument("--c-final", type=int, default=100)

    exp_opts = argparse.ArgumentParser(add_help=False)
    exp_opts.add_argument("--trials", type=int, default=20)
    exp_opts.add_argument("--claws", type=int, default=1)
    exp_opts.add_argument("--workers", type=int, default=1)

    ap = argparse.ArgumentParser(prog="clawsim", description="Quantum-walk claw finding simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectra", parents=[common], help="Johnson walk spectrum as CSV")
    p.add_argument("n", type=int)
    p.add_argument("k", type=int)
    p.set_defaults(func=cmd_spectra)

    p = sub.add_parser("generate", parents=[common], help="write a planted instance")
    p.add_argument("--sizes", required=True, help="comma-separated domain sizes, e.g. 4,8")
    p.add_argument("--claws", type=int, default=1)
    p.add_argument("--range-size", type=int, default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("walk-probe", parents=[common, walk_opts], help="exact success probability vs T")
    p.add_argument("--instance", required=True)
    p.add_argument("--subset-sizes", default=None)
    p.add_argument("--t-max", type=int, default=None)
    p.set_defaults(func=cmd_walk_probe)

    p = sub.add_parser("detect", parents=[common, walk_opts], help="one detection run")
    p.add_argument("--instance", required=True)
    p.add_argument("--subset-sizes", default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("search", parents=[common, walk_opts, search_opts], help="find a claw")
    p.add_argument("--instance", required=True)
    p.add_argument("--trace", default=None, help="JSON-lines trace, one record per detect batch")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("scaling", parents=[common, walk_opts, search_opts, exp_opts], help="query scaling CSV")
    p.add_argument("--regime", choices=sorted(REGIMES), default="balanced")
    p.add_argument("--grid", default=None, help="explicit grid, e.g. '256,256;512,512'")
    p.add_argument("--fit", action="store_true", help="append the fitted log-log slope")
    p.add_argument("--timing", action="store_true", help="add a wall_time column")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("errors", parents=[common, walk_opts, search_opts, exp_opts], help="search failure rate")
    p.add_argument("--sizes", default="1024,1024")
    p.add_argument("--confidence", type=float, default=0.99)
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("calibrate", parents=[common], help="calibrate the walk constant on tiny instances")
    p.set_defaults(func=cmd_calibrate, seed=2024)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ClawsimError as exc:
        print(f"clawsim: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
