"""Command-line interface.

Subcommands: simulate, predict, expand, compare, diagnose, swap-check.
Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .ensembles import (VectorEnsemble, concentration_diagnostic,
                        moment_diagnostic, sample_matrix)
from .errors import KernelSpectraError
from .experiments import (law_table, load_config, parse_config,
                          run_universality)
from .kernels import KernelSpec, build, parse_envelope, single_entry_swap
from .limit_solver import save_limit_law, solve_grid
from .mp_theory import AffineMPLaw
from .orthopoly import envelope_coeffs
from .spectral import ESD, eigenvalues, save_esd


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ensemble", default="gaussian",
                   help="gaussian | rademacher | sphere")
    p.add_argument("--p", type=int, default=200, help="vector dimension")
    p.add_argument("--n", type=int, default=400, help="matrix size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--envelope", default="identity",
                   help="e.g. identity, exp:a=1, power:a=0.5, sign-scaled, "
                        "nonsmooth-sin, const:c=1")
    p.add_argument("--kernel", default="inner", help="inner | distance")
    p.add_argument("--diag", default="zero", help="keep | zero")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelspectra",
        description="Random kernel matrix spectra and their limiting laws")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="eigenvalues of one configuration")
    _add_model_flags(sim)
    sim.add_argument("--trials", type=int, default=1)
    sim.add_argument("--out", default=None, help="ESD csv path")

    pred = sub.add_parser("predict", help="emit a limiting law as CSV")
    pred.add_argument("--law", default="mp", help="mp | fe")
    pred.add_argument("--gamma", type=float, default=1.0)
    pred.add_argument("--shift", type=float, default=None)
    pred.add_argument("--scale", type=float, default=None)
    pred.add_argument("--envelope", default=None)
    pred.add_argument("--kernel", default="inner")
    pred.add_argument("--diag", default="keep")
    pred.add_argument("--a", type=float, default=None)
    pred.add_argument("--nu", type=float, default=None)
    pred.add_argument("--epsilon", type=float, default=1e-3)
    pred.add_argument("--out", default=None, help="law csv path")

    exp = sub.add_parser("expand", help="envelope coefficient table")
    exp.add_argument("--ensemble", default="gaussian")
    exp.add_argument("--p", type=int, default=500)
    exp.add_argument("--envelope", required=True)
    exp.add_argument("--degree", type=int, default=4)
    exp.add_argument("--samples", type=int, default=1_000_000)
    exp.add_argument("--seed", type=int, default=0)

    cmp_ = sub.add_parser("compare", help="full universality run from a config")
    cmp_.add_argument("--config", default=None, help="key=value config file")
    cmp_.add_argument("--set", action="append", default=[],
                      metavar="KEY=VALUE", help="config overrides")
    cmp_.add_argument("--out", default=None, help="output directory override")

    diag = sub.add_parser("diagnose", help="moment and concentration checks")
    diag.add_argument("--ensemble", default="gaussian")
    diag.add_argument("--p", type=int, default=500)
    diag.add_argument("--n", type=int, default=200)
    diag.add_argument("--seed", type=int, default=0)
    diag.add_argument("--K", type=int, default=4)
    diag.add_argument("--trials", type=int, default=200)

    swap = sub.add_parser("swap-check",
                          help="rank of a single-entry swap difference")
    _add_model_flags(swap)
    swap.add_argument("--i", type=int, default=0, help="sample row index")
    swap.add_argument("--j", type=int, default=0, help="sample column index")
    swap.add_argument("--value", type=float, default=0.0, help="new entry value")
    return parser


def _cmd_simulate(args) -> int:
    spec = KernelSpec(args.kernel, args.diag, parse_envelope(args.envelope))
    ens = VectorEnsemble(args.ensemble, args.p)
    all_samples = []
    for t in range(max(args.trials, 1)):
        S = sample_matrix(ens, args.n, args.seed + t)
        all_samples.append(eigenvalues(build(spec, S)))
    pooled = ESD.pooled(all_samples)
    lam = pooled.points
    print(f"model {spec.label()}  ensemble={args.ensemble} n={args.n} "
          f"p={args.p} gamma={args.p / args.n:g} trials={args.trials}")
    print(f"eigenvalues: count={lam.size} min={lam.min():.6g} "
          f"max={lam.max():.6g} mean-trace={lam.sum() / args.trials:.6g}")
    if args.out:
        save_esd(args.out, pooled,
                 {"p": args.p, "gamma": args.p / args.n, "seed": args.seed,
                  "spec": spec.label(), "trials": args.trials})
        print(f"wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    if args.law == "mp":
        if args.shift is not None or args.scale is not None:
            law = AffineMPLaw(gamma=args.gamma,
                              shift=args.shift or 0.0,
                              scale=1.0 if args.scale is None else args.scale)
        elif args.envelope is not None:
            from .mp_theory import predicted_law
            spec = KernelSpec(args.kernel, args.diag,
                              parse_envelope(args.envelope))
            law = predicted_law(spec, args.gamma)
        else:
            law = AffineMPLaw(gamma=args.gamma, shift=0.0, scale=1.0)
        print(f"affine MP law: {law.to_record()}")
    elif args.law == "fe":
        if args.a is None or args.nu is None:
            raise ValueError("functional-equation law needs --a and --nu")
        law = solve_grid(args.a, args.nu, args.gamma, epsilon=args.epsilon)
        print(f"functional-equation law: {law.to_record()}")
        if args.out:
            save_limit_law(args.out, law)
            print(f"wrote {args.out}")
        return 0
    else:
        raise ValueError(f"unknown law kind {args.law!r} (use mp or fe)")
    if args.out:
        xs, dens, cdfs = law_table(law)
        lines = ["x,density,cdf"]
        lines += [f"{float(x)!r},{float(d)!r},{float(c)!r}"
                  for x, d, c in zip(xs, dens, cdfs)]
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_expand(args) -> int:
    params = envelope_coeffs(parse_envelope(args.envelope),
                             VectorEnsemble(args.ensemble, args.p),
                             args.degree, samples=args.samples, seed=args.seed)
    print(f"envelope {args.envelope} on {args.ensemble} (p={args.p}, "
          f"samples={args.samples})")
    print(f"{'k':>3} {'a_k':>14} {'stderr':>12}")
    for k in range(params.degree + 1):
        print(f"{k:>3} {params.coefficients[k]:>14.6f} "
              f"{params.stderr[k]:>12.2g}")
    print(f"a={params.a:.6f}  nu={params.nu:.6f}  "
          f"tail_mass={params.tail_mass:.6f}")
    return 0


def _cmd_compare(args) -> int:
    overrides = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"override must be KEY=VALUE, got {item!r}")
        overrides[key.strip()] = val.strip()
    if args.out is not None:
        overrides["out"] = args.out
    if args.config is not None:
        config = load_config(args.config, overrides)
    else:
        config = parse_config("", overrides)
    result = run_universality(config)
    for fam, rec in result.pooled_distances.items():
        print(f"{fam}: pooled ks={rec.ks:.4f} w1={rec.w1:.4f} "
              f"stieltjes_sup={rec.stieltjes_sup:.4f}")
    if result.pooled_cross is not None:
        rec = result.pooled_cross
        print(f"cross-ensemble: ks={rec.ks:.4f} w1={rec.w1:.4f} "
              f"stieltjes_sup={rec.stieltjes_sup:.4f}")
    if result.errors:
        print(f"{len(result.errors)} trial error(s); results incomplete")
        for err in result.errors[:5]:
            print(f"  trial {err.trial} [{err.ensemble}/{err.stage}]: "
                  f"{err.message}")
    if config.out:
        print(f"wrote {config.out}/")
    return 2 if result.incomplete else 0


def _cmd_diagnose(args) -> int:
    ens = VectorEnsemble(args.ensemble, args.p)
    mom = moment_diagnostic(ens, args.K, args.trials, args.seed)
    print(f"E|sqrt(p) entry|^{args.K} = {mom.estimate:.6f} "
          f"+- {mom.stderr:.2g}   (at 2p: {mom.estimate_2p:.6f} "
          f"+- {mom.stderr_2p:.2g})")
    print(f"growth flagged: {mom.growth_flagged}")
    S = sample_matrix(ens, args.n, args.seed)
    conc = concentration_diagnostic(S)
    print(f"max |  ||X_i||^2 - 1 | = {conc.max_norm_dev:.6f}")
    print(f"max | X_i^T X_j |     = {conc.max_inner:.6f}")
    return 0


def _cmd_swap_check(args) -> int:
    spec = KernelSpec(args.kernel, args.diag, parse_envelope(args.envelope))
    S = sample_matrix(VectorEnsemble(args.ensemble, args.p), args.n, args.seed)
    before, after = single_entry_swap(S, args.i, args.j, args.value, spec)
    delta = after.data - before.data
    sv = np.linalg.svd(delta, compute_uv=False)
    norm = sv[0] if sv[0] > 0 else 1.0
    third = sv[2] if sv.size > 2 else 0.0
    print(f"singular values of the swap difference: "
          f"{', '.join(f'{s:.3e}' for s in sv[:5])}")
    print(f"numerical rank <= 2: {third <= 1e-9 * norm} "
          f"(sigma_3 / sigma_1 = {third / norm:.3e})")
    outside = delta.copy()
    outside[args.j, :] = 0.0
    outside[:, args.j] = 0.0
    print(f"entries outside row/column {args.j} all zero: "
          f"{np.all(outside == 0.0)}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "predict": _cmd_predict,
    "expand": _cmd_expand,
    "compare": _cmd_compare,
    "diagnose": _cmd_diagnose,
    "swap-check": _cmd_swap_check,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KernelSpectraError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
