"""Command-line pipeline: gen, reduce, profile, attack, rlwe-attack,
estimate, estimate-rlwe.

Every subcommand is replayable: the parsed flags (including the seed) are
serialized into the output directory. Exit codes: 0 success, 2 usage error,
3 runtime failure, 4 attack exhausted without recovery.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import profile as profiling
from . import reduction, rlwe, stattest
from .attack import SearchConfig, run_attack
from .instance import (LweParams, gen_lwe, gen_rlwe, gen_secret, load_instance,
                       save_instance)
from .modmath import Rng
from .stattest import TestConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_EXHAUSTED = 4


def _parse_prob(text: str) -> float:
    """Probability given as a float or as 2^-k."""
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^")
        return float(base) ** float(exp)
    return float(text)


def _default_jobs() -> int:
    return int(os.environ.get("SPARSELWE_JOBS", "1"))


def _save_run_config(outdir: Path, args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "run_config.json").write_text(json.dumps(cfg, indent=2, default=str))


def _q_from_args(args) -> int:
    if args.q is not None:
        return args.q
    if args.logq is not None:
        return 2 ** args.logq
    raise SystemExit("one of --q / --logq is required")


# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    q = _q_from_args(args)
    params = LweParams(n=args.n, q=q, h=args.h, sigma_e=args.sigma_e,
                       m_total=args.m_total, omega=args.omega)
    rng = Rng(args.seed)
    secret = gen_secret(args.n, args.h, rng)
    inst = gen_rlwe(params, secret, rng) if args.rlwe else gen_lwe(params, secret, rng)
    inst.seed = args.seed
    outdir = Path(args.out)
    save_instance(inst, outdir, with_truth=args.with_truth)
    _save_run_config(outdir, args)
    print(json.dumps({"out": str(outdir), "n": args.n, "q": q, "h": args.h,
                      "rlwe": bool(args.rlwe)}))
    return EXIT_OK


def cmd_reduce(args) -> int:
    inst = load_instance(args.instance)
    config = reduction.ReductionConfig(
        omega=args.omega, tau=args.tau,
        external_reducer=args.external_reducer.split() if args.external_reducer else None,
        block_sizes=(args.beta1, args.beta2) if args.beta1 and args.beta2 else None,
    )
    datasets = reduction.dataset_factory(inst, config, args.count,
                                         parallelism=args.jobs, seed=args.seed,
                                         m=args.m)
    outdir = Path(args.out)
    index = []
    for i, ds in enumerate(datasets):
        sub = outdir / f"dataset_{i:03d}"
        ds.save(sub)
        index.append({"dir": sub.name, "rho": ds.rho, "rows": int(ds.A_red.shape[0])})
    (outdir / "index.json").write_text(json.dumps(index, indent=2))
    _save_run_config(outdir, args)
    print(json.dumps({"out": str(outdir), "count": len(datasets),
                      "rho": [d.rho for d in datasets]}))
    return EXIT_OK


def _load_datasets(directory) -> list[reduction.ReducedDataset]:
    directory = Path(directory)
    if (directory / "dataset.json").exists():
        return [reduction.ReducedDataset.load(directory)]
    index_file = directory / "index.json"
    if not index_file.exists():
        raise FileNotFoundError(f"{directory}: neither dataset.json nor index.json found")
    index = json.loads(index_file.read_text())
    return [reduction.ReducedDataset.load(directory / entry["dir"]) for entry in index]


def cmd_profile(args) -> int:
    datasets = _load_datasets(args.dataset)
    A, _ = reduction.pool_datasets(datasets)
    q = datasets[0].params.q
    mean_rho = float(np.mean([d.rho for d in datasets]))
    prof = profiling.profile_columns(A, q, rho=mean_rho)
    nu_rho = profiling.check_nu_rho(prof, mean_rho, datasets[0].params.n)
    out = Path(args.out) if args.out else Path(args.dataset) / "profile.json"
    profiling.write_report(prof, nu_rho, out)
    if args.csv:
        profiling.write_stdev_csv(prof, args.csv)
    print(json.dumps({"n_u": prof.n_u, "n_r": prof.n_r,
                      "sigma_r_measured": prof.sigma_r_measured,
                      "sigma_r_predicted": prof.sigma_r_predicted,
                      "rho_sq_n": nu_rho["rho_sq_n"], "report": str(out)}))
    return EXIT_OK


def _search_config(args, n_u_hint: int) -> SearchConfig:
    return SearchConfig(
        max_weight=args.max_weight if args.max_weight is not None else n_u_hint,
        top_k=args.top_k,
        eval_interval=args.eval_interval,
        M_bruteforce=args.samples,
        M_greedy=args.greedy_samples,
        jobs=args.jobs,
    )


def cmd_attack(args) -> int:
    datasets = _load_datasets(args.dataset)
    inst = load_instance(args.instance)
    test = TestConfig(alpha=_parse_prob(args.alpha), beta=_parse_prob(args.beta))
    cfg = _search_config(args, datasets[0].params.n)
    report = run_attack(datasets, inst, cfg, test)
    payload = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(payload)
    print(payload)
    return EXIT_OK if report.recovered is not None else EXIT_EXHAUSTED


def cmd_rlwe_attack(args) -> int:
    datasets = _load_datasets(args.dataset)
    inst = load_instance(args.instance)
    test = TestConfig(alpha=_parse_prob(args.alpha), beta=_parse_prob(args.beta))
    cfg = _search_config(args, datasets[0].params.n)
    report = rlwe.run_rlwe_attack(datasets, inst, cfg, stride=args.stride,
                                  test_config=test)
    payload = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(payload)
    print(payload)
    return EXIT_OK if report.recovered is not None else EXIT_EXHAUSTED


def cmd_estimate(args) -> int:
    q = _q_from_args(args)
    alpha = _parse_prob(args.alpha)
    beta = _parse_prob(args.beta)
    cases = {}
    for worst in (True, False):
        if args.worst and not worst:
            continue
        if args.average and worst:
            continue
        M = stattest.estimate_min_samples(
            args.n, q, args.nu, args.h, args.sigma_e_ratio, alpha, beta,
            rho=args.rho, sigma_r_over_u=args.sigma_r, worst_case=worst)
        cases["worst_case_M" if worst else "average_case_M"] = M
    out = {"n": args.n, "q": q, "n_u": args.nu, "h": args.h, **cases}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_estimate_rlwe(args) -> int:
    model = rlwe.RlweCostModel(c=args.cost_constant, M=args.samples_per_check)
    rows = []
    for point in args.point:
        n_txt, nu_txt = point.split(":")
        n, nu = int(n_txt), int(nu_txt)
        h = args.h if args.h is not None else max(1, round(args.sparsity * n))
        t_lwe, t_rlwe, ratio = rlwe.estimate_costs(model, n, nu, h,
                                                   num_secrets=args.num_secrets,
                                                   seed=args.seed)
        rows.append((n, nu, h, t_lwe, t_rlwe, ratio))
    lines = ["n,n_u,h,t_lwe,t_rlwe,ratio"]
    lines += [f"{n},{nu},{h},{tl:.6g},{tr:.6g},{r:.6g}" for n, nu, h, tl, tr, r in rows]
    csv = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(csv)
    sys.stdout.write(csv)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparselwe",
        description="Attack sparse binary LWE/RLWE secrets via lattice "
                    "reduction and variance distinguishing.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_problem(p):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--q", type=int, default=None)
        p.add_argument("--logq", type=int, default=None)

    p = sub.add_parser("gen", help="generate an LWE/RLWE instance")
    add_common_problem(p)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--sigma-e", type=float, default=3.0)
    p.add_argument("--m-total", type=int, default=None)
    p.add_argument("--omega", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rlwe", action="store_true")
    p.add_argument("--with-truth", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("reduce", help="produce reduced datasets from an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--omega", type=int, default=10)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--external-reducer", default=None,
                   help="command invoked as 'CMD [--beta1 B1 --beta2 B2] IN OUT'")
    p.add_argument("--beta1", type=int, default=None)
    p.add_argument("--beta2", type=int, default=None)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("profile", help="column-variance profile of reduced data")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_profile)

    def add_attack_flags(p):
        p.add_argument("--dataset", required=True)
        p.add_argument("--instance", required=True)
        p.add_argument("--max-weight", type=int, default=None)
        p.add_argument("--top-k", type=int, default=64)
        p.add_argument("--eval-interval", type=int, default=100_000)
        p.add_argument("--jobs", type=int, default=_default_jobs())
        p.add_argument("--alpha", default="1e-6")
        p.add_argument("--beta", default="1e-3")
        p.add_argument("--samples", type=int, default=None,
                       help="residual samples per candidate score")
        p.add_argument("--greedy-samples", type=int, default=None)
        p.add_argument("--out", default=None)

    p = sub.add_parser("attack", help="recover a sparse binary secret")
    add_attack_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("rlwe-attack", help="multi-window attack on 2-power cyclotomic RLWE")
    add_attack_flags(p)
    p.add_argument("--stride", type=int, default=1)
    p.set_defaults(func=cmd_rlwe_attack)

    p = sub.add_parser("estimate", help="minimum sample count M(alpha, beta)")
    add_common_problem(p)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--alpha", default="2^-128")
    p.add_argument("--beta", default="1e-5")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--sigma-r", type=float, default=None,
                   help="cool-column stdev as a fraction of q/sqrt(12)")
    p.add_argument("--sigma-e-ratio", type=float, required=True)
    p.add_argument("--worst", action="store_true")
    p.add_argument("--average", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("estimate-rlwe", help="LWE vs RLWE guess-cost ratio table")
    p.add_argument("--point", action="append", required=True,
                   metavar="N:NU", help="dimension and cruel count, repeatable")
    p.add_argument("--h", type=int, default=None)
    p.add_argument("--sparsity", type=float, default=0.10)
    p.add_argument("--num-secrets", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cost-constant", type=float, default=1.0)
    p.add_argument("--samples-per-check", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate_rlwe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
