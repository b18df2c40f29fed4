"""Command-line entry point.

Subcommands: gen, simulate, oracle, certify, sweep, congestion.
Exit codes: 0 success, 1 usage error, 2 failed certification under --strict.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional, Sequence

from .certify import certify, report_to_dict
from .errors import EVChargeError
from .harness import (
    SweepConfig,
    TrialConfig,
    congestion_study,
    load_trace,
    parameter_sweep,
    run_trials,
    save_trace,
    write_cdf_csv,
    write_sweep_csv,
    write_trial_csv,
)
from .model import (
    Bounds,
    GeneratorConfig,
    generate_synthetic,
    generate_worst_case,
    load_instance,
    save_instance,
)
from .online import POLICIES, run_opa
from .oracle import default_epsilon, offline_opt
from .pricing import make_params

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CERT_FAILED = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _bounds_arg(text: str) -> Bounds:
    parts = text.split(",")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError("bounds need L,U,Dmin,Dmax,pmax")
    return Bounds(L=float(parts[0]), U=float(parts[1]), Dmin=int(parts[2]),
                  Dmax=int(parts[3]), pmax=float(parts[4]))


def _policies_arg(text: str) -> List[str]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    for name in names:
        if name not in POLICIES:
            raise argparse.ArgumentTypeError(f"unknown policy {name!r}")
    return names


def _grid_arg(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=12, help="number of requests")
    p.add_argument("--horizon", type=int, default=8)
    p.add_argument("--capacity", type=float, default=4.0)
    p.add_argument("--bounds", type=_bounds_arg, default="1,4,1,3,0.5",
                   help="L,U,Dmin,Dmax,pmax")
    p.add_argument("--rate", type=float, default=0.2)
    p.add_argument("--quantum", type=float, default=0.05,
                   help="energy lattice (keeps the exact oracle exact)")


def _gen_config(args) -> GeneratorConfig:
    bounds = args.bounds if isinstance(args.bounds, Bounds) else _bounds_arg(args.bounds)
    return GeneratorConfig(
        n_requests=args.n, horizon=args.horizon, capacity=args.capacity,
        bounds=bounds, rate=args.rate, quantum=args.quantum,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evcharge",
                     description="online posted-pricing EV-charging engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="write an instance file")
    p_gen.add_argument("--kind", choices=("synthetic", "worst-case"),
                       default="synthetic")
    _add_gen_flags(p_gen)
    p_gen.add_argument("--t-prime", type=int, default=2,
                       help="overlap slot for the worst-case fixture")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="run policies, write TrialResult CSV")
    p_sim.add_argument("--instance", required=True)
    p_sim.add_argument("--policies", type=_policies_arg,
                       default=["opa", "uboa", "pboa", "ommp"])
    p_sim.add_argument("--trials", type=int, default=1)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--epsilon", type=float, default=None)
    p_sim.add_argument("--oracle", choices=("exact", "skip"), default="exact")
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--trace", default=None,
                       help="also save the posted-pricing trace to this file")

    p_or = sub.add_parser("oracle", help="exact offline optimum")
    p_or.add_argument("--instance", required=True)
    p_or.add_argument("--epsilon", type=float, default=None)

    p_cert = sub.add_parser("certify", help="check a saved trace")
    p_cert.add_argument("--trace", required=True)
    p_cert.add_argument("--strict", action="store_true")
    p_cert.add_argument("--out", default=None, help="write the JSON report here")

    p_sweep = sub.add_parser("sweep", help="parameter sweep, write sweep CSV")
    p_sweep.add_argument("--axis", choices=("capacity", "rho", "delta", "pmax"),
                         required=True)
    p_sweep.add_argument("--grid", type=_grid_arg, required=True)
    _add_gen_flags(p_sweep)
    p_sweep.add_argument("--policies", type=_policies_arg,
                         default=["opa", "uboa", "pboa", "ommp"])
    p_sweep.add_argument("--trials", type=int, default=5)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--out", required=True)

    p_con = sub.add_parser("congestion", help="congestion study, write CDF CSV")
    p_con.add_argument("--instance", required=True)
    p_con.add_argument("--levels", type=_grid_arg, default=[0.6, 0.3, 0.15])
    p_con.add_argument("--policies", type=_policies_arg,
                       default=["opa", "uboa", "pboa", "ommp"])
    p_con.add_argument("--trials", type=int, default=5)
    p_con.add_argument("--seed", type=int, default=0)
    p_con.add_argument("--quantum", type=float, default=0.05)
    p_con.add_argument("--out", required=True)
    return parser


def _cmd_gen(args) -> int:
    if args.kind == "synthetic":
        instance = generate_synthetic(_gen_config(args), args.seed)
    else:
        bounds = args.bounds if isinstance(args.bounds, Bounds) else _bounds_arg(args.bounds)
        instance = generate_worst_case(args.capacity, bounds.Dmin, args.rate,
                                       bounds, args.t_prime)
    save_instance(instance, args.out)
    print(f"wrote {len(instance.requests)} requests to {args.out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    instance = load_instance(args.instance)
    cfg = TrialConfig(
        instance=instance,
        policies=tuple(args.policies),
        trials=args.trials,
        oracle_mode=args.oracle,
        master_seed=args.seed,
        epsilon=args.epsilon,
        certify_opa="opa" in args.policies,
    )
    write_trial_csv(args.out, run_trials(cfg))
    print(f"wrote {args.out}")
    if args.trace:
        params = make_params(instance.bounds, instance.config)
        outcome = run_opa(instance, params, trace=True)
        save_trace(args.trace, instance, outcome)
        print(f"wrote {args.trace}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    instance = load_instance(args.instance)
    eps = args.epsilon if args.epsilon else default_epsilon(instance)
    welfare, admissions, _ = offline_opt(instance, eps)
    print(json.dumps({
        "welfare": welfare,
        "admitted": [r.id for r, x in zip(instance.requests, admissions) if x],
        "epsilon": eps,
    }))
    return EXIT_OK


def _cmd_certify(args) -> int:
    instance, policy, events = load_trace(args.trace)
    params = make_params(instance.bounds, instance.config)
    report = certify(events, params, instance)
    doc = report_to_dict(report)
    doc["policy"] = policy
    text = json.dumps(doc, indent=1)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    if args.strict and not report.ok:
        return EXIT_CERT_FAILED
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = SweepConfig(
        axis=args.axis,
        grid=tuple(args.grid),
        base=_gen_config(args),
        instance_seed=args.seed,
        trials=args.trials,
        policies=tuple(args.policies),
        master_seed=args.seed,
    )
    write_sweep_csv(args.out, parameter_sweep(cfg))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_congestion(args) -> int:
    instance = load_instance(args.instance)
    cfg = TrialConfig(
        instance=instance,
        policies=tuple(args.policies),
        trials=args.trials,
        master_seed=args.seed,
    )
    rows = congestion_study(instance, args.levels, cfg, quantum=args.quantum)
    write_cdf_csv(args.out, rows)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
    "certify": _cmd_certify,
    "sweep": _cmd_sweep,
    "congestion": _cmd_congestion,
}


def cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except EVChargeError as exc:
        print(f"evcharge: error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"evcharge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    raise SystemExit(cli())


if __name__ == "__main__":
    main()
