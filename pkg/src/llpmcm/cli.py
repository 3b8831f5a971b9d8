"""Command-line entry point.

Every subcommand accepts ``--config FILE`` holding ``key = value`` lines
(keys are long option names, dashes or underscores); explicit flags override
the file. Commands that write to ``--out`` also write the resolved
``config.txt`` there, which can be replayed with ``--config``.

Exit codes: 0 success, 1 computation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import warnings
from functools import partial
from pathlib import Path

import numpy as np

from . import bags as bagmod
from . import bounds, data, evaluation, pairing
from .exceptions import ConfigError, LLPError
from .model import DecisionFunction
from .train import TrainConfig, consistency_sweep, gaussian_1d_problem, rate_lambda_rule, train_llp

log = logging.getLogger("llpmcm")

SKIP_KEYS = {"command", "config", "func", "log_level"}


def derive_seed(seed: int, stage: str) -> int:
    """Stable per-stage seed: first 4 bytes of sha256("seed/stage")."""
    digest = hashlib.sha256(f"{seed}/{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def ints(text: str) -> list[int]:
    vals = floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")
    return [int(v) for v in vals]


def read_config(path) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _fmt(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(args, out: Path) -> None:
    lines = [f"# resolved configuration for: llpmcm {args.command}"]
    for key, value in sorted(vars(args).items()):
        if key in SKIP_KEYS or value is None:
            continue
        lines.append(f"{key} = {_fmt(value)}")
    (out / "config.txt").write_text("\n".join(lines) + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, default=lambda o: o.tolist() if isinstance(o, np.ndarray) else str(o))


def _outdir(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_config(args, out)
    return out


# -- subcommands -------------------------------------------------------------------

def cmd_simulate(args) -> int:
    lp = bagmod.LPDistribution.parse(args.lp)
    out = _outdir(args)
    if args.csv:
        if not args.schema:
            raise ConfigError("--csv requires --schema")
        ds = data.load_csv(args.csv, data.Schema.load(args.schema))
        asm = data.assemble_bags(ds, args.bag_size, lp, total=args.total, n_bags=args.n_bags,
                                 seed=derive_seed(args.seed, "assemble"))
        bags, X_test, y_test = asm.bags, asm.test.X, asm.test.y
    else:
        n_bags = args.n_bags if args.n_bags is not None else args.total // args.bag_size
        if args.n_bags is None and args.total % args.bag_size:
            raise ConfigError("total must be a multiple of bag-size")
        cc = bagmod.gaussian_pair(args.dim, args.separation, args.scale)
        lps = bagmod.sample_lps(lp, n_bags, derive_seed(args.seed, "lps"))
        bags = bagmod.simulate_bags(lps, args.bag_size, cc, derive_seed(args.seed, "bags"),
                                    model=args.model, rho=args.rho)
        y_test = np.repeat([1, -1], args.test_size // 2)
        X_test = cc.sample(y_test, np.random.default_rng(derive_seed(args.seed, "test")))
    bagmod.save_bags(bags, out)
    data.save_test_set(out / "test.csv", X_test, y_test)
    print(_dump({"bags": len(bags), "instances": sum(b.size for b in bags),
                 "test_size": int(len(y_test)), "manifest": str(out / bagmod.MANIFEST)}))
    return 0


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        lambdas=tuple(args.lambdas), folds=args.folds, gtol=args.gtol, max_iter=args.max_iter,
        history=args.history, seed=derive_seed(args.seed, "cv"), weight_model=args.weight_model,
        pairing=args.pairing, merge=None if args.merge in (None, "none") else args.merge,
        K=args.K, bandwidth=args.bandwidth, fallback_lambda=args.fallback_lambda,
    )


def cmd_train(args) -> int:
    bags = bagmod.load_bags(args.manifest)
    cfg = _train_config(args)
    out = _outdir(args)
    res = train_llp(bags, cfg)
    res.model.save(out / "model.json")
    report = res.report()
    (out / "report.json").write_text(_dump(report))
    print(_dump({k: report[k] for k in ("lambda", "lambda_source", "bandwidth", "n_pairs", "optimizer")}))
    return 0


def cmd_evaluate(args) -> int:
    from .plotting import plot_roc

    if not Path(args.model).exists():
        raise ConfigError(f"model file not found: {args.model}")
    model = DecisionFunction.load(args.model)
    X, y = data.load_test_set(args.test)
    scores = model(X)
    auc = evaluation.roc_auc(scores, y)
    metrics = {"auc": auc, "ber": evaluation.ber(scores, y),
               "n_pos": int(np.sum(y == 1)), "n_neg": int(np.sum(y == -1))}
    out = _outdir(args)
    if out is not None:
        thr, fpr, tpr = evaluation.roc_curve(scores, y)
        np.savetxt(out / "roc.csv", np.column_stack([thr, fpr, tpr]), delimiter=",",
                   header="threshold,fpr,tpr", comments="", fmt="%.17g")
        plot_roc(fpr, tpr, auc, out / "roc.png")
        (out / "metrics.json").write_text(_dump(metrics))
    print(_dump(metrics))
    return 0


def _bags_from_args(args) -> list[bagmod.Bag]:
    if args.manifest:
        return bagmod.load_bags(args.manifest)
    if not args.lps:
        raise ConfigError("give --manifest or --lps")
    sizes = args.sizes or [1] * len(args.lps)
    if len(sizes) != len(args.lps):
        raise ConfigError("--sizes must match --lps in length")
    # placeholder instances: only LPs and sizes matter for pairing
    return [bagmod.Bag(np.zeros((int(n), 1)), lp) for lp, n in zip(args.lps, sizes)]


def cmd_pair(args) -> int:
    bags = _bags_from_args(args)
    fn = pairing.pair_sorted if args.method == "sorted" else pairing.pair_optimal
    pairs = fn(bags, args.weight_model)
    weights = pairing.optimal_weights(pairs, args.weight_model)
    report = pairing.pairing_report(pairs, weights, args.weight_model)
    out = _outdir(args)
    if out is not None:
        (out / "pairs.json").write_text(_dump(report))
    print(_dump(report))
    return 0


def cmd_merge(args) -> int:
    bags = _bags_from_args(args)
    merged = pairing.MERGERS[args.scheme](bags, args.K)
    other = pairing.MERGERS["bp" if args.scheme == "bm" else "bm"](bags, args.K)
    gaps = np.array([m.gap for m in merged])
    weights = np.where(gaps >= pairing.GAP_FLOOR, gaps ** 2, 0.0)
    weights = weights / weights.sum() if weights.sum() > 0 else weights
    report = pairing.pairing_report(merged, weights, "bag")
    report.update(scheme=args.scheme, K=args.K,
                  dominates_other=pairing.check_dominates(merged, other))
    out = _outdir(args)
    if out is not None:
        (out / "merge.json").write_text(_dump(report))
    print(_dump(report))
    return 0


def _sr(args) -> bounds.SRConstants:
    if args.rkhs_radius is not None:
        return bounds.sr_constants_rkhs(args.rkhs_radius, args.kernel_bound)
    return bounds.SRConstants(args.A, args.B)


def cmd_bound(args) -> int:
    sr = _sr(args)
    if args.kind == "pairs":
        if not (args.kappa_plus and args.kappa_minus and args.nbar):
            raise ConfigError("the pairs bound needs --kappa-plus, --kappa-minus and --nbar")
        if args.weights in (None, "optimal"):
            model = "IBM" if args.model == "IBM" else "IIM"
            w = bounds.bound_optimal_weights(args.kappa_plus, args.kappa_minus, args.nbar, model)
        elif args.weights == "uniform":
            w = np.full(len(args.nbar), 1.0 / len(args.nbar))
        else:
            w = floats(args.weights)
        inputs = bounds.PairBoundInputs(args.kappa_plus, args.kappa_minus, args.nbar, w,
                                        args.lipschitz, args.delta, args.model or "IIM")
        rep = bounds.geb_theorem1_report(inputs, sr).to_json()
        rep["weights"] = list(map(float, w))
    else:
        if not args.gaps or args.epsilon is None or None in (args.N, args.n):
            raise ConfigError("the merged bound needs --gaps, --epsilon, --N, --K and --n")
        inputs = bounds.MergedBoundInputs(args.gaps, args.epsilon, args.N, args.K, args.n,
                                          args.lipschitz, args.delta, args.model or "CIIM",
                                          args.Delta, args.tau, args.eps0)
        rep = bounds.geb_theorem2_report(inputs, sr).to_json()
        if None not in (args.Delta, args.tau, args.eps0):
            rep["max_epsilon"] = bounds.max_admissible_epsilon(args.Delta, args.tau, args.eps0)
    rep.update(kind=args.kind, A=sr.A, B=sr.B, lipschitz=args.lipschitz, delta=args.delta)
    out = _outdir(args)
    if out is not None:
        (out / "bound.json").write_text(_dump(rep))
    print(_dump(rep))
    return 0


def cmd_epr_demo(args) -> int:
    res = evaluation.epr_counterexample(args.p)
    report = res.to_json()
    out = _outdir(args)
    if out is not None:
        from .plotting import plot_epr_demo

        t = np.linspace(0, 1, 1001)
        np.savetxt(out / "epr_demo.csv",
                   np.column_stack([t, evaluation.counterexample_epr(t, args.p),
                                    evaluation.counterexample_ber(t)]),
                   delimiter=",", header="t,epr,ber", comments="", fmt="%.10g")
        plot_epr_demo(res, out / "epr_demo.png", args.p)
        (out / "epr_demo.json").write_text(_dump(report))
    print(_dump(report))
    return 0


def cmd_sweep(args) -> int:
    from .plotting import plot_sweep

    problem = gaussian_1d_problem(args.bag_size)
    base = TrainConfig(gtol=args.gtol, max_iter=args.max_iter, weight_model=args.weight_model)
    rows = consistency_sweep(problem, args.schedule,
                             lambda_rule=partial(rate_lambda_rule, c=args.lambda_c),
                             seed=derive_seed(args.seed, "sweep"), scheme=args.scheme, config=base)
    out = _outdir(args)
    if out is not None:
        keys = list(rows[0])
        lines = [",".join(keys)] + [",".join(_fmt(r[k]) for k in keys) for r in rows]
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
        (out / "sweep.json").write_text(_dump(rows))
        plot_sweep(rows, out / "sweep.png")
    print(_dump(rows))
    return 0


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="llpmcm", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file; flags override it")
        p.set_defaults(func=func)
        return p

    p = command("simulate", cmd_simulate, "generate bags (synthetic Gaussians or from a CSV)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bag-size", type=int, default=8)
    p.add_argument("--total", type=int, default=1024, help="training instances (fixed-T design)")
    p.add_argument("--n-bags", type=int, help="number of bags (fixed-N design)")
    p.add_argument("--lp", default="uniform:0,0.5")
    p.add_argument("--model", choices=["ciim", "cibm"], default="ciim")
    p.add_argument("--rho", type=float, default=0.0, help="within-bag label dependence for cibm")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--test-size", type=int, default=2000)
    p.add_argument("--csv", help="labeled CSV to draw bags from instead of Gaussians")
    p.add_argument("--schema", help="schema file for --csv")

    p = command("train", cmd_train, "fit the plug-in LLP model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambdas", type=floats, default=list(TrainConfig.lambdas))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--weight-model", choices=["bag", "instance"], default="bag")
    p.add_argument("--pairing", choices=["optimal", "sorted"], default="optimal")
    p.add_argument("--merge", choices=["none", "bp", "bm"], default="none")
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--fallback-lambda", type=float)
    p.add_argument("--gtol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--history", type=int, default=10)

    p = command("evaluate", cmd_evaluate, "AUC, BER and ROC curve of a model on a test CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out")

    for name, func, help_ in (("pair", cmd_pair, "pair bags by the matching objective"),
                              ("merge", cmd_merge, "merge small bags with BP or BM")):
        p = command(name, func, help_)
        p.add_argument("--manifest")
        p.add_argument("--lps", type=floats)
        p.add_argument("--sizes", type=ints)
        p.add_argument("--out")
        if name == "pair":
            p.add_argument("--method", choices=["optimal", "sorted"], default="optimal")
            p.add_argument("--weight-model", choices=["bag", "instance"], default="bag")
        else:
            p.add_argument("--scheme", choices=["bp", "bm"], default="bm")
            p.add_argument("--K", type=int, default=1)

    p = command("bound", cmd_bound, "evaluate a generalization bound")
    p.add_argument("--kind", choices=["pairs", "merged"], default="pairs",
                   help="per-pair bound or merged-bag bound")
    p.add_argument("--A", type=float, default=1.0)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--rkhs-radius", type=float, help="derive A = B = R * kernel-bound")
    p.add_argument("--kernel-bound", type=float, default=1.0)
    p.add_argument("--lipschitz", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--model", choices=["IIM", "IBM", "CIIM", "CIBM"])
    p.add_argument("--kappa-plus", type=floats)
    p.add_argument("--kappa-minus", type=floats)
    p.add_argument("--nbar", type=floats)
    p.add_argument("--weights", help="optimal, uniform, or comma-separated values")
    p.add_argument("--gaps", type=floats, help="expected merged gaps (merged bound)")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--n", type=int)
    p.add_argument("--Delta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--out")

    p = command("epr-demo", cmd_epr_demo, "threshold example where EPR minimisation fails")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--out")

    p = command("sweep", cmd_sweep, "consistency sweep on 1-D Gaussians")
    p.add_argument("--schedule", type=ints, default=[16, 64, 256])
    p.add_argument("--bag-size", type=int, default=8)
    p.add_argument("--lambda-c", type=float, default=1.0)
    p.add_argument("--scheme", choices=["bp", "bm"], default="bm")
    p.add_argument("--weight-model", choices=["bag", "instance"], default="bag")
    p.add_argument("--gtol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    return parser


def _apply_config(parser, argv):
    """Apply ``--config`` values as subparser defaults, then parse so flags override them."""
    argv = list(sys.argv[1:] if argv is None else argv)
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    path = None
    for k, a in enumerate(argv):
        if a == "--config" and k + 1 < len(argv):
            path = argv[k + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    if command is not None and path is not None:
        values = read_config(path)
        subparser = choices[command]
        known = {a.dest for a in subparser._actions}
        unknown = set(values) - known - {"command"}
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(sorted(unknown))}")
        values.pop("command", None)
        for action in subparser._actions:
            if action.dest in values:
                action.required = False
        subparser.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ConfigError as exc:
        print(f"llpmcm: error: {exc}", file=sys.stderr)
        return 2
    except (LLPError, ValueError, ArithmeticError) as exc:
        print(f"llpmcm: computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
