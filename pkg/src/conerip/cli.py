"""Command-line interface.

Subcommands: norm-eval, delta, bounds-figure, recover, phase-transition,
stability-check, rip-estimate, budget, permutation-demo,
ksupport-counterexample, lowrank-counterexample, ball-sample.

Exit codes: 0 on success, 2 on assertion failure in check modes, 1 on
usage errors.  All tabular output is CSV with one leading comment line
carrying the full configuration; given identical flags the bytes are
identical across runs.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from . import configio, experiments, measure, norms, ripcalc, solve
from .models import GroupSparse
from .oracles import decomposition_oracle


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(args, meta, header, rows):
    text = experiments.write_csv(getattr(args, "out", None), meta, header, rows)
    if getattr(args, "out", None) is None:
        sys.stdout.write(text)


def _load_pair(args, need_model=True, need_reg=True):
    model = reg = None
    combined = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            combined = yaml.safe_load(fh) or {}
    if need_model:
        if getattr(args, "model_config", None):
            model = configio.load_model(args.model_config)
        elif "model" in combined:
            model = configio.model_from_dict(combined)
        else:
            raise SystemExit(_usage_error("a model config is required"))
    if need_reg:
        if getattr(args, "reg_config", None):
            reg = configio.load_regularizer(args.reg_config)
        elif "regularizer" in combined:
            reg = configio.regularizer_from_dict(combined)
        else:
            raise SystemExit(_usage_error("a regularizer config is required"))
    return model, reg


def _usage_error(message):
    sys.stderr.write(f"conerip: error: {message}\n")
    return 1


def _solve_config(args):
    kwargs = {}
    if getattr(args, "max_iterations", None):
        kwargs["max_iterations"] = args.max_iterations
    if getattr(args, "tolerance", None):
        kwargs["tolerance"] = args.tolerance
    return solve.SolveConfig(**kwargs) if kwargs else None


def _parse_vector(text):
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _parse_grid(text):
    return [int(v) for v in text.split(",")]


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_norm_eval(args):
    _, reg = _load_pair(args, need_model=False)
    x = _parse_vector(args.x)
    value = norms.eval(reg, x)
    rows = [("value", value)]
    try:
        rows.append(("dual_value", norms.dual_eval(reg, x)))
    except norms.UnsupportedRegularizerError:
        rows.append(("dual_value", "undefined"))
    meta = {"command": "norm-eval", "x": args.x,
            "regularizer": configio.regularizer_to_dict(reg)}
    header = ["quantity", "value"]
    out_rows = list(rows)
    if args.oracle:
        model, _ = _load_pair(args, need_reg=False)
        dec = decomposition_oracle(model, x)
        out_rows.append(("oracle_objective", dec.objective))
        for i, (w, atom) in enumerate(zip(dec.weights, dec.atoms)):
            out_rows.append((f"atom_{i}", " ".join(format(a, ".9g") for a in atom)))
            out_rows.append((f"weight_{i}", float(w)))
    _emit(args, meta, header, out_rows)
    return 0


def _cmd_delta(args):
    model, reg = _load_pair(args)
    if args.empirical:
        samples = list(
            ripcalc.empirical_delta_samples(
                model, reg, args.empirical, args.strategy, args.seed
            )
        )
        meta = {"command": "delta", "mode": "empirical", "strategy": args.strategy,
                "n_samples": args.empirical, "seed": args.seed,
                "min_delta": min(s[2] for s in samples),
                "model": configio.model_to_dict(model),
                "regularizer": configio.regularizer_to_dict(reg)}
        rows = [(i, r, a, d) for i, (r, a, d) in enumerate(samples)]
        _emit(args, meta, ["sample", "rho", "alpha", "delta"], rows)
        return 0
    bound = ripcalc.analytic_delta_bound(model, reg)
    meta = {"command": "delta", "mode": "analytic",
            "model": configio.model_to_dict(model),
            "regularizer": configio.regularizer_to_dict(reg)}
    rows = [(bound.kind, bound.value, bound.model, bound.regularizer, bound.note)]
    _emit(args, meta, ["kind", "value", "model", "regularizer", "note"], rows)
    return 0


def _cmd_bounds_figure(args):
    j_values = range(1, args.j_max + 1)
    kappa_values = range(1, args.kappa_max + 1)
    meta, header, rows = experiments.bounds_figure(list(j_values), list(kappa_values))
    _emit(args, meta, header, rows)
    return 0


def _cmd_recover(args):
    model, reg = _load_pair(args)
    if args.noise > args.epsilon:
        sys.stderr.write(
            "warning: noise level exceeds epsilon; the stability bound does not"
            " apply to this regime\n"
        )
    meta, header, rows = experiments.recovery_trials(
        model, reg, args.m, args.trials, args.seed, eta=args.noise,
        epsilon=args.epsilon, distribution=args.dist, config=_solve_config(args),
    )
    _emit(args, meta, header, rows)
    return 0


def _cmd_phase_transition(args):
    model, reg = _load_pair(args)
    meta, header, rows = experiments.phase_transition(
        model, reg, _parse_grid(args.m_grid), args.trials, args.seed,
        eta=args.noise, epsilon=args.epsilon, distribution=args.dist,
        config=_solve_config(args),
    )
    _emit(args, meta, header, rows)
    return 0


def _cmd_stability_check(args):
    model, reg = _load_pair(args)
    meta, header, rows = experiments.stability_check(
        model, reg, _parse_grid(args.m_grid), args.trials, args.noise,
        args.epsilon, args.seed, distribution=args.dist,
        config=_solve_config(args),
    )
    _emit(args, meta, header, rows)
    if meta.get("status") == "ok":
        bad = [r for r in rows if r[3] < 0 or not r[4]]
        if bad:
            sys.stderr.write(f"stability bound violated in {len(bad)} trials\n")
            return 2
    return 0


def _cmd_rip_estimate(args):
    model, _ = _load_pair(args, need_reg=False)
    op = measure.generate(args.m, model.ambient_dim, args.dist, args.seed)
    if args.exact:
        if not isinstance(model, GroupSparse):
            raise SystemExit(_usage_error("--exact needs a group-sparse model"))
        s = args.order or min(2 * model.k, model.structure.num_groups)
        est = measure.exact_rip_group(op, model.structure, s)
        witness = " ".join(str(g) for g in est.witness)
    else:
        est = measure.sampled_rip(op, model, args.samples, args.seed)
        witness = " ".join(format(v, ".9g") for v in est.witness.difference)
    meta = {"command": "rip-estimate", "m": args.m, "dist": args.dist,
            "seed": args.seed, "method": est.method,
            "model": configio.model_to_dict(model)}
    rows = [(est.delta, est.method, est.n_evaluated, witness)]
    _emit(args, meta, ["delta", "method", "n_evaluated", "witness"], rows)
    return 0


def _cmd_budget(args):
    if args.group:
        k, r_max, n_groups = (int(v) for v in args.group.split(","))
        value = measure.group_budget(k, r_max, n_groups, args.delta, args.constant)
        rows = [("group", k, r_max, n_groups, args.delta, args.constant, value)]
        header = ["kind", "k", "r_max", "n_groups", "delta", "constant", "m"]
    elif args.pointcloud:
        value = measure.pointcloud_budget(args.pointcloud, args.delta, args.constant)
        rows = [("pointcloud", args.pointcloud, args.delta, args.constant, value)]
        header = ["kind", "r_points", "delta", "constant", "m"]
    else:
        model, _ = _load_pair(args, need_reg=False)
        value = measure.block_budget(model.structure, args.delta, args.constant)
        rows = [("block", model.structure.num_blocks, args.delta, args.constant, value)]
        header = ["kind", "num_blocks", "delta", "constant", "m"]
    meta = {"command": "budget", "delta": args.delta, "constant": args.constant}
    _emit(args, meta, header, rows)
    return 0


def _cmd_permutation_demo(args):
    if args.calibrate:
        meta, header, rows = experiments.calibrate_permutation_budget(
            args.n, seed=args.seed, c0=args.c_budget, config=_solve_config(args)
        )
    else:
        meta, header, rows = experiments.permutation_demo(
            args.n, args.c_budget, trials=args.trials, seed=args.seed,
            config=_solve_config(args),
        )
    _emit(args, meta, header, rows)
    if args.check and not all(bool(r[3]) for r in rows):
        sys.stderr.write("some permutations were not recovered\n")
        return 2
    return 0


def _cmd_ksupport_counterexample(args):
    all_rows = []
    meta = None
    header = None
    failures = 0
    for t in range(args.trials):
        try:
            meta, header, rows, _ = experiments.ksupport_counterexample(
                args.k, args.n, args.seed + t, m=args.m, config=_solve_config(args)
            )
        except experiments.WitnessSearchError:
            failures += 1
            continue
        all_rows.extend(rows)
        failures += sum(0 if bool(r[-1]) else 1 for r in rows)
    meta = meta or {"command": "ksupport-counterexample"}
    meta.update({"trials": args.trials, "first_seed": args.seed,
                 "failures": failures})
    _emit(args, meta, header or [], all_rows)
    if failures:
        sys.stderr.write(f"{failures} witnesses failed verification\n")
        return 2
    return 0


def _cmd_lowrank_counterexample(args):
    meta, header, rows = experiments.lowrank_counterexample(
        args.r, args.rows, args.cols, args.seed, m=args.m
    )
    _emit(args, meta, header, rows)
    if not all(bool(r[-1]) for r in rows):
        sys.stderr.write("matrix witness failed the descent check\n")
        return 2
    return 0


def _cmd_ball_sample(args):
    meta, header, rows = experiments.ball_sample(args.k, resolution=args.resolution)
    _emit(args, meta, header, rows)
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def _add_common(sp, model=False, reg=False, solver=False):
    sp.add_argument("--config", help="YAML with model and/or regularizer sections")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write CSV here instead of stdout")
    if model:
        sp.add_argument("--model-config", help="YAML model file")
    if reg:
        sp.add_argument("--reg-config", help="YAML regularizer file")
    if solver:
        sp.add_argument("--max-iterations", type=int, default=None)
        sp.add_argument("--tolerance", type=float, default=None)


def build_parser():
    parser = _Parser(prog="conerip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("norm-eval", help="evaluate a regularizer and its dual")
    _add_common(sp, model=True, reg=True)
    sp.add_argument("--x", required=True, help="comma-separated vector")
    sp.add_argument("--oracle", action="store_true",
                    help="also print the brute-force decomposition")
    sp.set_defaults(func=_cmd_norm_eval)

    sp = sub.add_parser("delta", help="analytic or sampled admissible constants")
    _add_common(sp, model=True, reg=True)
    sp.add_argument("--empirical", type=int, default=0, metavar="N",
                    help="sample N descent vectors instead of the analytic bound")
    sp.add_argument("--strategy", default="optimal_group",
                    choices=["optimal_group", "optimal_rank", "search"])
    sp.set_defaults(func=_cmd_delta)

    sp = sub.add_parser("bounds-figure", help="admissible-constant comparison table")
    _add_common(sp)
    sp.add_argument("--j-max", type=int, default=10)
    sp.add_argument("--kappa-max", type=int, default=20)
    sp.set_defaults(func=_cmd_bounds_figure)

    sp = sub.add_parser("recover", help="noisy recovery trials with error bounds")
    _add_common(sp, model=True, reg=True, solver=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--noise", type=float, default=0.0, help="noise level eta")
    sp.add_argument("--epsilon", type=float, default=0.0)
    sp.add_argument("--dist", default="gaussian",
                    choices=["gaussian", "rademacher", "orthonormal"])
    sp.set_defaults(func=_cmd_recover)

    sp = sub.add_parser("phase-transition", help="success rate over an m grid")
    _add_common(sp, model=True, reg=True, solver=True)
    sp.add_argument("--m-grid", required=True, help="comma-separated m values")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--epsilon", type=float, default=0.0)
    sp.add_argument("--dist", default="gaussian",
                    choices=["gaussian", "rademacher", "orthonormal"])
    sp.set_defaults(func=_cmd_phase_transition)

    sp = sub.add_parser("stability-check", help="verify the stability bound")
    _add_common(sp, model=True, reg=True, solver=True)
    sp.add_argument("--m-grid", required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--noise", type=float, default=0.01)
    sp.add_argument("--epsilon", type=float, default=0.01)
    sp.add_argument("--dist", default="orthonormal",
                    choices=["gaussian", "rademacher", "orthonormal"])
    sp.set_defaults(func=_cmd_stability_check)

    sp = sub.add_parser("rip-estimate", help="exact or sampled RIP constants")
    _add_common(sp, model=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--dist", default="gaussian",
                    choices=["gaussian", "rademacher", "orthonormal"])
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--exact", action="store_true")
    group.add_argument("--samples", type=int)
    sp.add_argument("--order", type=int, default=None,
                    help="group-support order for --exact (default 2k)")
    sp.set_defaults(func=_cmd_rip_estimate)

    sp = sub.add_parser("budget", help="measurement budget formulas")
    _add_common(sp, model=True)
    sp.add_argument("--group", help="K,R_MAX,N_GROUPS")
    sp.add_argument("--pointcloud", type=int, help="number of points")
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--constant", type=float, default=1.0)
    sp.set_defaults(func=_cmd_budget)

    sp = sub.add_parser("permutation-demo", help="uniform permutation recovery")
    _add_common(sp, solver=True)
    sp.add_argument("--n", type=int, default=4)
    sp.add_argument("--c-budget", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=1)
    sp.add_argument("--calibrate", action="store_true",
                    help="doubling search on the budget constant")
    sp.add_argument("--check", action="store_true",
                    help="exit 2 unless every permutation is recovered")
    sp.set_defaults(func=_cmd_permutation_demo)

    sp = sub.add_parser("ksupport-counterexample",
                        help="uniform-recovery failure witness for k >= 2")
    _add_common(sp, solver=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--n", type=int, default=4)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--trials", type=int, default=1)
    sp.set_defaults(func=_cmd_ksupport_counterexample)

    sp = sub.add_parser("lowrank-counterexample",
                        help="heuristic matrix analogue (descent check only)")
    _add_common(sp)
    sp.add_argument("--r", type=int, default=2)
    sp.add_argument("--rows", type=int, default=4)
    sp.add_argument("--cols", type=int, default=4)
    sp.add_argument("--m", type=int, default=None)
    sp.set_defaults(func=_cmd_lowrank_counterexample)

    sp = sub.add_parser("ball-sample", help="unit-ball radii of the k-sparse gauge")
    _add_common(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--resolution", type=int, default=33)
    sp.set_defaults(func=_cmd_ball_sample)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError, yaml.YAMLError) as exc:
        sys.stderr.write(f"conerip: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
