"""Batch front end.

Commands: solve, bridge, entry, oracle, diagnose, gen.  Machine reports are
written to ``--report`` as canonical JSON (fixed field order, 17 significant
digits); human tables on stdout are rendered from the same report dict, never
computed separately.  Exit codes: 0 success, 2 input error, 3 non-convergence.

Reports are byte-identical across runs for fixed inputs and seeds; wall-clock
timings are added only on request (``--timings``) since they would break that
guarantee.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .bridge import schrodinger_residual, sinkhorn_solve, standard_a
from .diagnostics import (
    DiagnosticsReport,
    density_bounds,
    gibbs_check,
    jensen_gap,
    mnl_residual,
    run_diagnostics,
)
from .entry import entry_report, solve_entry_pair
from .io import dumps_canonical, gen_instance, instance_hash, load_instance
from .model import (
    ConvergenceError,
    Coupling,
    Marginal,
    ValidationError,
    information_cost,
    kl_divergence,
    mutual_information,
    objective_value,
)
from .optimize import brute_force_oracle, full_solve, ORACLE_MAX_CELLS

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_CONVERGENCE = 3


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", help="write the machine-readable JSON report here")
    p.add_argument("--outer-tol", type=float, default=1e-10)
    p.add_argument("--inner-tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in the report "
                        "(makes reports non-reproducible byte-for-byte)")


def _flags_dict(args) -> dict:
    return {
        "outer_tol": args.outer_tol,
        "inner_tol": args.inner_tol,
        "max_iter": args.max_iter,
        "seed": args.seed,
    }


def _emit(report: dict, args, elapsed: float) -> None:
    if args.timings:
        report["timings"] = {"seconds": elapsed}
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(report))


def _fmt(x) -> str:
    return f"{x:.8g}"


def _print_vector(name, labels, values) -> None:
    print(f"{name}:")
    for lab, v in zip(labels, values):
        print(f"  {lab:>8}  {_fmt(v)}")


def _print_matrix(name, row_labels, col_labels, rows) -> None:
    print(f"{name}:")
    head = " ".join(f"{c:>12}" for c in col_labels)
    print(f"  {'':>8} {head}")
    for lab, row in zip(row_labels, rows):
        body = " ".join(f"{_fmt(v):>12}" for v in row)
        print(f"  {lab:>8} {body}")


def _diagnostics_payload(d: DiagnosticsReport) -> dict:
    return {
        "gibbs_deviation": d.gibbs_deviation,
        "fso_slopes": [[e, s] for e, s in d.fso_slopes],
        "directional_derivative_error": d.directional_derivative_error,
        "jensen_gap": d.jensen_gap,
        "density_bounds": list(d.density_bounds),
        "mnl_residual": d.mnl_residual,
        "thresholds": d.thresholds,
        "pass_flags": d.pass_flags,
        "all_passed": d.all_passed,
    }


def _solution_payload(inst, sol) -> dict:
    vertical = inst.alpha * inst.lam * kl_divergence(sol.coupling.marginal_x, inst.phi)
    mutual = inst.lam * mutual_information(sol.coupling)
    return {
        "converged": sol.converged,
        "nu_star": sol.nu_star.weights.tolist(),
        "ccp": sol.ccp.tolist(),
        "coupling": sol.coupling.joint.tolist(),
        "U_star": sol.U_star,
        "f_star": sol.f_star,
        "expected_utility": sol.U_star + vertical + mutual,
        "kappa": vertical + mutual,
        "kappa_vertical": vertical,
        "kappa_mutual_information": mutual,
        "foc_residual": sol.foc_residual,
        "marginal_residual": sol.marginal_residual,
        "duality_gap": sol.duality_gap,
        "outer_iterations": sol.outer_iterations,
    }


def _cmd_solve(args) -> int:
    t0 = time.perf_counter()
    inst, raw = load_instance(args.instance)
    sol = full_solve(inst, outer_tol=args.outer_tol, inner_tol=args.inner_tol,
                     max_iter=args.max_iter)
    diag = run_diagnostics(sol, inst)
    report = {
        "command": "solve",
        "version": __version__,
        "instance_hash": instance_hash(raw),
        "flags": _flags_dict(args),
        "solution": _solution_payload(inst, sol),
        "diagnostics": _diagnostics_payload(diag),
    }
    elapsed = time.perf_counter() - t0
    _emit(report, args, elapsed)

    s = report["solution"]
    _print_vector("optimal marginal nu*", inst.characteristic_labels, s["nu_star"])
    _print_matrix("conditional choice probabilities P(x|t)",
                  inst.characteristic_labels, inst.state_labels, s["ccp"])
    print(f"U* = {_fmt(s['U_star'])}   f* = {_fmt(s['f_star'])}")
    print(f"cost = {_fmt(s['kappa'])} "
          f"(vertical {_fmt(s['kappa_vertical'])}, "
          f"mutual information {_fmt(s['kappa_mutual_information'])})")
    print(f"duality gap = {_fmt(s['duality_gap'])}   "
          f"foc residual = {_fmt(s['foc_residual'])}")
    print(f"diagnostics passed: {report['diagnostics']['all_passed']}")
    print(f"elapsed: {elapsed:.3f} s")
    if not sol.converged:
        return EXIT_NO_CONVERGENCE
    return EXIT_OK if diag.all_passed else EXIT_NO_CONVERGENCE


def _load_nu(path, inst) -> Marginal:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    weights = raw.get("nu") if isinstance(raw, dict) else raw
    arr = np.asarray(weights, dtype=float)
    if arr.shape != (inst.n,):
        raise ValidationError(f"{path}: nu must have length {inst.n}")
    return Marginal(weights=arr)


def _cmd_bridge(args) -> int:
    t0 = time.perf_counter()
    inst, raw = load_instance(args.instance)
    nu = _load_nu(args.nu, inst)
    sol = sinkhorn_solve(inst, nu, tol=args.inner_tol, max_iter=args.max_iter)
    report = {
        "command": "bridge",
        "version": __version__,
        "instance_hash": instance_hash(raw),
        "flags": _flags_dict(args),
        "nu": nu.weights.tolist(),
        "bridge": {
            "converged": sol.converged,
            "iterations": sol.iterations,
            "value_V": sol.value,
            "marginal_residual": sol.marginal_residual,
            "duality_gap": sol.duality_gap,
            "schrodinger_residual": schrodinger_residual(sol.potentials, nu, inst),
            "gauge": sol.potentials.gauge,
            "a": standard_a(sol.potentials, nu, inst).tolist(),
            "a_scaled": sol.potentials.a_scaled.tolist(),
            "b": sol.potentials.b.tolist(),
            "coupling": sol.coupling.joint.tolist(),
        },
    }
    elapsed = time.perf_counter() - t0
    _emit(report, args, elapsed)

    b = report["bridge"]
    _print_vector("potential a(x)", inst.characteristic_labels, b["a"])
    _print_vector("potential b(t)", inst.state_labels, b["b"])
    print(f"V(nu) = {_fmt(b['value_V'])}   iterations = {b['iterations']}")
    print(f"marginal residual = {_fmt(b['marginal_residual'])}   "
          f"duality gap = {_fmt(b['duality_gap'])}")
    print(f"elapsed: {elapsed:.3f} s")
    return EXIT_OK if sol.converged else EXIT_NO_CONVERGENCE


def _cmd_entry(args) -> int:
    t0 = time.perf_counter()
    base, base_raw = load_instance(args.instance)
    entrant, entrant_raw = load_instance(args.entrant)
    pair = solve_entry_pair(base, entrant, outer_tol=args.outer_tol,
                            inner_tol=args.inner_tol, max_iter=args.max_iter)
    rep = entry_report(pair, tol=args.constancy_tol, alpha_tol=args.alpha_tol)
    labels = base.characteristic_labels
    report = {
        "command": "entry",
        "version": __version__,
        "instance_hash": instance_hash(base_raw),
        "entrant_hash": instance_hash(entrant_raw),
        "flags": _flags_dict(args),
        "constancy_tol": args.constancy_tol,
        "alpha_tol": args.alpha_tol,
        "base_nu": pair.base_solution.nu_star.weights.tolist(),
        "entrant_nu": pair.entrant_solution.nu_star.weights.tolist(),
        "pairs": [
            {"x1": labels[x1], "x2": labels[x2], "deviation": dev,
             "constant": ok, "alpha_hat": a}
            for x1, x2, dev, ok, a in rep.pairs
        ],
        "alpha_median": rep.alpha_median,
        "alpha_spread": rep.alpha_spread,
        "informative_pairs": rep.informative_pairs,
        "passed": rep.passed,
    }
    elapsed = time.perf_counter() - t0
    _emit(report, args, elapsed)

    print(f"{'x1':>8} {'x2':>8} {'deviation':>12} {'constant':>9} {'alpha_hat':>12}")
    for row in report["pairs"]:
        a = "-" if row["alpha_hat"] is None else _fmt(row["alpha_hat"])
        print(f"{row['x1']:>8} {row['x2']:>8} {_fmt(row['deviation']):>12} "
              f"{str(row['constant']):>9} {a:>12}")
    med = "-" if report["alpha_median"] is None else _fmt(report["alpha_median"])
    print(f"alpha median = {med}   informative pairs = {report['informative_pairs']}")
    print(f"restrictions passed: {report['passed']}")
    print(f"elapsed: {elapsed:.3f} s")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    inst, raw = load_instance(args.instance)
    if inst.n * inst.m > ORACLE_MAX_CELLS:
        raise ValidationError(f"oracle: instance has {inst.n * inst.m} cells; "
                              f"the guard allows {ORACLE_MAX_CELLS}")
    oracle = brute_force_oracle(inst, iterations=args.iterations, seed=args.seed)
    sol = full_solve(inst, outer_tol=args.outer_tol, inner_tol=args.inner_tol,
                     max_iter=args.max_iter)
    report = {
        "command": "oracle",
        "version": __version__,
        "instance_hash": instance_hash(raw),
        "flags": _flags_dict(args),
        "iterations": args.iterations,
        "oracle": {
            "U_oracle": oracle.u_best,
            "U_solver": sol.U_star,
            "difference": sol.U_star - oracle.u_best,
            "marginal_max_diff": float(np.max(np.abs(
                oracle.coupling.marginal_x - sol.nu_star.weights))),
            "start_values": list(oracle.start_values),
        },
        "solution": _solution_payload(inst, sol),
    }
    elapsed = time.perf_counter() - t0
    _emit(report, args, elapsed)

    o = report["oracle"]
    print(f"U (solver)  = {_fmt(o['U_solver'])}")
    print(f"U (oracle)  = {_fmt(o['U_oracle'])}")
    print(f"difference  = {_fmt(o['difference'])}")
    print(f"max |nu_solver - nu_oracle| = {_fmt(o['marginal_max_diff'])}")
    print(f"elapsed: {elapsed:.3f} s")
    return EXIT_OK if sol.converged else EXIT_NO_CONVERGENCE


def _cmd_diagnose(args) -> int:
    t0 = time.perf_counter()
    inst, raw = load_instance(args.instance)
    if args.coupling:
        try:
            with open(args.coupling, "r", encoding="utf-8") as fh:
                joint = np.asarray(json.load(fh), dtype=float)
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise ValidationError(f"{args.coupling}: {exc}") from None
        P = Coupling(joint=joint)
        body = {
            "mode": "coupling",
            "gibbs_deviation": gibbs_check(P, inst),
            "jensen_gap": jensen_gap(P, inst),
            "mnl_residual": mnl_residual(P, inst),
            "density_bounds": list(density_bounds(P.marginal_x, inst)),
            "objective": objective_value(P, inst),
            "information_cost": information_cost(P, inst),
        }
        exit_code = EXIT_OK
    else:
        sol = full_solve(inst, outer_tol=args.outer_tol,
                         inner_tol=args.inner_tol, max_iter=args.max_iter)
        diag = run_diagnostics(sol, inst)
        body = {"mode": "solution", **_diagnostics_payload(diag)}
        exit_code = (EXIT_OK if sol.converged and diag.all_passed
                     else EXIT_NO_CONVERGENCE)
    report = {
        "command": "diagnose",
        "version": __version__,
        "instance_hash": instance_hash(raw),
        "flags": _flags_dict(args),
        "diagnostics": body,
    }
    elapsed = time.perf_counter() - t0
    _emit(report, args, elapsed)
    for key, value in body.items():
        print(f"{key}: {value}")
    print(f"elapsed: {elapsed:.3f} s")
    return exit_code


def _cmd_gen(args) -> int:
    payload = gen_instance(args.seed, args.n, args.m,
                           u_range=(args.umin, args.umax),
                           alpha=args.alpha, lam=args.lam)
    text = dumps_canonical(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out} (hash {instance_hash(payload)[:12]})")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statechar",
        description="Solve and test state-characteristic rational-inattention problems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="full solve plus diagnostics")
    p.add_argument("--instance", required=True)
    _common_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bridge", help="two-marginal solve at a fixed nu")
    p.add_argument("--instance", required=True)
    p.add_argument("--nu", required=True, help="JSON file: array or {\"nu\": [...]}")
    _common_flags(p)
    p.set_defaults(func=_cmd_bridge)

    p = sub.add_parser("entry", help="entry restrictions and alpha identification")
    p.add_argument("--instance", required=True, help="base instance file")
    p.add_argument("--entrant", required=True, help="entrant instance file")
    p.add_argument("--constancy-tol", type=float, default=1e-6)
    p.add_argument("--alpha-tol", type=float, default=1e-4)
    _common_flags(p)
    p.set_defaults(func=_cmd_entry)

    p = sub.add_parser("oracle", help="brute-force cross-check (n*m <= 12)")
    p.add_argument("--instance", required=True)
    p.add_argument("--iterations", type=int, default=3000)
    _common_flags(p)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("diagnose", help="structural checks on a solution or coupling")
    p.add_argument("--instance", required=True)
    p.add_argument("--coupling", help="JSON n x m joint matrix to diagnose as-is")
    _common_flags(p)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("gen", help="generate a pseudo-random instance file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--umin", type=float, default=0.0)
    p.add_argument("--umax", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--lambda", type=float, default=1.0, dest="lam")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.set_defaults(func=_cmd_gen)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
