"""Command-line front end.

Subcommands: ``check`` (positivity/stability gates), ``radius`` (stability
radius formulas), ``nn-bound`` (network sector bound), ``sweep``
(simulation batches to CSV), ``refine`` (data-driven sector refinement).

Exit codes: 0 success / verdict true, 2 analysis negative, 1 usage or
input error.  All numbers in a report come from library operations; the
CLI only formats them.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import ffnn, radius as rad, sim
from .errors import (
    CertificationError,
    LureStabError,
    NoInstabilityError,
    NonzeroBiasError,
    NotSisoError,
    ProblemFormatError,
    UpperNotMetzlerError,
)
from .linalg import NormKind
from .problems import Problem, load_problem

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NEGATIVE = 2


def _mat(m: np.ndarray) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(m)]


def _vec(v) -> list | None:
    return None if v is None else [float(x) for x in np.asarray(v).ravel()]


class Report:
    """Accumulates one command's results and renders them deterministically."""

    def __init__(self, command: str, problem: Problem | None = None, source=None):
        self.data = {"command": command, "results": {}, "warnings": []}
        if problem is not None:
            self.data["problem"] = str(problem.path)
            self.data["inputs_digest"] = problem.digest
        elif source is not None:
            self.data["problem"] = str(source)

    def set(self, key: str, value) -> None:
        self.data["results"][key] = value

    def warn(self, message: str) -> None:
        self.data["warnings"].append(message)

    def emit(self, fmt: str) -> None:
        if fmt == "json":
            print(json.dumps(self.data, sort_keys=True, indent=2))
            return
        print(f"command: {self.data['command']}")
        if "problem" in self.data:
            print(f"problem: {self.data['problem']}")
        if "inputs_digest" in self.data:
            print(f"sha256: {self.data['inputs_digest']}")
        for key, value in self.data["results"].items():
            print(f"{key}: {_human(value)}")
        for warning in self.data["warnings"]:
            print(f"warning: {warning}")


def _human(value) -> str:
    if isinstance(value, bool):
        return "pass" if value else "FAIL"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}={_human(v)}" for k, v in value.items()) + "}"
    if isinstance(value, list):
        return json.dumps(value)
    return str(value)


def _certificate_results(report: Report, cert: rad.AizermanCertificate) -> None:
    report.set("gate_b_nonneg", cert.b_nonneg)
    report.set("gate_c_nonneg", cert.c_nonneg)
    report.set("gate_sector_ordered", cert.sector_ordered)
    report.set("gate_metzler_at_lower", cert.metzler_at_lower)
    report.set("gate_hurwitz_at_upper", cert.hurwitz_at_upper)
    report.set("metzler_at_upper", cert.metzler_at_upper)
    report.set("verdict", bool(cert.verdict))
    report.set("positive_vector", _vec(cert.positive_vector))


def cmd_check(args) -> int:
    problem = load_problem(args.problem, norm_override=args.norm)
    report = Report("check", problem)
    sector = problem.analysis_sector()
    if sector is None:
        print("error: check needs a sector, network, or builtin nonlinearity", file=sys.stderr)
        return EXIT_INPUT
    cert = rad.certify_positive_lure(problem.system, sector)
    _certificate_results(report, cert)
    if not cert.verdict:
        report.warn(
            "closed loop failed gate(s): " + ", ".join(cert.failed_gates())
            + "; sector-wide exponential stability is NOT certified"
        )
    report.emit(args.format)
    return EXIT_OK if cert.verdict else EXIT_NEGATIVE


def cmd_radius(args) -> int:
    problem = load_problem(args.problem, norm_override=args.norm)
    report = Report("radius", problem)
    sector = problem.analysis_sector()
    kind = problem.nonlinearity_kind

    if kind == "none":
        if problem.pert.schur_scale is not None:
            result = rad.stability_radius_schur(problem.system.a, problem.pert)
        else:
            result = rad.stability_radius_linear(problem.system.a, problem.pert)
    else:
        compute = rad.nn_stability_radius if kind == "network" else rad.stability_radius_lure
        try:
            result = compute(problem.system, sector, problem.pert)
        except (CertificationError, UpperNotMetzlerError) as exc:
            if not args.override_gates:
                cert = getattr(exc, "certificate", None)
                if cert is not None:
                    _certificate_results(report, cert)
                report.warn(str(exc))
                report.warn("pass --override-gates to compute the formula anyway")
                report.emit(args.format)
                return EXIT_NEGATIVE
            result = compute(problem.system, sector, problem.pert, override_gates=True)
            report.warn(
                "GATES FAILED (" + str(exc) + "); the radius below is a formula "
                "evaluation outside the certified regime"
            )

    report.set("radius", float(result.radius))
    report.set("formula", result.formula)
    report.set("norm", result.norm.value)
    report.set("closed_loop", _mat(result.closed_loop))
    if result.certificate is not None:
        _certificate_results(report, result.certificate)
    elif result.gates:
        for name, ok in result.gates.items():
            report.set(f"gate_{name}", bool(ok))
    if sector is not None:
        report.set("sector_upper", _mat(sector.upper))
    report.emit(args.format)
    return EXIT_OK


def cmd_nn_bound(args) -> int:
    if args.network:
        net = ffnn.load_ffnn(args.network)
        report = Report("nn-bound", source=args.network)
    elif args.problem:
        problem = load_problem(args.problem)
        if problem.network is None:
            print("error: the problem file has no network", file=sys.stderr)
            return EXIT_INPUT
        net = problem.network
        report = Report("nn-bound", problem)
    else:
        print("error: nn-bound needs --network or --problem", file=sys.stderr)
        return EXIT_INPUT

    try:
        bound = ffnn.sector_bound_ffnn(net)
    except NonzeroBiasError as exc:
        report.warn(str(exc))
        report.emit(args.format)
        return EXIT_NEGATIVE

    report.set("hidden_layers", net.q)
    report.set("activation", net.activation.name)
    report.set("activation_sector", [net.activation.a1, net.activation.a2])
    report.set("activation_gain_c", float(net.activation.slope_gain))
    trace = []
    product = np.abs(net.output.w)
    trace.append({"layer": "output", "abs_weight_product": _mat(product)})
    for i in range(net.q - 1, -1, -1):
        product = product @ np.abs(net.hidden[i].w)
        trace.append({"layer": f"hidden_{i + 1}", "abs_weight_product": _mat(product)})
    report.set("product_trace", trace)
    report.set("gamma1", _mat(bound.lower))
    report.set("gamma2", _mat(bound.upper))
    report.emit(args.format)
    return EXIT_OK


def _formula_radius_or_none(problem: Problem, report: Report) -> float | None:
    sector = problem.analysis_sector()
    try:
        if sector is None:
            if problem.pert.schur_scale is not None:
                return rad.stability_radius_schur(problem.system.a, problem.pert).radius
            return rad.stability_radius_linear(problem.system.a, problem.pert).radius
        result = rad.stability_radius_lure(
            problem.system, sector, problem.pert, override_gates=True
        )
        if not result.certificate.verdict:
            report.warn(
                "radius used for the delta grid was computed with failed gates: "
                + ", ".join(result.certificate.failed_gates())
            )
        return result.radius
    except LureStabError as exc:
        report.warn(f"no analytic radius available ({exc})")
        return None


def cmd_sweep(args) -> int:
    problem = load_problem(args.problem, norm_override=args.norm)
    report = Report("sweep", problem)
    phi = problem.loop_nonlinearity()
    if phi is None:
        print("error: sweep needs a sector, network, or builtin nonlinearity", file=sys.stderr)
        return EXIT_INPUT
    cfg = problem.sim_config(dt=args.dt, horizon=args.horizon)
    formula_radius = _formula_radius_or_none(problem, report)
    deltas = problem.sweep_deltas
    if deltas is None:
        if formula_radius is None:
            print(
                "error: the problem lists no sweep deltas and no radius is computable",
                file=sys.stderr,
            )
            return EXIT_INPUT
        deltas = [round(f * formula_radius, 12) for f in (0.5, 0.8, 1.0, 1.2, 1.5)]
        report.warn("sweep deltas derived from the analytic radius")

    rows = sim.sweep(
        problem.system, phi, problem.pert, deltas,
        cfg=cfg, trials=args.trials, seed=args.seed,
    )
    out_path = args.out or (problem.path.stem + "_sweep.csv")
    try:
        sim.write_sweep_csv(rows, out_path)
    except OSError as exc:
        print(f"error: cannot write {out_path}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    summary = []
    for delta in deltas:
        group = [r for r in rows if r.delta == float(delta)]
        summary.append(
            {
                "delta": float(delta),
                "stable": sum(r.verdict == "Stable" for r in group),
                "unstable": sum(r.verdict == "Unstable" for r in group),
                "inconclusive": sum(r.verdict == "Inconclusive" for r in group),
            }
        )
    report.set("deltas", [float(d) for d in deltas])
    report.set("trials", args.trials)
    report.set("seed", args.seed)
    report.set("per_delta", summary)
    report.set("csv", str(out_path))
    if formula_radius is not None:
        report.set("formula_radius", float(formula_radius))
        beyond = [s for s in summary if s["delta"] > formula_radius]
        if beyond and all(s["unstable"] == 0 for s in beyond):
            report.warn(
                "analytic radius conservative: no instability observed at any "
                "tested delta beyond the formula radius"
            )
    report.emit(args.format)
    return EXIT_OK


def cmd_refine(args) -> int:
    problem = load_problem(args.problem, norm_override=args.norm)
    report = Report("refine", problem)
    if problem.network is None:
        print("error: refine needs a problem with a network", file=sys.stderr)
        return EXIT_INPUT
    if problem.pert.k1 != 1 or problem.pert.k2 != 1:
        print("error: refine needs a scalar perturbation structure", file=sys.stderr)
        return EXIT_INPUT
    net = problem.network
    bound = ffnn.sector_bound_ffnn(net)
    report.set("gamma2", _mat(bound.upper))

    delta_crit = args.delta_crit
    if delta_crit is None:
        base = rad.nn_stability_radius(problem.system, bound, problem.pert)
        report.set("formula_radius", float(base.radius))
        cfg = problem.sim_config(dt=args.dt, horizon=args.horizon)
        try:
            found = sim.find_critical_delta(
                problem.system,
                sim.Nonlinearity.network(net),
                problem.pert,
                delta_max=max(10.0 * base.radius, 1.0),
                tol=0.01,
                cfg=cfg,
                trials=args.trials,
                seed=args.seed,
            )
        except NoInstabilityError as exc:
            report.warn(str(exc))
            report.emit(args.format)
            return EXIT_NEGATIVE
        delta_crit = found.delta_star
        report.set("delta_crit_bracket", [found.bracket[0], found.bracket[1]])
    report.set("delta_crit", float(delta_crit))

    refined = rad.refine_upper_sector(problem.system, problem.pert, float(delta_crit))
    report.set("magnitude", float(refined.magnitude))
    report.set("candidates", [float(refined.magnitude), float(-refined.magnitude)])
    try:
        chosen = ffnn.select_refined_sign(net, refined.magnitude, seed=args.seed)
    except NotSisoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report.set("refined_upper", _mat(chosen.upper))
    report.set("refined_lower", _mat(chosen.lower))
    check = ffnn.empirical_sector_check(net, chosen, seed=args.seed)
    report.set("empirical_samples", check.samples)
    report.set("empirical_violations", check.count)
    report.set("empirical_max_ratio", float(check.max_ratio))
    if check.count > 0:
        report.warn(
            f"network output leaves the refined sector on {check.count} of "
            f"{check.samples} sampled inputs; the refined bound is empirically too tight"
        )
    report.emit(args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lurestab",
        description="Stability radii and sector certification for positive feedback loops",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, problem_required=True):
        p.add_argument("--problem", required=problem_required, help="problem JSON file")
        p.add_argument("--norm", choices=["one", "two", "inf"], default=None,
                       help="override the perturbation norm")
        p.add_argument("--format", choices=["text", "json"], default="text")

    p_check = sub.add_parser("check", help="evaluate positivity/stability gates")
    common(p_check)
    p_check.set_defaults(handler=cmd_check)

    p_radius = sub.add_parser("radius", help="compute the stability radius")
    common(p_radius)
    p_radius.add_argument("--override-gates", action="store_true",
                          help="evaluate the formula even if certification fails")
    p_radius.set_defaults(handler=cmd_radius)

    p_nn = sub.add_parser("nn-bound", help="sector bound of a network")
    p_nn.add_argument("--network", help="network JSON file")
    p_nn.add_argument("--problem", help="problem file whose network to use")
    p_nn.add_argument("--format", choices=["text", "json"], default="text")
    p_nn.set_defaults(handler=cmd_nn_bound)

    p_sweep = sub.add_parser("sweep", help="simulate trajectory batches over deltas")
    common(p_sweep)
    p_sweep.add_argument("--out", help="sweep CSV path")
    p_sweep.add_argument("--seed", type=int, default=sim.DEFAULT_SEED)
    p_sweep.add_argument("--trials", type=int, default=sim.DEFAULT_TRIALS)
    p_sweep.add_argument("--dt", type=float, default=None)
    p_sweep.add_argument("--horizon", type=float, default=None)
    p_sweep.set_defaults(handler=cmd_sweep)

    p_refine = sub.add_parser("refine", help="refine the upper sector bound")
    common(p_refine)
    p_refine.add_argument("--delta-crit", type=float, default=None,
                          help="observed critical perturbation (searched if omitted)")
    p_refine.add_argument("--seed", type=int, default=sim.DEFAULT_SEED)
    p_refine.add_argument("--trials", type=int, default=sim.DEFAULT_TRIALS)
    p_refine.add_argument("--dt", type=float, default=None)
    p_refine.add_argument("--horizon", type=float, default=None)
    p_refine.set_defaults(handler=cmd_refine)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except LureStabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE


if __name__ == "__main__":
    sys.exit(main())
