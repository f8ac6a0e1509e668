"""Command-line front end.

Subcommands: expand, expect, correlate, power-count, kernel-check,
gamma-check, counterterms.  A config file of `key = value` lines supplies
defaults that individual flags override; given the same configuration and
seed the output bytes are identical run to run.  Exit codes: 0 success,
2 usage error, 3 invariant violation, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import clifford
from .deformation import (
    DomainError, ExtractionError, expectation_report, extract_counterterms,
    gamma_Q, renormalized_residual, two_point,
)
from .diagrams import deformedsum_to_json, diagram_to_json, to_dot
from .kernels import (
    KernelError, KernelParams, NumericalError, TestFunction,
    clipped_integral, dirac_kernel_2d, green_2d, greens_identity_residual,
    propagator_1d, q_kernel_1d, scaling_degree_probe,
)
from .perturbation import (
    COSPINOR, SPINOR, InternalConsistencyError, ResourceError, expand,
    field_counts, graph_statistics, monomial_count,
)
from .power_counting import DomainError as PCDomainError, classify
from .properties import run_all
from .terms import StructuralError, termsum_to_json, to_tex

THREADS_ENV = "STHIRRING_THREADS"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVARIANT = 3
EXIT_NUMERICAL = 4

_BRANCH = {"psi": SPINOR, "psibar": COSPINOR}


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _read_config(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise StructuralError(f"bad config line: {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise StructuralError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n < 1:
        raise StructuralError(f"{THREADS_ENV} must be >= 1")
    return n


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _cmd_expand(args) -> int:
    series = expand(args.order)
    branch = _BRANCH[args.branch]
    terms = series.coefficient(args.order, branch).terms()
    field_counts(series, args.order, branch)
    graph_statistics(series, args.order, branch)
    if args.format == "tex":
        lines = [f"% order {args.order}, {len(terms)} monomials"]
        lines += [to_tex(t) for t in terms]
        _emit("\n".join(lines), args.output)
    elif args.format == "json":
        _emit(_dumps({
            "order": args.order,
            "branch": args.branch,
            "monomials": termsum_to_json(series.coefficient(args.order, branch)),
        }), args.output)
    else:  # dot: the undeformed diagrams, one per monomial
        ds = gamma_Q(series.coefficient(args.order, branch))
        chunks = [to_dot(d, f"m{i}") for i, d in enumerate(ds)
                  if not _has_contraction(d)]
        _emit("\n".join(chunks), args.output)
    return EXIT_OK


def _has_contraction(d) -> bool:
    from .diagrams import iter_children
    return any(ch[0] in ("pair", "qloop", "ctloop")
               for ch, _ in iter_children(d))


def _cmd_expect(args) -> int:
    series = expand(args.order)
    ds, examined = expectation_report(series, args.order, _BRANCH[args.branch])
    if args.format == "json":
        _emit(_dumps({
            "order": args.order,
            "branch": args.branch,
            "patterns_examined": examined,
            "surviving_diagrams": len(ds),
            "value": "0" if ds.is_zero() else "nonzero",
        }), args.output)
    else:
        _emit(f"0   ({examined} contraction patterns examined)", args.output)
    if not ds.is_zero():
        raise InternalConsistencyError(
            f"expectation at order {args.order} is not the empty sum")
    return EXIT_OK


def _cmd_correlate(args) -> int:
    series = expand(args.order)
    a, b = args.branches.split("-")
    tp = two_point(series, _BRANCH[a], _BRANCH[b], args.order)
    if args.format == "dot":
        chunks = []
        for k in range(args.order + 1):
            chunks += [to_dot(d, f"o{k}_{i}") for i, d in enumerate(tp[k])]
        _emit("\n".join(chunks), args.output)
    else:
        payload = {
            "branches": args.branches,
            "orders": {str(k): deformedsum_to_json(tp[k])
                       for k in range(args.order + 1)},
        }
        _emit(_dumps(payload), args.output)
    return EXIT_OK


def _cmd_power_count(args) -> int:
    series = expand(args.max_order)
    reports = classify(args.dim, args.max_order, series=series)
    rows = [r.as_row() for r in reports]
    if args.format == "json":
        _emit(_dumps({"dimension": args.dim, "rows": rows}), args.output)
    else:
        header = ["k", "N", "L", "sd", "codim", "rho", "verdict", "graphs"]
        widths = [max(len(h), *(len(str(r[h])) for r in rows)) for h in header]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        for r in rows:
            lines.append("  ".join(str(r[h]).ljust(w)
                                   for h, w in zip(header, widths)))
        _emit("\n".join(lines), args.output)
    return EXIT_OK


def _cmd_kernel_check(args) -> int:
    import random
    rng = random.Random(args.seed)
    report: dict = {"dimension": args.dim, "mass": args.mass, "seed": args.seed}
    if args.dim == 1:
        params = KernelParams(1, args.mass)
        worst = 0.0
        trials = []
        for _ in range(args.trials):
            center = rng.uniform(-2 * args.mass, 2 * args.mass)
            radius = rng.uniform(0.1, args.mass)
            amp = rng.uniform(0.5, 2.0)
            f = TestFunction((center,), radius, amp)
            got = q_kernel_1d(params, f).real
            want = clipped_integral(params, f)
            # relative 1e-8 floored at the absolute quadrature tolerance
            excess = abs(got - want) / max(1e-8 * abs(want), 1e-10)
            worst = max(worst, excess)
            trials.append({"center": center, "radius": radius,
                           "amplitude": amp, "tolerance_fraction": excess})
        report["identity"] = "q_kernel == clipped integral over [-m, m]"
        report["worst_tolerance_fraction"] = worst
        report["trials"] = trials
        ok = worst <= 1.0
    else:
        params = KernelParams(2, args.mass)
        f = TestFunction((0.3, -0.2), 0.4, 1.0)
        res = greens_identity_residual(params, f, (0.3, -0.2))
        probe = scaling_degree_probe(lambda x: dirac_kernel_2d(params, x),
                                     (1.0, 0.7))
        report["greens_identity_residual"] = res
        report["dirac_scaling_degree"] = {
            "estimate": probe.sd, "ci": [probe.ci_low, probe.ci_high],
            "conclusive": probe.conclusive,
        }
        ok = res <= 1e-6 and abs(probe.sd - 1.0) <= 0.1
    report["pass"] = ok
    _emit(_dumps(report), args.output)
    if not ok:
        raise NumericalError("kernel identity check failed")
    return EXIT_OK


def _cmd_gamma_check(args) -> int:
    report = run_all(args.seed, trials=args.trials)
    if args.export_rep:
        rep = clifford.build_gamma_rep(args.export_rep)
        exported = clifford.rep_to_json(rep)
        exported["clifford_defect"] = clifford.clifford_defect(rep)
        report["gamma_rep"] = exported
    _emit(_dumps(report), args.output)
    if report["failures"]:
        raise InternalConsistencyError(
            f"{report['failures']} deformation property failures")
    return EXIT_OK


def _cmd_counterterms(args) -> int:
    series = expand(args.order)
    H = extract_counterterms(series, args.order)
    payload = {"orders": {}}
    for k, h in H.items():
        payload["orders"][str(k)] = {
            "even": h.is_even(),
            "operators": [diagram_to_json(d) for d in h.ops],
            "residual_zero": renormalized_residual(series, H, k).is_zero(),
        }
    _emit(_dumps(payload), args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sthirring",
        description="Symbolic perturbation and power counting for the "
                    "stochastic Thirring model.")
    p.add_argument("--config", help="key = value defaults file")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--output", help="write to file instead of stdout")
        sp.add_argument("--seed", type=int, default=0)
        if config:
            # config entries act as defaults on every subcommand; explicit
            # flags still override (3.10 subparsers reparse their defaults,
            # so parent-level set_defaults would be clobbered)
            sp.set_defaults(**config)

    sp = sub.add_parser("expand", help="perturbative coefficients")
    sp.add_argument("--order", type=int)
    sp.add_argument("--branch", choices=("psi", "psibar"), default="psi")
    sp.add_argument("--format", choices=("tex", "json", "dot"), default="tex")
    common(sp)
    sp.set_defaults(fn=_cmd_expand)

    sp = sub.add_parser("expect", help="expectation value at a given order")
    sp.add_argument("--order", type=int)
    sp.add_argument("--branch", choices=("psi", "psibar"), default="psi")
    sp.add_argument("--format", choices=("text", "json"), default="text")
    common(sp)
    sp.set_defaults(fn=_cmd_expect)

    sp = sub.add_parser("correlate", help="two-point function diagrams")
    sp.add_argument("--order", type=int)
    sp.add_argument("--branches", default="psi-psibar",
                    choices=("psi-psibar", "psibar-psi", "psi-psi",
                             "psibar-psibar"))
    sp.add_argument("--format", choices=("json", "dot"), default="json")
    common(sp)
    sp.set_defaults(fn=_cmd_correlate)

    sp = sub.add_parser("power-count", help="divergence classification")
    sp.add_argument("--dim", type=int)
    sp.add_argument("--max-order", type=int)
    sp.add_argument("--format", choices=("table", "json"), default="table")
    common(sp)
    sp.set_defaults(fn=_cmd_power_count)

    sp = sub.add_parser("kernel-check", help="numerical kernel identities")
    sp.add_argument("--dim", type=int, choices=(1, 2))
    sp.add_argument("--mass", type=float, default=1.0)
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--format", choices=("json",), default="json")
    common(sp)
    sp.set_defaults(fn=_cmd_kernel_check)

    sp = sub.add_parser("gamma-check", help="deformation-map property trials")
    sp.add_argument("--trials", type=int, default=25)
    sp.add_argument("--export-rep", type=int, metavar="D",
                    help="include the Cl(D) gamma matrices as [re, im] arrays")
    sp.add_argument("--format", choices=("json",), default="json")
    common(sp)
    sp.set_defaults(fn=_cmd_gamma_check)

    sp = sub.add_parser("counterterms", help="renormalized-equation operators")
    sp.add_argument("--order", type=int)
    sp.add_argument("--format", choices=("json",), default="json")
    common(sp)
    sp.set_defaults(fn=_cmd_counterterms)

    return p


_REQUIRED = {
    "expand": ("order",),
    "expect": ("order",),
    "correlate": ("order",),
    "counterterms": ("order",),
    "power-count": ("dim", "max_order"),
    "kernel-check": ("dim",),
    "gamma-check": (),
}


def _coerce(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    if val in ("true", "false"):
        return val == "true"
    return val


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        config = None
        if known.config:
            config = {k: _coerce(v)
                      for k, v in _read_config(known.config).items()}
        parser = build_parser(config)
        args = parser.parse_args(argv)
        missing = [name for name in _REQUIRED[args.command]
                   if getattr(args, name, None) is None]
        if missing:
            flags = ", ".join("--" + m.replace("_", "-") for m in missing)
            print(f"usage error: {args.command} requires {flags} "
                  "(flag or config entry)", file=sys.stderr)
            return EXIT_USAGE
        _threads()
        return args.fn(args)
    except (DomainError, PCDomainError, clifford.CliffordError, KernelError,
            ResourceError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InternalConsistencyError, ExtractionError, StructuralError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
