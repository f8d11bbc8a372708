"""Command line: norms, bounds, simulate, verify, calibrate, scaling.

Every subcommand writes JSON lines (or CSV for ``scaling --out``) to
stdout and exits 0 only on full success.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import experiments, verify
from .bounds import holder_consistent, lower_bound_table
from .channels import channel_from_json, gershgorin_bound, info_matrix, norms
from .dist_core import dist_from_json, uniform_dist
from .protocols import Decision, TesterConstants, preset_constants, strategy_from_spec


def _load_json(text: str) -> Any:
    """Parse inline JSON, or read it from a file when given ``@path``."""
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    return json.loads(text)


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _emit(obj: Any, out=None):
    out = out or sys.stdout
    out.write(json.dumps(obj, sort_keys=True) + "\n")


def cmd_norms(args) -> int:
    ch = channel_from_json(_load_json(args.channel))
    h = info_matrix(ch)
    n = norms(h)
    _emit({
        "k": ch.k,
        "op": n.op,
        "nuclear": n.nuclear,
        "frobenius": n.frobenius,
        "eigenvalues": h.eigenvalues.tolist(),
        "gershgorin": gershgorin_bound(h),
        "holder_holds": n.holder_holds(),
    })
    return 0


def cmd_bounds(args) -> int:
    family = args.family
    if family.lstrip().startswith("{") or family.startswith("@"):
        family = _load_json(family)
    rows = lower_bound_table(args.k, args.eps, family)
    for r in rows:
        _emit(r.to_json())
    return 0 if holder_consistent(rows, args.k, args.eps) else 1


def _constants_for(spec: dict, path: str | None) -> TesterConstants | None:
    if path:
        return TesterConstants.from_json(_load_json("@" + path))
    if spec.get("protocol") == "interactive_leaky":
        return preset_constants(spec.get("preset", "calibrated"))
    return None


def cmd_simulate(args) -> int:
    spec = _load_json(args.spec)
    constants = _constants_for(spec, args.constants)
    strategy = strategy_from_spec(spec, constants)
    k = int(spec["k"])
    p = dist_from_json(_load_json(args.dist)) if args.dist else uniform_dist(k)
    if args.trials:
        far = None if args.expect is None else args.expect == "far"
        est = experiments.mc_error(strategy, p, int(spec["n"]), args.trials, int(spec.get("seed", 0)), far)
        _emit({"spec": spec, **est.to_json()})
        return 0
    outcome = strategy.run(p, int(spec["n"]), int(spec.get("seed", 0)))
    if isinstance(outcome, Decision):
        _emit({"spec": spec, **outcome.to_json()})
    else:
        _emit({"spec": spec, "estimate": outcome.probs.tolist()})
    return 0


def cmd_verify(args) -> int:
    names = sorted(verify.SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    for name in names:
        reports = []
        for rep in verify.run_suite(name, args.cases, args.seed):
            reports.append(rep)
            if args.all_reports or not rep.holds:
                _emit(rep.to_json())
        summary = verify.slack_summary(reports)
        _emit({"suite": name, "summary": summary})
        failed += summary["violations"]
    return 1 if failed else 0


def cmd_calibrate(args) -> int:
    c = experiments.calibrate_constants(
        _ints(args.ks), args.eps, args.seed, target=args.target, trials=args.trials,
        ni_trials=args.ni_trials, ni_target=args.ni_target,
    )
    text = c.dumps() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_scaling(args) -> int:
    constants = TesterConstants.from_json(_load_json("@" + args.constants)) if args.constants else None
    fits, csv_text = experiments.scaling_experiment(
        _ints(args.ks), args.eps, args.seed, trials=args.trials, target=args.target, constants=constants,
    )
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    for fit in fits.values():
        _emit(fit.to_json(), sys.stdout if args.out else sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locinfo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("norms", help="information-matrix norms of a channel")
    s.add_argument("--channel", required=True, help="channel JSON or @file")
    s.set_defaults(func=cmd_norms)

    s = sub.add_parser("bounds", help="order-level lower bounds for each task and protocol class")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--family", required=True, help="ldp:RHO, comm:BITS, leaky, erasure, or custom-norms JSON")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("simulate", help="run one protocol")
    s.add_argument("--spec", required=True, help="protocol spec JSON or @file")
    s.add_argument("--dist", help="input distribution JSON (default uniform)")
    s.add_argument("--constants", help="tester constants JSON file")
    s.add_argument("--trials", type=int, default=0, help="estimate the error rate over this many trials")
    s.add_argument("--expect", choices=("uniform", "far"), help="correct verdict (default: inferred from --dist)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", help="exact verification suites")
    s.add_argument("--suite", required=True, choices=sorted(verify.SUITES) + ["all"])
    s.add_argument("--cases", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--all-reports", action="store_true", help="emit passing reports too")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("calibrate", help="fit tester constants by grid search")
    s.add_argument("--ks", required=True, help="comma-separated k values")
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--target", type=float, default=1 / 3)
    s.add_argument("--ni-trials", type=int, default=400)
    s.add_argument("--ni-target", type=float, default=0.25)
    s.add_argument("--out", help="write the constants file here")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("scaling", help="interactive vs noninteractive n* scaling in k")
    s.add_argument("--ks", default="256,1024,4096")
    s.add_argument("--eps", type=float, default=0.3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--target", type=float, default=1 / 3)
    s.add_argument("--constants", help="tester constants JSON file (default: packaged calibration)")
    s.add_argument("--out", help="CSV output path (default stdout)")
    s.set_defaults(func=cmd_scaling)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, experiments.SearchFailure) as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
