"""Command-line front end.

Subcommands
-----------
``absspec``   trace the absolute (or essential) spectrum locus over a domain
``count``     eigenvalue counts in a disk for a list of interval lengths
``selftest``  run the invariant suite
``problems``  list the built-in problems
``replay``    re-run the command recorded in a manifest

Every run writes ``<command>.manifest.json`` next to its CSV output.  Exit
codes: 0 success, 1 selftest failure, 2 input or validation error, 3
numerical failure (zero on every perturbed contour, integration failure).
If the first argument is not a subcommand, ``absspec`` is assumed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import TOL_ENV_VAR, Tolerances, load_tolerances
from .counting import (
    ConfigError,
    ContourError,
    accumulation_experiment,
    containment_margins,
    covering_trace,
)
from .expr import ExprError, parse_scalar
from .flow import IntegrationError, Propagator, trajectory
from .periodic import (
    double_system,
    extrapolated_set_probe,
    gamma_from_turns,
    periodic_count,
    write_probe_csv,
)
from .problem import (
    DomainError,
    HypothesisError,
    ParameterDomain,
    ProblemFileError,
    validate_hypotheses,
)
from .problems import catalog, parse_problem_spec
from .selftest import FULL, run_selftest
from .spectra import DiskTooLarge, PreconditionError, partition_disk, trace_locus, write_locus_csv

EXIT_OK, EXIT_SELFTEST, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("absspec", "count", "selftest", "problems", "replay")
# flags whose values may start with '-' (negative numbers, domain lists)
_VALUE_FLAGS = ("--domain", "--lambda-c", "--ell", "--delta", "--probe")


class UsageError(ValueError):
    """Bad flag value; reported with exit code 2."""


def _real(text: str, what: str) -> float:
    try:
        z = parse_scalar(text)
    except (ExprError, SyntaxError) as exc:
        raise UsageError(f"{what}: cannot parse {text!r}: {exc}") from None
    if z.imag != 0:
        raise UsageError(f"{what}: expected a real number, got {text!r}")
    return z.real


def _complex(text: str, what: str) -> complex:
    try:
        return parse_scalar(text)
    except (ExprError, SyntaxError) as exc:
        raise UsageError(f"{what}: cannot parse {text!r}: {exc}") from None


def parse_domain(text: str, res: int) -> ParameterDomain:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"--domain needs re0,re1,im0,im1, got {text!r}")
    vals = [_real(p, "--domain") for p in parts]
    try:
        return ParameterDomain(*vals, res=res)
    except ValueError as exc:
        raise UsageError(f"--domain: {exc}") from None


def parse_bc(text: str) -> tuple[str, complex]:
    """``separated``, ``periodic`` or ``gamma=<turns>`` -> (kind, gamma)."""
    if text == "separated":
        return "separated", 1.0
    if text == "periodic":
        return "periodic", 1.0
    if text.startswith("gamma="):
        return "periodic", gamma_from_turns(_real(text[6:], "--bc"))
    raise UsageError(f"--bc must be separated, periodic or gamma=<turns>, got {text!r}")


def _join_values(argv: list[str]) -> list[str]:
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


# -- manifests ------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, Path):
        return str(v)
    return v


def write_manifest(out: Path, command: str, argv: list[str], tol: Tolerances, params: dict,
                   problem: dict | None, outputs: list[str], elapsed: float,
                   results: dict | None = None) -> Path:
    """``<command>.manifest.json``; floats use the shortest exact repr."""
    data = {
        "tool": "absspec",
        "version": __version__,
        "command": command,
        "argv": argv,
        "problem": problem,
        "tolerances": tol.as_dict(),
        "params": params,
        "timing": {"elapsed_s": elapsed},
        "outputs": sorted(outputs),
        "results": results or {},
    }
    path = out / f"{command}.manifest.json"
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _problem_info(text, profile) -> dict:
    return {"spec": text, "name": profile.name, "kind": profile.kind, "n": profile.n,
            "digest": profile.digest()}


def _gnuplot(out: Path, name: str, body: str) -> str:
    fname = f"{name}.gp"
    (out / fname).write_text("set datafile separator ','\n" + body, encoding="utf-8")
    return fname


# -- subcommands -------------------------------------------------------------------

def cmd_absspec(args, tol: Tolerances) -> tuple[int, dict]:
    profile, boundary, file_domain, _ = parse_problem_spec(args.problem)
    side = args.side or ("zero" if profile.kind != "separated-asymptotic" else "plus")
    if side != "zero" and boundary is None:
        raise UsageError(f"--side {side} needs boundary data; the problem has none")
    if args.domain:
        domain = parse_domain(args.domain, args.res)
    elif file_domain is not None:
        domain = ParameterDomain(*file_domain.bounds, res=args.res)
    else:
        raise UsageError("no --domain given and the problem defines none")
    report = validate_hypotheses(profile, boundary if side != "zero" else None, domain,
                                 sample_count=32, seed=args.seed, tol=tol)
    if not report.passed:
        for f in report.failures()[:10]:
            print(f"hypothesis failure: {f}", file=sys.stderr)
        raise HypothesisError(report.summary())
    locus = trace_locus(profile, side, domain, boundary if side != "zero" else None, tol=tol)
    out = Path(args.out)
    write_locus_csv(locus, out / "locus.csv")
    outputs = ["locus.csv"]
    if args.gnuplot:
        outputs.append(_gnuplot(out, "locus",
                                "set xlabel 'Re lambda'\nset ylabel 'Im lambda'\n"
                                "plot 'locus.csv' skip 2 using 1:2 with points pt 7 "
                                "title 'locus'\n"))
    print(f"{len(locus.vertices)} vertices in {len(locus.polylines)} polylines, "
          f"{len(locus.rejected)} rejected sign changes")
    results = {"vertices": len(locus.vertices), "polylines": len(locus.polylines),
               "rejected": len(locus.rejected), "side": side,
               "hypotheses": report.summary()}
    params = {"side": side, "domain": list(domain.bounds), "res": domain.res,
              "seed": args.seed}
    return EXIT_OK, {"outputs": outputs, "results": results, "params": params,
                     "problem": _problem_info(args.problem, profile)}


def _trace_path(part):
    """Arc-length parametrisation s -> lam of the locus arc through the disk."""
    arc = np.asarray(part.arc, dtype=complex)
    s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(arc)))])
    s = s / s[-1]

    def path(t):
        t = np.asarray(t, dtype=float)
        return np.interp(t, s, arc.real) + 1j * np.interp(t, s, arc.imag)

    return path


def cmd_count(args, tol: Tolerances) -> tuple[int, dict]:
    profile, boundary, _, _ = parse_problem_spec(args.problem)
    if args.lambda_c is None or args.delta is None or not args.ell:
        raise UsageError("count needs --lambda-c, --delta and at least one --ell")
    lam_c = _complex(args.lambda_c, "--lambda-c")
    delta = _real(args.delta, "--delta")
    if delta <= 0:
        raise UsageError("--delta must be positive")
    ells = [_real(e, "--ell") for e in args.ell]
    if any(e <= profile.ell0 for e in ells):
        raise UsageError(f"every --ell must exceed ell0 = {profile.ell0:g}")
    default_bc = "separated" if boundary is not None else "periodic"
    kind, gamma = parse_bc(args.bc or default_bc)
    out = Path(args.out)
    outputs, results = [], {}

    if kind == "separated":
        if boundary is None:
            raise UsageError("--bc separated needs boundary data; the problem has none")
        table = accumulation_experiment(profile, boundary, lam_c, delta, ells, tol, args.jobs)
        # a posteriori: propagated boundary subspaces must stay out of Ebar
        results["containment_margin"] = [
            {side: None if m is None else float(m.min()) for side, m in
             containment_margins(profile, boundary, ell, lam_c, tol=tol).items()}
            for ell in ells]
    else:
        doubled = double_system(profile, gamma)
        counts = {}

        def counter(ell):
            c = periodic_count(doubled, ell, lam_c, delta, cross_check=not args.no_cross_check,
                               tol=tol, jobs=args.jobs)
            counts[ell] = c
            return c.report

        table = accumulation_experiment(profile, None, lam_c, delta, ells, tol, args.jobs,
                                        counter=counter)
    table.write_csv(out / "count.csv")
    outputs.append("count.csv")
    print("ell,ell_bar,count")
    for ell, ellb, n in table.rows:
        print(f"{ell:.17g},{ellb:.17g},{n}")
    results["counts"] = table.counts
    results["perturbations"] = [r.perturbations for r in table.reports]

    if args.trace:
        if kind != "separated":
            raise UsageError("--trace follows the covering map of separated problems only")
        try:
            part = partition_disk(profile, "plus", lam_c, delta, boundary, tol=tol)
        except (DiskTooLarge, PreconditionError) as exc:
            raise UsageError(f"--trace: {exc}") from None
        turns = []
        for j, ell in enumerate(ells):
            tr = covering_trace(profile, boundary, ell, _trace_path(part), tol=tol)
            name = "trace.csv" if len(ells) == 1 else f"trace-{j}.csv"
            tr.write_csv(out / name)
            outputs.append(name)
            turns.append(tr.turns)
            print(f"covering trace ell={ell:.17g}: {tr.turns:.6f} turns")
        results["turns"] = turns

    if args.probe:
        if kind == "separated":
            raise UsageError("--probe classifies extrapolated-set membership of periodic problems")
        cands = [_complex(p, "--probe") for p in args.probe]
        probes = extrapolated_set_probe(profile, cands, delta, ells, args.n_cap, gamma, tol,
                                        args.jobs)
        write_probe_csv(probes, out / "probe.csv")
        outputs.append("probe.csv")
        for r in probes:
            print(f"probe {r.lam}: {r.classification} {r.counts} {'; '.join(r.notes)}")
        results["probe"] = [{"lam": r.lam, "class": r.classification, "counts": r.counts}
                            for r in probes]

    if args.dump_trajectory:
        if kind != "separated":
            raise UsageError("--dump-trajectory needs separated boundary data")
        ell = ells[0]
        rec = trajectory(Propagator(profile, lam_c, tol=tol), -ell, ell, boundary.left,
                         np.linspace(-ell, ell, 65)[1:])
        rows = rec.to_rows()
        with open(out / "trajectory.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write("# absspec-trajectory v1\n")
            w = csv.writer(fh)
            width = len(rows[0]) - 2
            head = ["x"] + [f"{p}{i}" for i in range(width) for p in ("re_", "im_")] + [
                "log_scale"]
            w.writerow(head)
            for r in rows:
                vals = [format(float(r[0]), ".17g")]
                for z in r[1:-1]:
                    z = complex(z)
                    vals += [format(z.real, ".17g"), format(z.imag, ".17g")]
                w.writerow(vals + [format(float(r[-1]), ".17g")])
        outputs.append("trajectory.csv")
        results["trajectory_consistency"] = rec.consistency()

    if args.gnuplot:
        body = ("set xlabel 'ell'\nset ylabel 'count'\n"
                "plot 'count.csv' skip 2 using 1:3 with linespoints title 'count'\n")
        if args.trace:
            first = "trace.csv" if len(ells) == 1 else "trace-0.csv"
            body += (f"pause -1\nset xlabel 's'\nset ylabel 'turns'\n"
                     f"plot '{first}' skip 2 using 1:6 with lines title 'cumulative turns'\n")
        outputs.append(_gnuplot(out, "count", body))
    params = {"lambda_c": lam_c, "delta": delta, "ell": ells, "bc": args.bc or default_bc,
              "gamma": complex(gamma), "jobs": args.jobs, "seed": args.seed}
    return EXIT_OK, {"outputs": outputs, "results": results, "params": params,
                     "problem": _problem_info(args.problem, profile)}


def cmd_selftest(args, tol: Tolerances) -> tuple[int, dict]:
    t0 = time.perf_counter()
    checks = run_selftest(quick=args.quick, seed=args.seed, inject=args.inject_failure,
                          tol=tol)
    width = max(len(c.name) for c in checks)
    print(f"{'invariant':<{width}}  {'group':<9} status  {'margin':>9}  seconds")
    for c in checks:
        status = "pass" if c.passed else "FAIL"
        print(f"{c.name:<{width}}  {c.group:<9} {status:<6}  {c.margin:9.3g}  {c.seconds:.2f}")
    failed = [c.name for c in checks if not c.passed]
    total = time.perf_counter() - t0
    print(f"{len(checks) - len(failed)}/{len(checks)} passed in {total:.1f} s")
    out = Path(args.out)
    with open(out / "selftest.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("# absspec-selftest v1\n")
        w = csv.writer(fh)
        w.writerow(["invariant", "group", "status", "error", "tolerance"])
        for c in checks:
            w.writerow([c.name, c.group, "pass" if c.passed else "fail",
                        format(c.error, ".17g"), format(c.tolerance, ".17g")])
    results = {"failed": failed, "checks": len(checks)}
    params = {"quick": args.quick, "seed": args.seed, "inject_failure": args.inject_failure}
    code = EXIT_SELFTEST if failed else EXIT_OK
    return code, {"outputs": ["selftest.csv"], "results": results, "params": params,
                  "problem": None}


def cmd_problems(args, tol: Tolerances) -> tuple[int, dict]:
    rows = catalog()
    width = max(len(n) for n, _ in rows)
    for name, doc in rows:
        print(f"builtin:{name:<{width}}  {doc}")
    return EXIT_OK, {"outputs": [], "results": {"problems": [n for n, _ in rows]},
                     "params": {}, "problem": None}


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="absspec-out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for all sampled inputs")
    common.add_argument("--jobs", type=int, default=1,
                        help="worker threads; 1 is bit-reproducible")
    common.add_argument("--gnuplot", action="store_true",
                        help="also write a gnuplot script for the CSV output")
    common.add_argument("--tol-file", default=None,
                        help=f"tolerance overrides (JSON); default ${TOL_ENV_VAR}")

    parser = argparse.ArgumentParser(prog="absspec", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"absspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("absspec", parents=[common], help="trace the spectrum locus")
    p.add_argument("--problem", required=True,
                   help="builtin:<name>[,key=value...] or a problem file")
    p.add_argument("--side", choices=("plus", "minus", "zero"), default=None,
                   help="tail whose locus is traced (zero: essential spectrum)")
    p.add_argument("--domain", default=None, help="re0,re1,im0,im1")
    p.add_argument("--res", type=int, default=128, help="grid points per axis")

    p = sub.add_parser("count", parents=[common], help="eigenvalue counts in a disk")
    p.add_argument("--problem", required=True)
    p.add_argument("--lambda-c", dest="lambda_c", default=None, help="disk centre")
    p.add_argument("--delta", default=None, help="disk radius")
    p.add_argument("--ell", action="append", default=[],
                   help="half-length of the interval; repeatable, accepts e.g. 10*pi")
    p.add_argument("--bc", default=None, help="separated, periodic or gamma=<turns>")
    p.add_argument("--trace", action="store_true", help="write covering-trace CSVs")
    p.add_argument("--probe", action="append", default=[],
                   help="periodic: classify this point of the extrapolated set")
    p.add_argument("--n-cap", dest="n_cap", type=int, default=2,
                   help="count threshold for --probe")
    p.add_argument("--no-cross-check", dest="no_cross_check", action="store_true",
                   help="periodic: skip the monodromy determinant cross-check")
    p.add_argument("--dump-trajectory", dest="dump_trajectory", action="store_true",
                   help="write the frame and Pluecker trajectory at lambda_c")

    p = sub.add_parser("selftest", parents=[common], help="run the invariant suite")
    p.add_argument("--quick", action="store_true", help="linalg and exterior checks only")
    p.add_argument("--inject-failure", dest="inject_failure", default=None,
                   choices=[name for name, _, _ in FULL], metavar="CHECK",
                   help="test hook: perturb the input of one check")

    p = sub.add_parser("problems", parents=[common], help="built-in problems")
    p.add_argument("action", choices=("list",))

    p = sub.add_parser("replay", help="re-run the command stored in a manifest")
    p.add_argument("manifest")
    return parser


HANDLERS = {"absspec": cmd_absspec, "count": cmd_count, "selftest": cmd_selftest,
            "problems": cmd_problems}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in COMMANDS and argv[0] not in ("-h", "--help", "--version"):
        argv = ["absspec"] + argv
    argv = _join_values(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        try:
            recorded = json.loads(Path(args.manifest).read_text(encoding="utf-8"))["argv"]
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: cannot read manifest: {exc}", file=sys.stderr)
            return EXIT_INPUT
        return main(recorded)
    try:
        tol = load_tolerances(args.tol_file)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: tolerance file: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        code, info = HANDLERS[args.command](args, tol)
    except ContourError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in exc.log:
            print(f"  perturbation: {line}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, HypothesisError, DomainError, ProblemFileError, DiskTooLarge,
            PreconditionError, ExprError, KeyError, TypeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_manifest(out, args.command, argv, tol, info["params"], info["problem"],
                   info["outputs"], time.perf_counter() - t0, info["results"])
    return code


if __name__ == "__main__":
    sys.exit(main())
