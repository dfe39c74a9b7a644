"""Command-line front end.

Every command writes its tables (CSV, 17 significant digits), a JSON
summary, SVG figures and a ``manifest.json`` describing the resolved
configuration and the files produced. ``selfsim rerun --manifest`` replays a
run from its manifest.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 no
non-minimal branch in the scanned window.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import io
from .core import (
    MissingBranch,
    PowerApprox,
    ProblemParams,
    SolverError,
    Status,
    ValidationError,
    parse_nonlinearity,
)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_NO_BRANCH = 0, 2, 3, 4
OUTPUT_ENV = "SELFSIM_OUTPUT_DIR"
DEFAULT_OUTPUT = "selfsim_out"


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# argument helpers


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _alpha_range(text: str):
    parts = str(text).split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("alpha range must look like min:max:count")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad alpha range {text!r}")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def read_config(path) -> Dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment, keys mirror flag names."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc.strerror}")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _common(parser):
    parser.add_argument("--config", help="flat key=value file; flags override it")
    parser.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--reproducible", type=_bool, nargs="?", const=True, default=False,
                        help="omit wall-clock data so reruns are byte-identical")
    parser.add_argument("--no-svg", dest="svg", action="store_false", help="skip figures")


def _ode_flags(parser, r_max=50.0):
    parser.add_argument("--r-max", type=float, default=r_max)
    parser.add_argument("--rtol", type=float, default=1e-10)
    parser.add_argument("--atol", type=float, default=1e-12)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selfsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="solve one profile and estimate its constants")
    _common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--nonlinearity", default="exp", help="exp | approx:<n> | power:<p>")
    p.add_argument("--alpha", type=float, required=True)
    _ode_flags(p)
    p.set_defaults(func=cmd_profile)

    for name in ("scan", "branches"):
        p = sub.add_parser(name, help="scan alpha -> L(alpha) and solve L(alpha) = value")
        _common(p)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--nonlinearity", default="exp")
        p.add_argument("--alpha-range", type=_alpha_range, default="-2:8:201")
        p.add_argument("--solve-L", type=float, default=None)
        _ode_flags(p)
        p.set_defaults(func=cmd_scan)

    p = sub.add_parser("converge", help="power-approximation convergence report")
    _common(p)
    p.add_argument("--N", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--ns", type=_int_list, default="10,100,1000,10000")
    p.add_argument("--r0", type=float, default=5.0)
    _ode_flags(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("dichotomy", help="perturb the non-minimal profile and classify the flow")
    _common(p)
    p.add_argument("--N", type=int, required=True)
    level = p.add_mutually_exclusive_group()
    level.add_argument("--L", type=float, default=None)
    level.add_argument("--auto-L", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--epsilons", type=_float_list, default="-0.05,0.05")
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--alpha-range", type=_alpha_range, default="-2:8:201")
    p.add_argument("--grid-radius", type=float, default=60.0)
    p.add_argument("--grid-points", type=int, default=4096)
    p.add_argument("--grid-stretch", type=float, default=6.0)
    p.add_argument("--s-max", type=float, default=80.0)
    p.add_argument("--blowup-threshold", type=float, default=700.0)
    p.add_argument("--snapshots", type=_float_list, default="",
                   help="self-similar times at which to write w(y)")
    _ode_flags(p)
    p.set_defaults(func=cmd_dichotomy)

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="write into this directory instead of the original one")
    p.set_defaults(func=cmd_rerun)
    return parser


# --------------------------------------------------------------------------
# run bookkeeping


class Run:
    """Collects output files and writes the manifest."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: List[str] = []
        self.start = time.perf_counter()

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def svg(self, name: str, plot, *plot_args, **kw):
        if self.args.svg:
            plot(*plot_args, self.path(name), **kw)

    def config(self) -> Dict[str, object]:
        skip = {"func", "config", "out"}
        return {k: v for k, v in sorted(vars(self.args).items()) if k not in skip}

    def manifest(self, summary=None):
        inputs = {}
        if self.args.config:
            inputs[str(self.args.config)] = _sha256(self.args.config)
        data = {
            "command": self.args.command,
            "config": self.config(),
            "input_hashes": inputs,
            "outputs": sorted(set(self.files)),
            "wall_clock": None if self.args.reproducible else time.perf_counter() - self.start,
            "version": _version(),
        }
        if summary is not None:
            data["summary"] = summary
        io.write_json(self.out / "manifest.json", data)
        return data


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


def _icfg(args):
    from .radial_ode import IntegratorConfig

    return IntegratorConfig(r_max=args.r_max, rel_tol=args.rtol, abs_tol=args.atol)


def _params(args) -> ProblemParams:
    return ProblemParams(args.N, parse_nonlinearity(args.nonlinearity))


# --------------------------------------------------------------------------
# commands


def cmd_profile(args, run: Run):
    from . import asymptotics, plotting
    from .approx_family import profile_membership
    from .radial_ode import residual, solve_profile

    params = _params(args)
    prof = solve_profile(params, args.alpha, _icfg(args))
    prof.to_csv(run.path("profile.csv"), header_lines=[
        f"N={params.dimension},nonlinearity={args.nonlinearity},alpha={io.format_float(args.alpha)}"
    ])
    summary = {"status": prof.status, "zero_crossing": prof.zero_crossing, "r_max": prof.r_max}
    L = None
    if prof.status is Status.CONVERGED:
        fit = asymptotics.estimate_L_tail(prof)
        L = fit.L
        summary.update(
            L_tail=fit.L, fit_error=fit.fit_error,
            L_integral=asymptotics.estimate_L_integral(prof),
            residual=residual(prof, 0.01, prof.r_max),
        )
        if isinstance(params.nonlinearity, PowerApprox):
            summary["membership"] = profile_membership(prof)
        io.write_json(run.path("decay.json"), {"certificates": asymptotics.certify_decay(prof)})
    io.write_json(run.path("estimates.json"), summary)
    run.svg("profile.svg", plotting.plot_profile, prof, L=L)
    if prof.status is not Status.CONVERGED:
        run.manifest(summary)
        raise CliError(f"profile did not converge: {prof.status.value}", EXIT_SOLVER)
    return summary


def cmd_scan(args, run: Run):
    from . import plotting
    from .radial_ode import solve_profile
    from .shooting import classify_minimal, scan_alpha, solve_S_L

    params = _params(args)
    amin, amax, count = args.alpha_range
    icfg = _icfg(args)
    diagram = scan_alpha(params, amin, amax, count, cfg=icfg, jobs=args.jobs)
    diagram.to_csv(run.path("branches.csv"))
    summary = {
        "N": params.dimension,
        "critical_points": diagram.critical_points,
        "critical_values": diagram.critical_values,
        "inconsistent_alphas": [r.alpha for r in diagram.records if not r.consistent],
    }
    if args.solve_L is not None:
        roots = solve_S_L(params, args.solve_L, diagram, cfg=icfg)
        profiles = [solve_profile(params, a, icfg) for a in roots]
        for i, prof in enumerate(profiles):
            prof.to_csv(run.path(f"root_{i}.csv"), header_lines=[f"alpha={io.format_float(prof.alpha)}"])
        minimal = classify_minimal(profiles) if len(profiles) > 1 else None
        summary["roots"] = roots
        summary["L_target"] = args.solve_L
        summary["minimality"] = minimal
    io.write_json(run.path("branches.json"), summary)
    run.svg("branches.svg", plotting.plot_branches, diagram, level=args.solve_L)
    return summary


def cmd_converge(args, run: Run):
    from . import plotting
    from .approx_family import convergence_report, verify_membership

    report = convergence_report(args.N, args.alpha, args.ns, r0=args.r0, cfg=_icfg(args), jobs=args.jobs)
    report.to_csv(run.path("convergence.csv"))
    summary = {
        "N": args.N, "alpha": args.alpha, "r0": args.r0, "L_limit": report.L_limit,
        "entries": report.entries,
        "membership": {str(e.n): verify_membership(e.n, args.alpha, report) for e in report.entries},
    }
    io.write_json(run.path("convergence.json"), summary)
    run.svg("convergence.svg", plotting.plot_convergence, report)
    return summary


def cmd_dichotomy(args, run: Run):
    from . import plotting
    from .pde_sim import SimConfig, auto_level, dichotomy_experiment
    from .shooting import scan_alpha

    if args.L is None and not args.auto_L:
        raise ValidationError("give --L or --auto-L")
    params = ProblemParams(args.N)
    icfg = _icfg(args)
    amin, amax, count = args.alpha_range
    diagram = scan_alpha(params, amin, amax, count, cfg=icfg, jobs=args.jobs)
    L_target = auto_level(diagram) if args.auto_L else args.L
    cfg = SimConfig(
        grid_radius=args.grid_radius, grid_points=args.grid_points, grid_stretch=args.grid_stretch,
        s_max=args.s_max, blowup_threshold=args.blowup_threshold, snapshot_times=tuple(args.snapshots),
    )
    result = dichotomy_experiment(args.N, L_target, args.t0, args.epsilons, cfg,
                                  diagram=diagram, icfg=icfg, jobs=args.jobs)
    result.to_csv(run.path("dichotomy.csv"))
    for k, row in enumerate(result.rows):
        for s, w in sorted(row.outcome.snapshots.items()):
            io.write_table(run.path(f"snapshot_{k}_s{io.format_float(s)}.csv"), ["y", "w"],
                           [row.outcome.grid, w], preamble=[f"epsilon={io.format_float(row.epsilon)}"])
    summary = {
        "N": args.N, "L_target": L_target, "t0": args.t0,
        "alpha_minimal": result.alpha_minimal, "alpha_nonminimal": result.alpha_nonminimal,
        "rows": [
            {"epsilon": r.epsilon, "classification": r.classification, "s_star": r.s_star,
             "terminal_residual": r.terminal_residual, "between_branches": r.between_branches,
             "steps": r.outcome.steps, "sup_history": r.outcome.sup_history}
            for r in result.rows
        ],
    }
    io.write_json(run.path("dichotomy.json"), summary)
    run.svg("sup_history.svg", plotting.plot_sup_history,
            [(f"eps={r.epsilon:g}", r.outcome) for r in result.rows])
    return summary


def cmd_rerun(args, _run=None):
    manifest = io.read_json(args.manifest)
    argv = [manifest["command"]]
    for key, value in manifest["config"].items():
        if key in ("command", "svg"):
            continue
        if value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if key in ("N", "L"):
            flag = "--" + key
        elif key == "auto_L":
            flag = "--auto-L"
        elif key == "solve_L":
            flag = "--solve-L"
        if value is True:
            argv += [flag, "true"]
        elif key == "alpha_range":
            argv += [flag, ":".join(io.format_float(v) if i < 2 else str(int(v)) for i, v in enumerate(value))]
        elif isinstance(value, list):
            argv += [flag, ",".join(io.format_float(v) if isinstance(v, float) else str(v) for v in value)]
        else:
            argv += [flag, io.format_float(value) if isinstance(value, float) else str(value)]
    if not manifest["config"].get("svg", True):
        argv.append("--no-svg")
    argv += ["--out", str(args.out or Path(args.manifest).parent)]
    return main(argv)


# --------------------------------------------------------------------------


def _parse(argv):
    """Parse flags on top of the optional ``--config`` file.

    Config values become subcommand defaults, so flags still override them
    and required flags may come from the file.
    """
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = read_config(known.config)
        choices = parser._subparsers._group_actions[0].choices
        command = next((tok for tok in argv if tok in choices), None)
        if command is None:
            return parser.parse_args(argv)
        sub = choices[command]
        # keys may be written as the flag (no-svg) or as its destination (svg)
        actions = {a.dest: a for a in sub._actions if a.dest != "help"}
        for a in sub._actions:
            for opt in a.option_strings:
                actions.setdefault(opt.lstrip("-").replace("-", "_"), a)
        unknown = sorted(set(values) - set(actions))
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        defaults = {}
        for key, value in values.items():
            action = actions[key]
            action.required = False
            if action.type is None and isinstance(action.default, bool):
                try:
                    value = _bool(value)
                except argparse.ArgumentTypeError as exc:
                    raise ValidationError(f"config key {key}: {exc}")
                if key != action.dest and isinstance(action, argparse._StoreFalseAction):
                    value = not value
            defaults[action.dest] = value
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _fail(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def _attach_negative_values(argv):
    """Join ``--flag -2:8:41`` into ``--flag=-2:8:41``.

    argparse only accepts a dash-led value after a flag when it looks like a
    plain negative number, which excludes ranges and comma lists.
    """
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if (tok.startswith("--") and "=" not in tok and nxt is not None
                and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == ".")):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(_attach_negative_values(argv))
    except ValidationError as exc:
        return _fail(exc, EXIT_INVALID)
    except SystemExit as exc:
        # argparse already printed its usage message
        return EXIT_INVALID if exc.code else EXIT_OK
    if args.command == "rerun":
        try:
            return cmd_rerun(args)
        except (OSError, KeyError, ValueError) as exc:
            return _fail(exc, EXIT_INVALID)
    try:
        run = Run(args, argv)
        summary = args.func(args, run)
        run.manifest(summary)
        return EXIT_OK
    except CliError as exc:
        return _fail(exc, exc.code)
    except MissingBranch as exc:
        return _fail(exc, EXIT_NO_BRANCH)
    except ValidationError as exc:
        return _fail(exc, EXIT_INVALID)
    except SolverError as exc:
        return _fail(exc, EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
