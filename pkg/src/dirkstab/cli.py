"""Command-line interface: ``dirkstab {analyze,certify,run,converge}``.

Exit codes
    analyze/certify: 0 remarkably stable, 2 not remarkably stable, 1 error.
    run: 0 all residual checks pass, 1 error or failed checks, 3 stage solver failure.
    converge: 0 on success, 1 on error.

Settings are resolved as defaults, then a JSON ``--config`` file, then
explicit flags.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import bochner, stability, tableau as tab
from .integrator import (
    SolverOptions,
    StageSolveError,
    TimePartition,
    convergence_study,
    run,
    write_ledger_csv,
    write_trajectory_csv,
)
from .problems import (
    EvolutionProblem,
    manufactured,
    parse_problem,
    sine_decay_solution,
    smooth_scalar_solution,
)

log = logging.getLogger("dirkstab")

EXIT_OK, EXIT_ERROR, EXIT_NOT_REMARKABLE, EXIT_SOLVER = 0, 1, 2, 3
DEFAULT_SEED = 20221
LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scheme: Optional[str] = None
    tableau: Optional[str] = None
    problem: str = "heat:N=16,K0=1"
    T: float = 1.0
    steps: Optional[int] = 100
    steps_list: Optional[list] = None
    partition_file: Optional[str] = None
    geometric_ratio: Optional[float] = None
    u0: str = "random"
    manufactured: bool = False
    format: str = "text"
    out: Optional[str] = None
    trajectory: bool = False
    seed: int = DEFAULT_SEED
    newton_tol: float = 1e-13
    max_iters: int = 50
    ledger_tol: float = 1e-10
    eigen_tol: float = stability.EIGEN_TOL
    jobs: int = 1

    def validate(self, command: str) -> None:
        if self.format not in ("text", "json", "csv"):
            raise ConfigError(f"format must be text, json or csv, got {self.format!r}")
        if command == "analyze" or command == "certify":
            if (self.scheme is None) == (self.tableau is None):
                raise ConfigError("give exactly one of --scheme or --tableau")
            return
        if self.scheme is None and self.tableau is None:
            raise ConfigError("give --scheme or --tableau")
        if not (isinstance(self.T, (int, float)) and self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"T must be positive, got {self.T!r}")
        if not (isinstance(self.max_iters, int) and self.max_iters >= 1):
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if self.u0 not in ("random", "sine", "ones", "zero", "exact"):
            raise ConfigError(f"unknown u0 kind {self.u0!r}")


def _resolve(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for k, v in doc.items():
            setattr(cfg, k, v)
    for k in names:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            setattr(cfg, k, v)
    if getattr(args, "steps_multi", None) is not None:
        if len(args.steps_multi) == 1:
            cfg.steps = args.steps_multi[0]
            cfg.steps_list = None
        else:
            cfg.steps_list = list(args.steps_multi)
    return cfg


# --------------------------------------------------------------------------
# helpers


def _load_tableau(cfg: RunConfig) -> tab.ButcherTableau:
    if cfg.tableau is not None:
        try:
            return tab.load(cfg.tableau)
        except FileNotFoundError:
            raise ConfigError(f"tableau file not found: {cfg.tableau}") from None
    return tab.catalog(cfg.scheme)


def _partition(cfg: RunConfig) -> TimePartition:
    if cfg.partition_file:
        part = TimePartition.from_file(cfg.partition_file)
        if not math.isclose(part.T, cfg.T, rel_tol=1e-12):
            log.info("partition file ends at %g; overriding T = %g", part.T, cfg.T)
        return part
    steps = int(cfg.steps) if cfg.steps is not None else 0
    if cfg.geometric_ratio is not None:
        return TimePartition.geometric(cfg.T, steps, cfg.geometric_ratio)
    return TimePartition.uniform(cfg.T, steps)


def _exact_solution(problem: EvolutionProblem):
    kind = problem.name.split("(")[0]
    if kind == "heat":
        return sine_decay_solution(problem)
    if kind == "scalar":
        return smooth_scalar_solution()
    raise ConfigError(f"problem {problem.name!r} has no built-in manufactured solution (use heat or scalar)")


def _initial_state(cfg: RunConfig, problem: EvolutionProblem, exact) -> np.ndarray:
    if cfg.u0 == "exact" or (cfg.manufactured and exact is not None and cfg.u0 == "random"):
        return np.asarray(exact(0.0), dtype=float)
    if cfg.u0 == "zero":
        return np.zeros(problem.dim)
    if cfg.u0 == "ones":
        return np.ones(problem.dim)
    if cfg.u0 == "sine":
        x = np.arange(1, problem.dim + 1) / (problem.dim + 1)
        return np.sin(np.pi * x)
    rng = np.random.default_rng(cfg.seed)
    return rng.standard_normal(problem.dim)


def _clean(x):
    """Make a value JSON-safe (numpy scalars, NaN -> null)."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=False, allow_nan=False)


def _emit(text: str, out: Optional[str], name: str) -> None:
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# --------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: RunConfig, machine: bool = False) -> int:
    t = _load_tableau(cfg)
    report = stability.analysis_report(t, eigen_tol=cfg.eigen_tol)
    if machine or cfg.format == "json":
        _emit(_dumps(report), cfg.out, "analysis.json")
    else:
        _emit(stability.format_report(report), cfg.out, "analysis.txt")
    return EXIT_OK if report["verdict"]["remarkable"] else EXIT_NOT_REMARKABLE


def _bochner_section(result, opts) -> dict:
    problem = result.problem
    if problem.profile is None:
        return {"applicable": False, "reason": "problem has no coercivity profile"}
    if result.coeffs is None or not stability.certify(result.tableau).remarkable:
        return {"applicable": False, "reason": "scheme is not remarkably stable"}
    aud = bochner.audit(result)
    stage = bochner.stage_bound_check(result)
    doc = bochner.audit_report(aud, stage)
    doc["applicable"] = True
    return doc


def cmd_run(cfg: RunConfig) -> int:
    t = _load_tableau(cfg)
    problem = parse_problem(cfg.problem)
    exact = None
    if cfg.manufactured or cfg.u0 == "exact":
        exact, dexact = _exact_solution(problem)
        if cfg.manufactured:
            problem = manufactured(problem, exact, dexact)
    part = _partition(cfg)
    u0 = _initial_state(cfg, problem, exact)
    opts = SolverOptions(newton_tol=cfg.newton_tol, ledger_tol=cfg.ledger_tol, max_iters=int(cfg.max_iters))
    result = run(problem, t, part, u0, opts)

    summary = dict(result.summary)
    summary["failure"] = result.failure
    summary["bochner"] = _bochner_section(result, opts) if result.ledgers else None
    if exact is not None and result.completed:
        summary["final_error"] = problem.norm(result.states[-1] - np.asarray(exact(part.T)))

    buf = io.StringIO()
    write_ledger_csv(result.ledgers, t.s, buf)
    ledger_csv = buf.getvalue()
    if cfg.out:
        _emit(ledger_csv, cfg.out, "ledger.csv")
        _emit(_dumps(summary), cfg.out, "summary.json")
        if cfg.trajectory:
            buf = io.StringIO()
            write_trajectory_csv(result.times, result.states, buf)
            _emit(buf.getvalue(), cfg.out, "trajectory.csv")
    elif cfg.format == "csv":
        sys.stdout.write(ledger_csv)
    elif cfg.format == "json":
        sys.stdout.write(_dumps(summary) + "\n")
    else:
        sys.stdout.write(_format_summary(summary) + "\n")

    if not result.completed:
        return EXIT_SOLVER
    return EXIT_OK if summary["residual_checks_pass"] else EXIT_ERROR


def _format_summary(summary: dict) -> str:
    keys = ["scheme", "problem", "steps_completed", "T", "initial_energy", "final_energy", "max_energy",
            "max_identity_residual", "max_raw_identity_residual", "cumulative_identity_residual",
            "max_update_mismatch", "energy_nonincreasing", "q_negative_steps", "min_q", "max_eta",
            "residual_checks_pass", "final_error"]
    lines = [f"{k:<30} {summary[k]}" for k in keys if k in summary]
    if summary.get("failure"):
        lines.append(f"{'failure':<30} {summary['failure']['message']}")
    b = summary.get("bochner")
    if b:
        if b.get("applicable"):
            lines.append("bochner audit: " + ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in b["passes"].items()))
        else:
            lines.append(f"bochner audit: not applicable ({b['reason']})")
    return "\n".join(lines)


def cmd_converge(cfg: RunConfig) -> int:
    t = _load_tableau(cfg)
    problem = parse_problem(cfg.problem)
    exact, dexact = _exact_solution(problem)
    problem = manufactured(problem, exact, dexact)
    steps = cfg.steps_list if cfg.steps_list else [int(cfg.steps)]
    if any(int(n) < 1 for n in steps):
        raise ConfigError("empty partition: every step count must be >= 1")
    taus = [cfg.T / int(n) for n in steps]
    opts = SolverOptions(newton_tol=cfg.newton_tol, ledger_tol=cfg.ledger_tol, max_iters=int(cfg.max_iters))
    res = convergence_study(problem, t, exact, taus, cfg.T, opts, jobs=max(1, int(cfg.jobs)))
    doc = {"scheme": t.name, "problem": problem.name, "T": cfg.T, "rows": res.table(), "order": res.order}
    if cfg.format == "json":
        _emit(_dumps(doc), cfg.out, "convergence.json")
    elif cfg.format == "csv":
        lines = ["tau,error,rate"] + [
            f"{r['tau']:.17g},{r['error']:.17g},{'' if r['rate'] is None else format(r['rate'], '.17g')}"
            for r in doc["rows"]
        ]
        _emit("\n".join(lines), cfg.out, "convergence.csv")
    else:
        lines = [f"{'tau':>14} {'error':>14} {'rate':>8}"]
        for r in doc["rows"]:
            rate = "" if r["rate"] is None else f"{r['rate']:.3f}"
            lines.append(f"{r['tau']:>14.6e} {r['error']:>14.6e} {rate:>8}")
        order = "n/a" if res.order is None else f"{res.order:.4f}"
        lines.append(f"observed order: {order}")
        _emit("\n".join(lines), cfg.out, "convergence.txt")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scheme", help="catalog scheme id, e.g. crouzeix23")
    p.add_argument("--tableau", help="path to a tableau JSON file")
    p.add_argument("--format", choices=("text", "json", "csv"))
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="JSON file with settings (flags override it)")
    p.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("--eigen-tol", dest="eigen_tol", type=float)


def _integration(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", help="problem id with parameters, e.g. skew:N=2,omega=1")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--steps", dest="steps_multi", type=int, nargs="+",
                   help="number of uniform steps (several values for converge)")
    p.add_argument("--partition-file", dest="partition_file", help="whitespace-separated times from 0 to T")
    p.add_argument("--geometric-ratio", dest="geometric_ratio", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--newton-tol", dest="newton_tol", type=float)
    p.add_argument("--ledger-tol", dest="ledger_tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int, help="Newton iteration cap per stage")
    p.add_argument("--u0", choices=("random", "sine", "ones", "zero", "exact"))
    p.add_argument("--manufactured", action="store_true", help="add the forcing of the built-in exact solution")
    p.add_argument("--trajectory", action="store_true", help="also write trajectory.csv (with --out)")
    p.add_argument("--jobs", type=int, help="parallel runs for converge")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirkstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("analyze", "energy coefficients, Q and verdict"),
                           ("certify", "like analyze, JSON output only")):
        _common(sub.add_parser(name, help=helptext))
    for name, helptext in (("run", "integrate with an energy ledger"),
                           ("converge", "observed order on a manufactured solution")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _integration(p)
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("DIRKSTAB_LOG", "quiet").strip().lower()
    level = LOG_LEVELS.get(level_name, logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    if level_name not in LOG_LEVELS:
        log.error("DIRKSTAB_LOG=%r not recognised; using quiet", level_name)


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        cfg.validate(args.command)
        if args.dump_config:
            sys.stdout.write(json.dumps(asdict(cfg), indent=2) + "\n")
            return EXIT_OK
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "certify":
            return cmd_analyze(cfg, machine=True)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_converge(cfg)
    except (ConfigError, ValueError, KeyError, OSError, StageSolveError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        log.debug("details", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
