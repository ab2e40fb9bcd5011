"""DIRK time stepping with a per-step energy ledger.

Stage slopes ``F_{n,j} = f_{n,j} - A(v_{n,j})`` are computed once and reused
by the update, the extrapolation cross-check and every ledger term, so the
energy identities are evaluated on exactly the quantities the step used.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .problems import EvolutionProblem
from .stability import (
    EnergyCoefficients,
    QuadraticFormMatrix,
    energy_coefficients,
    extrapolation_weights,
    quadratic_form,
)
from .tableau import ButcherTableau, validate

__all__ = [
    "SolverOptions",
    "StageSolveError",
    "TimePartition",
    "StageReport",
    "StepLedger",
    "RunResult",
    "solve_stage",
    "step",
    "run",
    "ConvergenceResult",
    "convergence_study",
    "observed_order",
    "ledger_columns",
    "write_ledger_csv",
    "write_trajectory_csv",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    newton_tol: float = 1e-13
    max_iters: int = 50
    ledger_tol: float = 1e-10
    update_tol: float = 1e-11
    fd_jacobian: bool = False
    fd_step: float = 1e-7


class StageSolveError(RuntimeError):
    """Newton did not converge for a stage equation."""

    def __init__(self, message: str, iterations: int, residual: float, stage: int | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.stage = stage


@dataclass(frozen=True, eq=False)
class TimePartition:
    """Strictly increasing times ``0 = t_0 < ... < t_N = T``."""

    t: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("empty partition: need at least one step")
        if not np.all(np.isfinite(t)):
            raise ValueError("partition times must be finite")
        if t[0] != 0.0:
            raise ValueError(f"partition must start at t = 0, got {t[0]!r}")
        if np.any(np.diff(t) <= 0):
            raise ValueError("partition times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @classmethod
    def uniform(cls, T: float, steps: int) -> "TimePartition":
        if steps < 1:
            raise ValueError("empty partition: steps must be >= 1")
        if not T > 0:
            raise ValueError(f"final time must be positive, got {T!r}")
        t = np.linspace(0.0, T, steps + 1)
        t[-1] = T
        return cls(t)

    @classmethod
    def geometric(cls, T: float, steps: int, ratio: float) -> "TimePartition":
        """Steps growing by ``ratio`` each time, scaled to end at ``T``."""
        if steps < 1:
            raise ValueError("empty partition: steps must be >= 1")
        if not (T > 0 and ratio > 0):
            raise ValueError("geometric partition needs T > 0 and ratio > 0")
        taus = ratio ** np.arange(steps)
        t = np.concatenate(([0.0], np.cumsum(taus)))
        t *= T / t[-1]
        t[-1] = T
        return cls(t)

    @classmethod
    def from_file(cls, path) -> "TimePartition":
        values = np.loadtxt(path, dtype=float, ndmin=1, delimiter=None)
        return cls(values)

    @property
    def steps(self) -> int:
        return self.t.size - 1

    @property
    def tau(self) -> np.ndarray:
        return np.diff(self.t)

    @property
    def T(self) -> float:
        return float(self.t[-1])


# --------------------------------------------------------------------------
# stage solves


@dataclass(frozen=True)
class StageReport:
    iterations: int
    residual: float


def _stage_residual(problem, v, gamma, F):
    return v + gamma * problem.apply_A(v) - F


def _fd_jacobian(problem, v, h):
    n = v.size
    J = np.empty((n, n))
    base = problem.apply_A(v)
    for k in range(n):
        dv = np.zeros(n)
        step_k = h * max(1.0, abs(v[k]))
        dv[k] = step_k
        J[:, k] = (problem.apply_A(v + dv) - base) / step_k
    return J


def solve_stage(
    problem: EvolutionProblem,
    u_base,
    gamma: float,
    rhs_accum=None,
    f_stage=None,
    opts: SolverOptions = SolverOptions(),
    cache: Optional[dict] = None,
):
    """Solve ``v + gamma A(v) = F`` with ``F = u_base + rhs_accum + gamma f_stage``.

    Returns ``(v, StageReport)``. Linear problems use an LU factorization
    cached per ``gamma`` in ``cache``; nonlinear ones use Newton started from
    ``F``.
    """
    if not gamma > 0:
        raise ValueError(f"stage solve needs gamma > 0, got {gamma!r}")
    F = np.array(u_base, dtype=float, copy=True)
    if rhs_accum is not None:
        F += rhs_accum
    if f_stage is not None:
        F += gamma * np.asarray(f_stage, dtype=float)
    scale_F = 1.0 + float(np.linalg.norm(F))

    if problem.linear:
        key = ("lu", float(gamma))
        lu = cache.get(key) if cache is not None else None
        if lu is None:
            lu = lu_factor(np.eye(problem.dim) + gamma * problem.matrix)
            if cache is not None:
                cache[key] = lu
        v = lu_solve(lu, F)
        res = float(np.linalg.norm(_stage_residual(problem, v, gamma, F)))
        return v, StageReport(0, res)

    v = F.copy()
    res = math.inf
    for it in range(1, opts.max_iters + 1):
        r = _stage_residual(problem, v, gamma, F)
        res = float(np.linalg.norm(r))
        # rounding in gamma*A(v) is the attainable floor for stiff stages
        scale = scale_F + float(np.linalg.norm(v)) + gamma * float(np.linalg.norm(problem.apply_A(v)))
        if res <= opts.newton_tol * scale:
            return v, StageReport(it - 1, res)
        if opts.fd_jacobian or problem.jacobian is None:
            J = _fd_jacobian(problem, v, opts.fd_step)
        else:
            J = problem.jacobian(v)
        dv = np.linalg.solve(np.eye(problem.dim) + gamma * J, -r)
        v = v + dv
        if float(np.linalg.norm(dv)) <= 4.0 * np.finfo(float).eps * (1.0 + float(np.linalg.norm(v))):
            r = _stage_residual(problem, v, gamma, F)
            return v, StageReport(it, float(np.linalg.norm(r)))
    raise StageSolveError(
        f"Newton did not converge in {opts.max_iters} iterations (residual {res:.3e})",
        opts.max_iters,
        res,
    )


# --------------------------------------------------------------------------
# one step


@dataclass
class StepLedger:
    """Everything measured during one step ``t_n -> t_n + tau_n``.

    ``identity_residual`` is the dissipative form of the balance (with ``Q``
    and aggregated ``nu_i``); ``raw_identity_residual`` is the form with the
    ``delta_i`` squares and the off-diagonal ``nu_ij`` work terms.
    """

    n: int
    t_n: float
    tau_n: float
    energy_before: float
    energy_after: float
    stage_states: np.ndarray
    stage_slopes: np.ndarray
    stage_forcing: np.ndarray
    q_value: float
    work_terms: np.ndarray
    identity_residual: float
    raw_identity_residual: float
    eta: float
    update_mismatch: float
    stage_reports: tuple[StageReport, ...]

    @property
    def stage_iters(self) -> tuple[int, ...]:
        return tuple(r.iterations for r in self.stage_reports)

    @property
    def energy_scale(self) -> float:
        return max(1.0, 2.0 * self.energy_before)


def step(
    problem: EvolutionProblem,
    tableau: ButcherTableau,
    coeffs: Optional[EnergyCoefficients],
    qform: Optional[QuadraticFormMatrix],
    u_n,
    t_n: float,
    tau_n: float,
    opts: SolverOptions = SolverOptions(),
    n: int = 0,
    cache: Optional[dict] = None,
    lam: Optional[np.ndarray] = None,
):
    """Advance one step and return ``(u_next, ledger)``.

    ``coeffs``/``qform`` may be ``None`` for tableaus without an energy
    analysis (``s > 3``); the energy terms of the ledger are then NaN.
    """
    if not tau_n > 0:
        raise ValueError(f"time step must be positive, got {tau_n!r}")
    A, b, c, s = tableau.A, tableau.b, tableau.c, tableau.s
    u_n = np.asarray(u_n, dtype=float)
    V = np.empty((s, problem.dim))
    Fs = np.empty((s, problem.dim))
    fs = np.empty((s, problem.dim))
    reports = []
    for i in range(s):
        fs[i] = problem.f(t_n + c[i] * tau_n)
        accum = tau_n * (A[i, :i] @ Fs[:i]) if i else None
        try:
            V[i], rep = solve_stage(problem, u_n, tau_n * A[i, i], accum, fs[i], opts, cache)
        except StageSolveError as exc:
            exc.stage = i + 1
            raise
        Fs[i] = fs[i] - problem.apply_A(V[i])
        reports.append(rep)

    u_next = u_n + tau_n * (b @ Fs)

    if lam is None:
        lam = extrapolation_weights(tableau)
    u_extrap = (1.0 - lam.sum()) * u_n + lam @ V
    scale = max(1.0, float(np.max(np.abs(u_n))), float(np.max(np.abs(V))),
                tau_n * float(np.max(np.abs(b) @ np.abs(Fs))))
    mismatch = float(np.max(np.abs(u_next - u_extrap))) / scale

    pair = problem.pairing
    e0 = problem.energy(u_n)
    e1 = problem.energy(u_next)
    if coeffs is not None and qform is not None:
        work = np.array([tau_n * coeffs.nu[i] * pair(Fs[i], V[i]) for i in range(s)])
        states = np.vstack([u_n, V])
        q_val = qform.evaluate(states, pair)
        resid = abs(e1 + q_val - work.sum() - e0)
        prev = np.vstack([u_n, V[:-1]])
        damping = sum(coeffs.delta[i] * pair(V[i] - prev[i], V[i] - prev[i]) for i in range(s))
        diag = sum(tau_n * coeffs.nu_diag[i] * pair(Fs[i], V[i]) for i in range(s))
        off = sum(tau_n * val * pair(Fs[i - 1], V[j - 1]) for (i, j), val in coeffs.nu_offdiag.items())
        raw = abs(e1 + damping - diag - e0 - off)
        eta = e1 - e0 - float(work.sum())
    else:
        work = np.full(s, np.nan)
        q_val = resid = raw = eta = math.nan

    ledger = StepLedger(
        n=n,
        t_n=float(t_n),
        tau_n=float(tau_n),
        energy_before=e0,
        energy_after=e1,
        stage_states=V,
        stage_slopes=Fs,
        stage_forcing=fs,
        q_value=q_val,
        work_terms=work,
        identity_residual=resid,
        raw_identity_residual=raw,
        eta=eta,
        update_mismatch=mismatch,
        stage_reports=tuple(reports),
    )
    return u_next, ledger


# --------------------------------------------------------------------------
# full runs


@dataclass
class RunResult:
    problem: EvolutionProblem
    tableau: ButcherTableau
    partition: TimePartition
    coeffs: Optional[EnergyCoefficients]
    states: np.ndarray
    ledgers: list
    summary: dict = field(default_factory=dict)
    failure: Optional[dict] = None

    @property
    def completed(self) -> bool:
        return self.failure is None

    @property
    def times(self) -> np.ndarray:
        return self.partition.t[: self.states.shape[0]]


def _summarize(result: RunResult, opts: SolverOptions) -> dict:
    led = result.ledgers
    problem = result.problem
    energies = [problem.energy(u) for u in result.states]
    out = {
        "scheme": result.tableau.name,
        "problem": problem.name,
        "steps_requested": result.partition.steps,
        "steps_completed": len(led),
        "T": result.partition.T,
        "completed": result.completed,
        "initial_energy": energies[0],
        "final_energy": energies[-1],
        "max_energy": max(energies),
    }
    if not led:
        out.update(
            max_identity_residual=0.0, max_raw_identity_residual=0.0,
            cumulative_identity_residual=0.0, max_update_mismatch=0.0,
            energy_nonincreasing=True, q_negative_steps=0, min_q=0.0, max_eta=0.0,
            residual_checks_pass=True, nu_weighted_stage_v_integral=0.0,
        )
        return out
    scales = np.array([l.energy_scale for l in led])
    resid = np.array([l.identity_residual for l in led])
    raw = np.array([l.raw_identity_residual for l in led])
    mism = np.array([l.update_mismatch for l in led])
    q = np.array([l.q_value for l in led])
    eta = np.array([l.eta for l in led])
    diffs = np.diff(energies)
    tol = opts.ledger_tol
    energy_ok = bool(np.all(diffs <= tol * np.maximum(1.0, np.array(energies[:-1]) * 2.0)))
    has_energy = result.coeffs is not None
    if has_energy:
        vint = float(sum(
            l.tau_n * sum(result.coeffs.nu[i] * problem.v_norm(l.stage_states[i]) ** 2
                          for i in range(result.tableau.s))
            for l in led
        ))
        ident_ok = bool(np.all(resid <= tol * scales) and np.all(raw <= tol * scales))
    else:
        vint = math.nan
        ident_ok = True
    out.update(
        max_identity_residual=float(np.max(resid)) if has_energy else math.nan,
        max_relative_identity_residual=float(np.max(resid / scales)) if has_energy else math.nan,
        max_raw_identity_residual=float(np.max(raw)) if has_energy else math.nan,
        cumulative_identity_residual=float(np.sum(resid)) if has_energy else math.nan,
        max_update_mismatch=float(np.max(mism)),
        energy_nonincreasing=energy_ok,
        q_negative_steps=int(np.sum(q < -tol * scales)) if has_energy else 0,
        min_q=float(np.min(q)) if has_energy else math.nan,
        max_eta=float(np.max(eta)) if has_energy else math.nan,
        nu_weighted_stage_v_integral=vint,
        residual_checks_pass=bool(ident_ok and np.all(mism <= opts.update_tol)),
    )
    return out


def run(
    problem: EvolutionProblem,
    tableau: ButcherTableau,
    partition: TimePartition,
    u0,
    opts: SolverOptions = SolverOptions(),
) -> RunResult:
    """Integrate from ``u0`` over ``partition``.

    A stage failure stops the run; the partial trajectory is returned with
    ``failure`` describing where and why.
    """
    check = validate(tableau)
    if not check.ok:
        raise ValueError("invalid tableau: " + "; ".join(check.violations))
    u = np.array(u0, dtype=float)
    if u.shape != (problem.dim,):
        raise ValueError(f"u0 has shape {u.shape}, problem expects ({problem.dim},)")
    if tableau.s in (2, 3):
        coeffs = energy_coefficients(tableau)
        qform = quadratic_form(tableau, coeffs)
    else:
        coeffs = qform = None
    lam = extrapolation_weights(tableau)
    cache: dict = {}
    states = [u.copy()]
    ledgers = []
    failure = None
    for n, (t_n, tau_n) in enumerate(zip(partition.t[:-1], partition.tau)):
        try:
            u, ledger = step(problem, tableau, coeffs, qform, u, t_n, tau_n, opts, n, cache, lam)
        except StageSolveError as exc:
            failure = {
                "step": n, "t_n": float(t_n), "stage": exc.stage,
                "iterations": exc.iterations, "residual": exc.residual, "message": str(exc),
            }
            log.warning("run aborted at step %d: %s", n, exc)
            break
        states.append(u.copy())
        ledgers.append(ledger)
    result = RunResult(problem, tableau, partition, coeffs, np.array(states), ledgers, failure=failure)
    result.summary = _summarize(result, opts)
    return result


# --------------------------------------------------------------------------
# convergence


def observed_order(taus, errors) -> Optional[float]:
    """Least-squares slope of ``log(error)`` against ``log(tau)``."""
    taus = np.asarray(taus, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if taus.size < 2:
        return None
    slope, _ = np.polyfit(np.log(taus), np.log(errors), 1)
    return float(slope)


@dataclass(frozen=True)
class ConvergenceResult:
    taus: np.ndarray
    errors: np.ndarray
    rates: np.ndarray
    order: Optional[float]

    def table(self) -> list[dict]:
        rows = []
        for k, (tau, err) in enumerate(zip(self.taus, self.errors)):
            rate = None if k == 0 else float(self.rates[k - 1])
            rows.append({"tau": float(tau), "error": float(err), "rate": rate})
        return rows


def convergence_study(
    problem: EvolutionProblem,
    tableau: ButcherTableau,
    u_exact,
    tau_list,
    T: float = 1.0,
    opts: SolverOptions = SolverOptions(),
    jobs: int = 1,
) -> ConvergenceResult:
    """Errors ``|u_N - u_exact(T)|`` over uniform partitions with the given steps.

    ``problem`` must already carry the forcing that makes ``u_exact`` a
    solution (see :func:`dirkstab.problems.manufactured`). Steps are rounded
    so that ``T / tau`` is an integer.
    """
    taus = []
    parts = []
    for tau in tau_list:
        steps = max(1, int(round(T / tau)))
        parts.append(TimePartition.uniform(T, steps))
        taus.append(T / steps)
    u0 = np.asarray(u_exact(0.0), dtype=float)
    ref = np.asarray(u_exact(T), dtype=float)

    def one(part):
        res = run(problem, tableau, part, u0, opts)
        if not res.completed:
            raise StageSolveError(res.failure["message"], res.failure["iterations"], res.failure["residual"])
        return problem.norm(res.states[-1] - ref)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(one, parts))
    else:
        errors = [one(p) for p in parts]
    taus = np.array(taus)
    errors = np.array(errors)
    rates = np.log(errors[:-1] / errors[1:]) / np.log(taus[:-1] / taus[1:]) if taus.size > 1 else np.array([])
    return ConvergenceResult(taus, errors, rates, observed_order(taus, errors))


# --------------------------------------------------------------------------
# CSV output


def _fmt(x) -> str:
    return format(float(x), ".17g")


def ledger_columns(s: int) -> list[str]:
    return (
        ["n", "t_n", "tau_n", "E_before", "E_after", "Q"]
        + [f"work_{i}" for i in range(1, s + 1)]
        + ["identity_residual", "eta"]
        + [f"newton_iters_{i}" for i in range(1, s + 1)]
    )


def write_ledger_csv(ledgers, s: int, fh) -> None:
    """One row per step; floats with 17 significant digits."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ledger_columns(s))
    for l in ledgers:
        w.writerow(
            [l.n, _fmt(l.t_n), _fmt(l.tau_n), _fmt(l.energy_before), _fmt(l.energy_after), _fmt(l.q_value)]
            + [_fmt(x) for x in l.work_terms]
            + [_fmt(l.identity_residual), _fmt(l.eta)]
            + list(l.stage_iters)
        )


def write_trajectory_csv(times, states, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    dim = states.shape[1] if states.ndim == 2 else 0
    w.writerow(["t"] + [f"u_{k}" for k in range(1, dim + 1)])
    for t, u in zip(times, states):
        w.writerow([_fmt(t)] + [_fmt(x) for x in u])
